#include "crystal/energetics.hpp"
#include "crystal/rigidity.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace crystal;

namespace {

/// Counter-clockwise loop sum of row `row` around the plaquette spanned by cells (i, j) .. (i+1, j+1), in index units.
double loop_sum(const RasterField& f, int i, int j, int row) {
  const Mat& B = f.step();
  auto w = [&](int a, int b, int axis) {
    return (f.cell(f.index({a, b})).row(row) * B.col(axis))(0);
  };
  return w(i, j, 0) + w(i + 1, j, 1) - w(i, j + 1, 0) - w(i, j, 1);
}

RasterField rotated(const RasterField& f, const Mat& Q) {
  RasterField g = f;
  for (std::size_t c = 0; c < g.cells(); ++c) g.cell(c) = Q * f.cell(c);
  return g;
}

/// min C1 + C2 over a fine C1 grid, C2 the smallest feasible value for each C1.
double lp_grid(const std::vector<GapReport>& reps, double c1_max) {
  double best = INFINITY;
  for (int k = 0; k <= 200000; ++k) {
    const double c1 = c1_max * k / 200000.0;
    double c2 = 0.0;
    bool ok = true;
    for (const auto& r : reps) {
      const double need = r.lhs - c1 * r.rhs1;
      if (need <= 0.0) continue;
      if (r.rhs2 > 0.0) {
        c2 = std::max(c2, need / r.rhs2);
      } else {
        ok = false;
      }
    }
    if (ok) best = std::min(best, c1 + c2);
  }
  return best;
}

}  // namespace

TEST_CASE("raster field indexing") {
  RasterField f(RasterDomain::box(Vec::Zero(2), (Vec(2) << 2.0, 1.0).finished()), 16.0);
  CHECK(f.shape() == std::vector<int>{32, 16});
  CHECK(f.cells() == 512);
  CHECK(f.cell_volume() == doctest::Approx(1.0 / 256));
  CHECK(f.index(f.multi_index(77)) == 77);
  CHECK(f.neighbour(f.index({31, 0}), 0, 1) == -1);
  CHECK((f.center(0) - Vec::Constant(2, 1.0 / 32)).norm() < 1e-14);
  Tessellation tess = build_triangular(1.0);
  RasterField t(RasterDomain::torus(TorusDomain(4, tess.cell)), 16.0);
  CHECK(t.neighbour(t.index({63, 5}), 0, 1) == long(t.index({0, 5})));
}

TEST_CASE("constant rotation has a zero gap report") {
  std::mt19937_64 rng(2);
  RasterField f = make_field(FieldKind::constant_rotation, RasterDomain::square(2, 2.0), 16, {}, rng);
  for (double p : {1.0, 2.0}) {
    GapReport g = rigidity_gap(f, p);
    CHECK(g.lhs <= 1e-12);
    CHECK(g.rhs1 <= 1e-12);
    CHECK(g.rhs2 <= 1e-12);
  }
}

TEST_CASE("curl of a discrete gradient vanishes on boxes and tori") {
  std::mt19937_64 rng(6);
  FieldParams fp;
  fp.amplitude = 0.1;
  RasterField box = make_field(FieldKind::gradient, RasterDomain::square(2, 2.0), 16, fp, rng);
  CHECK(discrete_d(box, 2.0).max_abs() <= 1e-12);
  Tessellation tess = build_triangular(1.0);
  RasterField torus = make_field(FieldKind::gradient, RasterDomain::torus(TorusDomain(4, tess.cell)), 16, fp, rng);
  CHECK(discrete_d(torus, 2.0).max_abs() <= 1e-12);
  RasterField cube = make_field(FieldKind::gradient, RasterDomain::square(3, 1.0), 16, fp, rng);
  CHECK(discrete_d(cube, 2.0).max_abs() <= 1e-12);
}

TEST_CASE("gradient fields stay close to the rotations") {
  std::mt19937_64 rng(7);
  FieldParams fp;
  fp.amplitude = 0.01;
  RasterField f = make_field(FieldKind::gradient, RasterDomain::square(2, 2.0), 16, fp, rng);
  double worst = 0.0;
  for (std::size_t c = 0; c < f.cells(); ++c) worst = std::max(worst, distance_to_rotations(f.cell(c)));
  CHECK(worst <= 0.1);
}

TEST_CASE("constant curl field") {
  RasterField f(RasterDomain::box(Vec::Zero(2), Vec::Ones(2)), 16.0);
  for (std::size_t c = 0; c < f.cells(); ++c) {
    f.cell(c).setZero();
    f.cell(c)(0, 1) = f.center(c)(0);
  }
  DiscreteD dV = discrete_d(f, 2.0);
  for (std::size_t c = 0; c < f.cells(); ++c) {
    CHECK(dV.coefficient(c, 0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(dV.coefficient(c, 1, 0)) < 1e-12);
  }
  CHECK(dV.norm == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(dV.norm_for(1.0, DNormMixing::inside) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dislocation: unit circulation around the core plaquette") {
  std::mt19937_64 rng(1);
  FieldParams fp;
  fp.random_rotation = false;
  RasterField f = make_field(FieldKind::dislocation, RasterDomain::square(2, 2.0), 16, fp, rng);
  DiscreteD dV = discrete_d(f, 2.0);
  std::size_t core = 0;
  for (std::size_t c = 0; c < f.cells(); ++c)
    if (std::abs(dV.coefficient(c, 0, 0)) > std::abs(dV.coefficient(core, 0, 0))) core = c;
  auto idx = f.multi_index(core);
  CHECK(loop_sum(f, idx[0], idx[1], 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(loop_sum(f, idx[0], idx[1], 1)) < 1e-6);
  CHECK(dV.coefficient(core, 0, 0) * f.cell_volume() == doctest::Approx(1.0).epsilon(1e-6));
  // the curl is a point mass: every other plaquette carries no circulation
  double elsewhere = 0.0;
  for (int i = 0; i + 1 < f.shape()[0]; ++i)
    for (int j = 0; j + 1 < f.shape()[1]; ++j)
      if (f.index({i, j}) != core) elsewhere = std::max(elsewhere, std::abs(loop_sum(f, i, j, 0)));
  CHECK(elsewhere < 1e-9);
  GapReport g = rigidity_gap(f, 2.0);
  CHECK(g.lhs > 0.0);
  CHECK(g.rhs2 > 0.1);
}

TEST_CASE("gap report is invariant under a global rotation") {
  std::mt19937_64 rng(8);
  for (FieldKind kind : {FieldKind::gradient, FieldKind::dislocation, FieldKind::counterexample}) {
    FieldParams fp;
    fp.amplitude = 0.1;
    fp.core = 0.5;
    RasterField f = make_field(kind, RasterDomain::square(2, 2.0), 16, fp, rng);
    RasterField g = rotated(f, haar_rotation(2, rng));
    for (double p : {1.0, 2.0}) {
      GapReport a = rigidity_gap(f, p), b = rigidity_gap(g, p);
      CHECK(std::abs(a.lhs - b.lhs) <= 1e-9 * (1.0 + a.lhs));
      CHECK(std::abs(a.rhs1 - b.rhs1) <= 1e-9 * (1.0 + a.rhs1));
      // the component-wise norm of dV is only orthogonally invariant at p = 2
      if (p == 2.0) CHECK(std::abs(a.rhs2 - b.rhs2) <= 1e-9 * (1.0 + a.rhs2));
    }
  }
}

TEST_CASE("distance to rotations agrees with the SVD projection") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g;
  for (int k = 0; k < 200; ++k) {
    Mat A(2, 2);
    A << g(rng), g(rng), g(rng), g(rng);
    CHECK(distance_to_rotations(A) == doctest::Approx(nearest_rotation(A).dist).epsilon(1e-12));
  }
  Mat A3 = Mat::Identity(3, 3) * 1.5;
  CHECK(distance_to_rotations(A3) == doctest::Approx(std::sqrt(3 * 0.25)));
}

TEST_CASE("mixing order: outside sum dominates the inside sum") {
  std::mt19937_64 rng(3);
  FieldParams fp;
  fp.random_rotation = false;
  fp.bump = 1.0;
  RasterField f = make_field(FieldKind::counterexample, RasterDomain::square(2, 2.0), 16, fp, rng);
  DiscreteD dV = discrete_d(f, 2.0);
  for (double p : {1.0, 2.0})
    CHECK(dV.norm_for(p, DNormMixing::outside) >= dV.norm_for(p, DNormMixing::inside) * (1 - 1e-12));
  CHECK(dV.norm_for(1.0, DNormMixing::outside) == doctest::Approx(dV.norm_for(1.0, DNormMixing::inside)));
}

TEST_CASE("constant fit against a grid search") {
  std::vector<GapReport> reps;
  auto add = [&](double l, double a, double b) {
    GapReport g;
    g.lhs = l;
    g.rhs1 = a;
    g.rhs2 = b;
    reps.push_back(g);
  };
  add(1.0, 1.0, 0.0);
  add(2.0, 1.0, 1.0);
  add(1.0, 0.1, 2.0);
  add(0.5, 0.2, 0.3);
  ConstantFit fit = estimate_constants(reps);
  CHECK(fit.C1 == doctest::Approx(1.0));
  CHECK(fit.C2 == doctest::Approx(1.0));
  CHECK(fit.C1 + fit.C2 == doctest::Approx(lp_grid(reps, 5.0)).epsilon(1e-4));
  CHECK(count_gap_violations(reps, fit) == 0);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    reps.clear();
    for (int k = 0; k < 30; ++k) add(u(rng), u(rng), u(rng));
    fit = estimate_constants(reps);
    CHECK(count_gap_violations(reps, fit) == 0);
    CHECK(fit.C1 + fit.C2 == doctest::Approx(lp_grid(reps, 25.0)).epsilon(1e-3));
  }
}

TEST_CASE("pure-gradient ensembles fix C1 only") {
  EnsembleSpec spec;
  spec.constant_rotation = 0;
  spec.dislocation = 0;
  spec.counterexample = 0;
  spec.gradient = 6;
  auto members = run_ensemble(spec, 1.0, {2.0});
  for (const auto& m : members) CHECK(m.reports[0].rhs2 <= 1e-12);
  ConstantFit fit = estimate_constants(members, 0);
  CHECK(fit.C1 > 0.0);
  CHECK(std::isfinite(fit.C1));
  CHECK(fit.C2 == 0.0);
}

TEST_CASE("ensembles are deterministic and thread independent") {
  EnsembleSpec spec;
  spec.constant_rotation = 1;
  spec.gradient = 2;
  spec.dislocation = 2;
  spec.counterexample = 2;
  auto a = run_ensemble(spec, 2.0, {2.0, 1.0});
  spec.threads = 3;
  auto b = run_ensemble(spec, 2.0, {2.0, 1.0});
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t q = 0; q < 2; ++q) {
      CHECK(a[k].reports[q].lhs == b[k].reports[q].lhs);
      CHECK(a[k].reports[q].rhs2 == b[k].reports[q].rhs2);
    }
}

TEST_CASE("log-log slope") {
  CHECK(loglog_slope({1, 2, 4, 8}, {3, 6, 12, 24}) == doctest::Approx(1.0));
  CHECK(loglog_slope({1, 2, 4}, {5, 5, 5}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(loglog_slope({1, 2}, {0, 1}), std::invalid_argument);
}

TEST_CASE("defect extension: far field, tube blend and support") {
  Tessellation tess = build_triangular(1.0);
  std::mt19937_64 rng(100);
  DefectSpec spec;
  spec.vacancies = 1;
  spec.perturbation = 0.0;
  spec.pull = 0.04;
  PointConfig P = defected_configuration(tess, 6, spec, rng);
  TileComplex cx = extract(P, tess, {0.05, 0.1, false});
  DeformationField field = build_deformation(cx, tess);
  Extension ext = extend_into_defects(cx, field, P, 0.1, 40, rng);
  const auto& geom = ext.geom;
  CHECK(is_rotation(ext.R_tilde));
  int tube = 0, far = 0;
  for (std::size_t c = 0; c < ext.field.cells(); ++c) {
    switch (geom.state[c]) {
      case CellState::far:
        ++far;
        CHECK((ext.field.cell(c) - ext.R_tilde).norm() == 0.0);
        CHECK(geom.distance[c] >= geom.rho);
        break;
      case CellState::tube: {
        ++tube;
        const double g = geom.distance[c] / geom.rho;
        CHECK(g >= 0.0);
        CHECK(g < 1.0);
        Mat Vn = geom.base.cell(std::size_t(geom.source[c]));
        CHECK(geom.state[std::size_t(geom.source[c])] == CellState::crystal);
        CHECK((ext.field.cell(c) - ((1 - g) * Vn + g * ext.R_tilde)).norm() < 1e-14);
        break;
      }
      case CellState::crystal: CHECK(geom.simplex[c] >= 0); break;
    }
  }
  CHECK(tube > 0);
  CHECK(far > 0);
  ExtensionStats st = extension_stats(geom, ext.field);
  CHECK(st.unsupported == 0);
  CHECK(std::isfinite(st.lipschitz));
  // the envelope over angles dominates every realised extension
  ExtensionEnvelope env = extension_envelope(geom, 256);
  for (int k = 0; k < 8; ++k) {
    std::uniform_real_distribution<double> u(0.0, 2 * M_PI);
    ExtensionStats s = extension_stats(geom, assemble_extension(geom, rotation2(u(rng))));
    CHECK(s.max_dV <= env.max_dV * 1.05);
    CHECK(s.max_dist2 <= env.max_dist2 * (1 + 1e-12));
  }
  ExtensionEnvelope exact = extension_envelope(geom, 4);
  double dv = 0.0, d2 = 0.0;
  for (int k = 0; k < 4; ++k) {
    ExtensionStats s = extension_stats(geom, assemble_extension(geom, rotation2(2 * M_PI * k / 4)));
    dv = std::max(dv, s.max_dV);
    d2 = std::max(d2, s.max_dist2);
  }
  CHECK(exact.max_dV == doctest::Approx(dv).epsilon(1e-12));
  CHECK(exact.max_dist2 == doctest::Approx(d2).epsilon(1e-12));
}

TEST_CASE("defect-free crystals need no collar") {
  Tessellation tess = build_triangular(1.0);
  PointConfig P = standard_configuration(tess, 4);
  TileComplex cx = extract(P, tess, {0.05, 0.1, false});
  ExtensionGeometry geom = extension_geometry(cx, build_deformation(cx, tess), P, 0.1, 40);
  for (auto s : geom.state) CHECK(s == CellState::crystal);
}

TEST_CASE("sharpness family: constant curl norm, gap bounded below") {
  auto pts = sharpness_experiment({2, 4, 8}, 2.0, 16);
  for (const auto& s : pts) {
    CHECK(s.dV_norm == doctest::Approx(pts[0].dV_norm).epsilon(0.02));
    CHECK(s.inf_gap > 0.5);
  }
  CHECK(pts[1].inf_gap >= pts[0].inf_gap);
  CHECK(pts[2].inf_gap >= pts[1].inf_gap);
}
