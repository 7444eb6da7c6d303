#include "crystal/energetics.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace crystal;

namespace {

const ExtractionParams kParams{0.05, 0.1, false};

Mat triangle_with_sides(double a, double b, double c) {
  // |x0 x1| = a, |x1 x2| = b, |x2 x0| = c
  Mat x = Mat::Zero(2, 3);
  x(0, 1) = a;
  const double u = (a * a + c * c - b * b) / (2 * a);
  x(0, 2) = u;
  x(1, 2) = std::sqrt(c * c - u * u);
  return x;
}

}  // namespace

TEST_CASE("quadratic potential") {
  Potential phi = quadratic_potential(0.25);
  CHECK(phi(1.0) == 0.0);
  CHECK(phi(1.1) == doctest::Approx(0.01));
  CHECK(phi.check().empty());
  CHECK(phi.sup_abs() == doctest::Approx(0.0625));
}

TEST_CASE("tabulated potential reproduces the sampled function") {
  std::vector<double> r, v;
  for (int k = 0; k <= 50; ++k) {
    r.push_back(0.75 + 0.01 * k);
    v.push_back((r.back() - 1.0) * (r.back() - 1.0));
  }
  Potential phi = tabulated_potential(r, v);
  for (double x = 0.8; x < 1.2; x += 0.0137) CHECK(phi(x) == doctest::Approx((x - 1) * (x - 1)).epsilon(1e-6).scale(1.0));
  CHECK(phi.check().empty());
  CHECK_THROWS_AS(tabulated_potential({1.0, 1.1, 1.3, 1.4}, {0, 1, 2, 3}), std::invalid_argument);
}

TEST_CASE("triangular local energy") {
  Potential phi = quadratic_potential(0.25);
  CHECK(local_energy_triangular(triangle_with_sides(1, 1, 1), phi) == doctest::Approx(0.0));
  CHECK(local_energy_triangular(triangle_with_sides(1.1, 1.1, 1.1), phi) == doctest::Approx(1.5 * 0.01));
  CHECK(local_energy_triangular(triangle_with_sides(1.01, 1.0, 0.99), phi) == doctest::Approx(1e-4).epsilon(1e-9));
}

TEST_CASE("cubic local energy") {
  Potential phi = quadratic_potential(0.25);
  Tessellation sq = build_cubic(2, 1.0);
  const auto& proto = sq.prototiles[0];
  CHECK(local_energy_cubic(proto.corners, proto, phi, 1.0) == doctest::Approx(0.0));
  CHECK(local_energy_cubic(1.05 * proto.corners, proto, phi, 1.0) == doctest::Approx(6 * 0.0025));
  Mat x = proto.corners;
  x(0, 0) += 0.01;
  double hand = 0.0;
  for (int k = 0; k < 4; ++k)
    for (int j = k + 1; j < 4; ++j) {
      double s = (proto.corners.col(k) - proto.corners.col(j)).norm();
      double r = (x.col(k) - x.col(j)).norm() / s;
      hand += (r - 1) * (r - 1);
    }
  CHECK(local_energy_cubic(x, proto, phi, 1.0) == doctest::Approx(hand).epsilon(1e-12));
}

TEST_CASE("total Hamiltonian on standard and deleted-vertex configurations") {
  Tessellation tess = build_triangular(1.0);
  Potential phi = quadratic_potential(0.25);
  ModelParams mp;
  mp.sigma = 10;
  mp.m = 2;
  PointConfig P = standard_configuration(tess, 4);
  TileComplex cx = extract(P, tess, kParams);
  CHECK(total_hamiltonian(cx, P, tess, mp, phi) == doctest::Approx(-32.0));
  CHECK(total_hamiltonian(cx, P, tess, mp, phi, HamiltonianVariant::tilde) == doctest::Approx(-32.0));
  P.points.erase(P.points.begin() + 3);
  cx = extract(P, tess, kParams);
  CHECK(total_hamiltonian(cx, P, tess, mp, phi) == doctest::Approx(30.0));
  for (int N : {4, 6}) {
    PointConfig S = standard_configuration(tess, N);
    CHECK(total_hamiltonian(extract(S, tess, kParams), S, tess, mp, phi) == doctest::Approx(-mp.m * N * N));
  }
}

TEST_CASE("m0") {
  Potential phi = quadratic_potential(0.25);
  ModelParams mp;
  Tessellation tri = build_triangular(1.0);
  CHECK(compute_m0(tri, compute_constants(tri), mp, phi) == doctest::Approx(0.0));
  Tessellation sq = build_cubic(2, 1.0);
  CHECK(compute_m0(sq, compute_constants(sq), mp, phi) == doctest::Approx(0.0));
  mp.c2 = -1.0;
  CHECK(compute_m0(tri, compute_constants(tri), mp, phi) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("standard configuration sizes") {
  CHECK(standard_configuration(build_triangular(1.0), 4).size() == 16);
  Tessellation sq = build_cubic(2, 1.0);
  PointConfig P = standard_configuration(sq, 4);
  CHECK(P.size() == 16);
  CHECK(extract(P, sq, kParams).size() == 16);
}

TEST_CASE("parameter validation") {
  Tessellation tri = build_triangular(1.0);
  const double rho_max = compute_constants(tri).rho_max;
  ModelParams mp;
  CHECK_NOTHROW(mp.validate(tri, rho_max));
  ModelParams bad = mp;
  bad.eps = 0.1;
  CHECK_THROWS_AS(bad.validate(tri, rho_max), std::invalid_argument);
  bad = mp;
  bad.rho = 0.5;
  CHECK_THROWS_AS(bad.validate(tri, rho_max), std::invalid_argument);
  bad = mp;
  bad.ell = 1.2;
  CHECK_THROWS_AS(bad.validate(tri, rho_max), std::invalid_argument);
}

TEST_CASE("local bound fit and fresh re-scan") {
  Potential phi = quadratic_potential(0.25);
  for (const char* name : {"triangular", "cubic"}) {
    Tessellation tess = build_tessellation(name, 2, 1.0);
    std::mt19937_64 rng(31);
    LocalBoundFit fit = verify_local_bound(tess, phi, 1.0, 0.05, 10000, rng);
    CHECK(fit.c1 > 0.0);
    CHECK(fit.violations == 0);
    auto fresh = sample_local_bound(tess, phi, 1.0, 0.05, 10000, rng);
    CHECK(count_violations(fresh, fit.c1, fit.c2) <= 10);
  }
}

TEST_CASE("local bound LP against a direct ratio scan") {
  std::vector<LocalBoundSample> samples{{1.0, 2.0, 0.0}, {3.0, 4.0, 0.0}, {0.5, 0.25, 0.1}};
  LocalBoundFit fit = fit_local_bound(samples, 0.0);
  // with c2 >= 0 and W >= 0 the best c2 is 0 and c1 = min E / D
  CHECK(fit.c2 == doctest::Approx(0.0));
  CHECK(fit.c1 == doctest::Approx(0.5));
  CHECK(count_violations(samples, fit.c1, fit.c2) == 0);
}

TEST_CASE("defected configurations respect the minimal vacancy separation") {
  Tessellation tess = build_triangular(1.0);
  std::mt19937_64 rng(2);
  DefectSpec spec;
  spec.vacancies = 2;
  spec.perturbation = 0.0;
  spec.min_separation = 3.0;
  for (int k = 0; k < 10; ++k) {
    PointConfig P = defected_configuration(tess, 6, spec, rng);
    CHECK(P.size() == 34);
    TileComplex cx = extract(P, tess, kParams);
    CHECK(cx.size() == 72 - 12);
    CHECK(cx.surface_points.size() == 12);
  }
}
