#include "crystal/energetics.hpp"

#include "crystal/polytope.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace crystal {

double Potential::operator()(double r) const {
  const double tol = 1e-12 * std::max(1.0, hi);
  if (r < lo - tol || r > hi + tol) {
    std::ostringstream os;
    os << "potential '" << name << "' evaluated at " << r << " outside [" << lo << ", " << hi << "]";
    throw std::domain_error(os.str());
  }
  return phi(r);
}

double Potential::sup_abs() const {
  double s = std::max(std::abs(phi(lo)), std::abs(phi(hi)));
  for (int k = 0; k <= 4096; ++k) s = std::max(s, std::abs(phi(lo + (hi - lo) * k / 4096.0)));
  return s;
}

std::string Potential::check() const {
  for (int k = 0; k < 64; ++k) {
    double r = lo + (hi - lo) * (k + 0.5) / 64.0;
    if (!(d2phi(r) > 0.0)) return "phi'' <= 0 at r = " + std::to_string(r);
  }
  if (1.0 < lo || 1.0 > hi) return "r = 1 outside the potential domain";
  if (std::abs(dphi(1.0)) > 1e-9) return "phi'(1) != 0";
  return "";
}

Potential quadratic_potential(double alpha) {
  Potential p;
  p.name = "quadratic";
  p.alpha = alpha;
  p.lo = 1.0 - alpha;
  p.hi = 1.0 + alpha;
  p.phi = [](double r) { return (r - 1.0) * (r - 1.0); };
  p.dphi = [](double r) { return 2.0 * (r - 1.0); };
  p.d2phi = [](double) { return 2.0; };
  return p;
}

Potential tabulated_potential(const std::vector<double>& r, const std::vector<double>& phi) {
  if (r.size() != phi.size() || r.size() < 4) throw std::invalid_argument("tabulated potential: need >= 4 samples");
  const double h = (r.back() - r.front()) / double(r.size() - 1);
  for (size_t k = 1; k < r.size(); ++k)
    if (std::abs(r[k] - r[k - 1] - h) > 1e-9 * std::max(1.0, h))
      throw std::invalid_argument("tabulated potential: samples must be uniformly spaced");
  const std::size_t n = phi.size();
  const double left = (-3.0 * phi[0] + 4.0 * phi[1] - phi[2]) / (2.0 * h);
  const double right = (3.0 * phi[n - 1] - 4.0 * phi[n - 2] + phi[n - 3]) / (2.0 * h);
  auto spline = std::make_shared<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
      phi.begin(), phi.end(), r.front(), h, left, right);
  Potential p;
  p.name = "tabulated";
  p.lo = r.front();
  p.hi = r.back();
  p.alpha = std::min(1.0 - p.lo, p.hi - 1.0);
  p.phi = [spline](double x) { return (*spline)(x); };
  p.dphi = [spline](double x) { return spline->prime(x); };
  p.d2phi = [spline](double x) { return spline->double_prime(x); };
  return p;
}

void ModelParams::validate(const Tessellation& tess, double rho_max) const {
  auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
  if (!(eps > 0.0)) fail("eps must be positive");
  if (!(rho > 0.0)) fail("rho must be positive");
  if (!(alpha > 0.0)) fail("alpha must be positive");
  if (!(eps < alpha / 4.0)) fail("eps must be < alpha/4");
  if (!(rho < rho_max)) fail("rho must be < rho_max = " + std::to_string(rho_max));
  if (tess.name == "triangular" && !(rho < ell / 3.0)) fail("rho must be < ell/3");
  if (!(ell > 1.0 - alpha / 2.0 && ell < 1.0 + alpha / 2.0)) fail("ell must lie in (1 - alpha/2, 1 + alpha/2)");
  if (!(sigma >= 0.0)) fail("sigma must be >= 0");
  if (!(beta > 0.0)) fail("beta must be positive");
  if (!(c0 >= 0.0)) fail("c0 must be >= 0");
}

double local_energy_triangular(const Mat& x, const Potential& phi) {
  return 0.5 * (phi((x.col(0) - x.col(1)).norm()) + phi((x.col(1) - x.col(2)).norm()) +
                phi((x.col(2) - x.col(0)).norm()));
}

double local_energy_cubic(const Mat& x, const StandardTile& proto, const Potential& phi, double ell) {
  double h = 0.0;
  for (auto [k, j] : proto.energy_pairs()) {
    double s = (proto.corners.col(k) - proto.corners.col(j)).norm();
    h += phi(ell * (x.col(k) - x.col(j)).norm() / s);
  }
  return h;
}

namespace {

Mat in_proto_order(const CandidateTile& tile) {
  Mat x(tile.local.rows(), tile.local.cols());
  for (size_t k = 0; k < tile.perm.size(); ++k) x.col(tile.perm[k]) = tile.local.col(k);
  return x;
}

}  // namespace

double local_energy(const CandidateTile& tile, const Tessellation& tess, const Potential& phi, double ell) {
  Mat x = in_proto_order(tile);
  if (tess.name == "triangular") return local_energy_triangular(x, phi);
  return local_energy_cubic(x, tess.prototiles[tile.type_id], phi, ell);
}

double standard_local_energy(const Tessellation& tess, int type_id, const Potential& phi, double ell) {
  const Mat& s = tess.prototiles[type_id].corners;
  if (tess.name == "triangular") return local_energy_triangular(s, phi);
  return local_energy_cubic(s, tess.prototiles[type_id], phi, ell);
}

double surface_measure(const TileComplex& complex) { return double(complex.surface_points.size()); }

double total_hamiltonian(const TileComplex& complex, const PointConfig& P, const Tessellation& tess,
                         const ModelParams& params, const Potential& phi, HamiltonianVariant variant) {
  double bulk = 0.0;
  if (variant == HamiltonianVariant::plain) {
    for (const auto& t : complex.tiles) bulk += local_energy(t, tess, phi, params.ell);
  } else {
    const bool tri = tess.name == "triangular";
    std::map<std::pair<int, int>, double> pairs;
    for (const auto& t : complex.tiles) {
      const StandardTile& proto = tess.prototiles[t.type_id];
      auto plist = tri ? proto.edge_pairs : proto.energy_pairs();
      for (auto [k, j] : plist) {
        int a = t.point_of(k), b = t.point_of(j);
        auto key = std::make_pair(std::min(a, b), std::max(a, b));
        if (pairs.count(key)) continue;
        double r = minimal_image(P.points[a], P.points[b], P.dom).norm();
        if (!tri) r = params.ell * r / (proto.corners.col(k) - proto.corners.col(j)).norm();
        pairs.emplace(key, phi(r));
      }
    }
    const double mult = params.tilde == TildeMultiplicity::ordered ? 2.0 : 1.0;
    for (const auto& [key, v] : pairs) bulk += mult * v;
  }
  return bulk + params.sigma * surface_measure(complex) - params.m * double(P.size());
}

double compute_m0(const Tessellation& tess, const TessellationConstants& consts, const ModelParams& params,
                  const Potential& phi) {
  double m0 = -INFINITY;
  for (size_t i = 0; i < tess.prototiles.size(); ++i) {
    double g = consts.gamma.at(int(i));
    double h = standard_local_energy(tess, int(i), phi, params.ell);
    m0 = std::max(m0, (h - (params.c2 - std::abs(params.c2)) * tess.prototiles[i].volume) / g);
  }
  return m0;
}

PointConfig standard_configuration(const Tessellation& tess, int N) {
  if (N < 1) throw std::invalid_argument("standard_configuration: N must be >= 1");
  StandardComplex sc = standard_complex(tess, N);
  return {TorusDomain(N, tess.cell), sc.points};
}

PointConfig blurred_configuration(const Tessellation& tess, int N, double r, double eps, std::mt19937_64& rng) {
  if (!(r > 0.0 && r < eps / 4.0 && r < 0.5))
    throw std::invalid_argument("blurred_configuration: need 0 < r < min(eps/4, 1/2)");
  const int n0 = int(std::ceil(4.0 / eps - 1e-12));
  const int K = int(std::floor(N / (1.0 + r)));
  if (K < n0) {
    int nmin = N;
    while (int(std::floor(nmin / (1.0 + r))) < n0) ++nmin;
    throw std::invalid_argument("blurred_configuration: N too small, need N >= " + std::to_string(nmin));
  }
  if (tess.cell_vertices.size() != 1 || tess.cell_vertices[0].norm() > 1e-12)
    throw std::invalid_argument("blurred_configuration: tessellation must have one vertex per cell at the origin");
  const int d = tess.d;
  const int bulk = K - n0;
  const double O = N - (1.0 + r) * bulk;
  auto g = [&](int u) { return u <= bulk ? (1.0 + r) * u : (1.0 + r) * bulk + (u - bulk) * O / n0; };

  TorusDomain dom(N, tess.cell);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  PointConfig P{dom, {}};
  std::vector<int> u(d, 0);
  long total = 1;
  for (int k = 0; k < d; ++k) total *= K;
  P.points.reserve(total);
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    Vec f(d);
    for (int k = 0; k < d; ++k) {
      f(k) = g(int(rem % K));
      rem /= K;
    }
    Vec x = tess.cell * f;
    Vec b(d);
    do {
      for (int k = 0; k < d; ++k) b(k) = unif(rng);
    } while (b.squaredNorm() >= 1.0);
    P.points.push_back(dom.wrap(x + 0.5 * r * b));
  }
  return P;
}

PointConfig defected_configuration(const Tessellation& tess, int N, const DefectSpec& spec, std::mt19937_64& rng) {
  PointConfig P = standard_configuration(tess, N);
  const int d = tess.d;
  std::uniform_real_distribution<double> unif(-1.0, 1.0), u01(0.0, 1.0);
  for (auto& x : P.points) {
    Vec b(d);
    do {
      for (int k = 0; k < d; ++k) b(k) = unif(rng);
    } while (b.squaredNorm() >= 1.0);
    x = P.dom.wrap(x + spec.perturbation * b);
  }
  std::vector<Vec> holes;
  for (int v = 0; v < spec.vacancies && P.size() > 0; ++v) {
    std::uniform_int_distribution<int> pick(0, P.size() - 1);
    int j = pick(rng);
    for (int tries = 0;; j = pick(rng)) {
      bool ok = true;
      for (const Vec& h : holes) ok = ok && minimal_image(P.points[j], h, P.dom).norm() >= spec.min_separation;
      if (ok) break;
      if (++tries > 10000) throw std::invalid_argument("defected_configuration: vacancies do not fit at this separation");
    }
    holes.push_back(P.points[j]);
    P.points.erase(P.points.begin() + j);
  }
  if (spec.pull > 0.0)
    for (const Vec& h : holes)
      for (auto& x : P.points) {
        Vec r = minimal_image(x, h, P.dom);
        if (r.norm() <= 1.01 * tess.ell) x = P.dom.wrap(x + spec.pull * u01(rng) * r.normalized());
      }
  for (int k = 0; k < spec.interstitials; ++k) {
    Vec f(d);
    for (int a = 0; a < d; ++a) f(a) = u01(rng);
    P.points.push_back(P.dom.wrap(P.dom.from_fractional(f)));
  }
  return P;
}

std::vector<LocalBoundSample> sample_local_bound(const Tessellation& tess, const Potential& phi, double ell,
                                                 double eps, int samples, std::mt19937_64& rng) {
  const int d = tess.d;
  const Mat s = tess.placed_corners(0);
  const int type = tess.placements[0].type_id;
  const double h_std = standard_local_energy(tess, type, phi, ell);
  const double vol_std = tess.prototiles[type].volume;
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<LocalBoundSample> out;
  out.reserve(samples);
  while (int(out.size()) < samples) {
    Mat x = s;
    for (int k = 0; k < x.cols(); ++k) {
      Vec b(d);
      do {
        for (int a = 0; a < d; ++a) b(a) = unif(rng);
      } while (b.squaredNorm() >= 1.0);
      x.col(k) += eps * b;
    }
    auto tile = candidate_from_corners(x, tess, eps);
    if (!tile) continue;
    LocalBoundSample smp;
    smp.E = local_energy(*tile, tess, phi, ell) - h_std;
    for (size_t q = 0; q < tile->per_simplex_gradients.size(); ++q) {
      double dist = nearest_rotation(tile->per_simplex_gradients[q]).dist;
      smp.D += tile->simplex_volumes[q] * dist * dist;
    }
    smp.W = tile->volume - vol_std;
    out.push_back(smp);
  }
  return out;
}

LocalBoundFit fit_local_bound(const std::vector<LocalBoundSample>& samples, double c2_min) {
  // c2 only tightens constraints with W >= 0, so the optimum sits at c2 = c2_min
  LocalBoundFit fit;
  fit.c2 = c2_min;
  fit.c1 = INFINITY;
  for (const auto& s : samples)
    if (s.D > 0.0) fit.c1 = std::min(fit.c1, (s.E - c2_min * s.W) / s.D);
  for (const auto& s : samples)
    if (s.W < 0.0) {
      // a negative volume excess would allow raising c2; U_eps excludes it
      throw std::logic_error("fit_local_bound: sample with lambda(t) < lambda(t_hat)");
    }
  fit.samples = int(samples.size());
  fit.violations = count_violations(samples, fit.c1, fit.c2);
  return fit;
}

int count_violations(const std::vector<LocalBoundSample>& samples, double c1, double c2) {
  int v = 0;
  for (const auto& s : samples)
    if (c1 * s.D + c2 * s.W > s.E + 1e-12 * std::max(1.0, std::abs(s.E))) ++v;
  return v;
}

LocalBoundFit verify_local_bound(const Tessellation& tess, const Potential& phi, double ell, double eps, int samples,
                                 std::mt19937_64& rng) {
  return fit_local_bound(sample_local_bound(tess, phi, ell, eps, samples, rng));
}

}  // namespace crystal
