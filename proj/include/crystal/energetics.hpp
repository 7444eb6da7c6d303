#pragma once

#include "crystal/extraction.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace crystal {

/// Pair potential on [1 - alpha, 1 + alpha].
struct Potential {
  std::string name = "quadratic";
  double alpha = 0.25;
  double lo = 0.75;  ///< domain [lo, hi]
  double hi = 1.25;
  std::function<double(double)> phi;
  std::function<double(double)> dphi;
  std::function<double(double)> d2phi;

  double operator()(double r) const;
  /// sup |phi| over the domain (sampled on a fine grid plus endpoints)
  double sup_abs() const;
  /// empty when phi'' > 0 at 64 samples and phi'(1) = 0 within 1e-9
  std::string check() const;
};

Potential quadratic_potential(double alpha);
/// Cubic B-spline through uniformly spaced samples (r_k, phi_k); the domain is the sample range.
Potential tabulated_potential(const std::vector<double>& r, const std::vector<double>& phi);

enum class TildeMultiplicity { once, ordered };
enum class HamiltonianVariant { plain, tilde };

struct ModelParams {
  double eps = 0.05;
  double rho = 0.1;
  double c0 = 0.5;
  double ell = 1.0;
  double alpha = 0.25;
  double sigma = 10.0;
  double m = 2.0;
  double beta = 10.0;
  double c1 = 0.0;
  double c2 = 0.0;
  TildeMultiplicity tilde = TildeMultiplicity::once;

  ExtractionParams extraction() const { return {eps, rho, false}; }
  /// throws std::invalid_argument naming the violated constraint
  void validate(const Tessellation& tess, double rho_max) const;
};

double local_energy_triangular(const Mat& corners, const Potential& phi);
double local_energy_cubic(const Mat& corners, const StandardTile& proto, const Potential& phi, double ell);
/// Dispatches on the tessellation; corners are taken in prototile order through the tile's correspondence.
double local_energy(const CandidateTile& tile, const Tessellation& tess, const Potential& phi, double ell);
/// H_loc of the prototile itself.
double standard_local_energy(const Tessellation& tess, int type_id, const Potential& phi, double ell);

double surface_measure(const TileComplex& complex);

double total_hamiltonian(const TileComplex& complex, const PointConfig& P, const Tessellation& tess,
                         const ModelParams& params, const Potential& phi,
                         HamiltonianVariant variant = HamiltonianVariant::plain);

double compute_m0(const Tessellation& tess, const TessellationConstants& consts, const ModelParams& params,
                  const Potential& phi);

PointConfig standard_configuration(const Tessellation& tess, int N);

/// Bulk boxes scaled by 1 + r, the last n0 = ceil(4/eps) boxes per axis stretched to close the torus, then
/// every point moved uniformly within the r/2 ball.
PointConfig blurred_configuration(const Tessellation& tess, int N, double r, double eps, std::mt19937_64& rng);

/// Standard configuration with vacancies, small perturbations and interstitials.
struct DefectSpec {
  int vacancies = 1;
  double perturbation = 0.01;
  int interstitials = 0;
  double pull = 0.0;  ///< nearest neighbours of each vacancy move toward it by U[0, pull]
  double min_separation = 0.0;  ///< minimal distance between vacancies
};
PointConfig defected_configuration(const Tessellation& tess, int N, const DefectSpec& spec, std::mt19937_64& rng);

struct LocalBoundSample {
  double E = 0.0;  ///< H_loc(t) - H_loc(t_hat)
  double D = 0.0;  ///< sum lambda dist(V, SO(d))^2
  double W = 0.0;  ///< lambda(t) - lambda(t_hat)
};

struct LocalBoundFit {
  double c1 = 0.0;
  double c2 = 0.0;
  int violations = 0;
  int samples = 0;
};

/// Tiles with corners uniform in eps-balls around the prototile, kept when they lie in U_eps.
std::vector<LocalBoundSample> sample_local_bound(const Tessellation& tess, const Potential& phi, double ell,
                                                 double eps, int samples, std::mt19937_64& rng);

/// Maximises c1 subject to c1 D + c2 W <= E on every sample and c2 >= c2_min.
LocalBoundFit fit_local_bound(const std::vector<LocalBoundSample>& samples, double c2_min = 0.0);

int count_violations(const std::vector<LocalBoundSample>& samples, double c1, double c2);

LocalBoundFit verify_local_bound(const Tessellation& tess, const Potential& phi, double ell, double eps, int samples,
                                 std::mt19937_64& rng);

}  // namespace crystal
