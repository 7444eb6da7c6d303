#pragma once

#include "crystal/deformation.hpp"
#include "crystal/geometry.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace crystal {

enum class DomainKind { box, torus };

/// Parallelepiped x = origin + axes * u, u in [0,1)^d; periodic when kind == torus.
struct RasterDomain {
  DomainKind kind = DomainKind::box;
  int d = 2;
  Vec origin;
  Mat axes;

  static RasterDomain box(const Vec& lo, const Vec& hi);
  static RasterDomain square(int d, double half_width);
  static RasterDomain torus(const TorusDomain& t);
  double volume() const { return std::abs(axes.determinant()); }
  Vec center() const { return origin + 0.5 * axes * Vec::Ones(d); }
};

/// Grid of d x d matrices sampled at cell centers. Cells are stored in row-major index order
/// (last axis fastest), each matrix row-major.
class RasterField {
 public:
  using CellMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstCellMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  RasterField() = default;
  /// n_k = round(resolution * |axes_k|), at least 1; values zero.
  RasterField(RasterDomain dom, double resolution);

  const RasterDomain& domain() const { return dom_; }
  int d() const { return dom_.d; }
  double resolution() const { return resolution_; }
  const std::vector<int>& shape() const { return shape_; }
  std::size_t cells() const { return cells_; }
  double cell_volume() const { return cell_volume_; }
  /// physical displacement of one index step along each axis (columns)
  const Mat& step() const { return step_; }

  CellMap cell(std::size_t c) { return {values_.data() + c * dd(), d(), d()}; }
  ConstCellMap cell(std::size_t c) const { return {values_.data() + c * dd(), d(), d()}; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  std::size_t index(const std::vector<int>& idx) const;
  std::vector<int> multi_index(std::size_t c) const;
  /// neighbour along `axis` by `delta` steps; wraps on tori, -1 outside a box
  long neighbour(std::size_t c, int axis, int delta) const;
  Vec center(std::size_t c) const;

  /// throws std::runtime_error on non-finite values or inconsistent shape
  void check() const;

 private:
  int dd() const { return dom_.d * dom_.d; }

  RasterDomain dom_;
  double resolution_ = 0.0;
  std::vector<int> shape_;
  std::vector<std::size_t> strides_;
  std::size_t cells_ = 0;
  double cell_volume_ = 0.0;
  Mat step_;
  std::vector<double> values_;
};

enum class FieldKind { constant_rotation, gradient, dislocation, counterexample };

FieldKind parse_field_kind(const std::string& name);
std::string to_string(FieldKind kind);

/// Members are V(x) = R0 Vt((x - c) / eta) with c the domain center and R0 a Haar rotation.
struct FieldParams {
  double eta = 1.0;
  bool random_rotation = true;
  double amplitude = 0.01;  ///< gradient: displacement amplitude
  int modes = 3;            ///< gradient: number of sine modes
  Vec burgers;              ///< dislocation: Burgers vector, default e_1
  double core = 0.0;        ///< dislocation: core radius (0 = sharp, wrapped angle differences)
  double bump = 1.0;        ///< counterexample: peak rotation angle
};

RasterField make_field(FieldKind kind, const RasterDomain& dom, double resolution, const FieldParams& params,
                       std::mt19937_64& rng);

enum class DNormMixing { inside, outside };

/// 2-form coefficients of the row-wise exterior derivative.
struct DiscreteD {
  int d = 2;
  int pairs = 1;
  double cell_volume = 0.0;
  double norm = 0.0;            ///< for the p and mixing requested
  std::vector<double> coeffs;   ///< per cell, per row i, per pair k<l

  double coefficient(std::size_t cell, int row, int pair) const {
    return coeffs[(cell * d + row) * pairs + pair];
  }
  double norm_for(double p, DNormMixing mixing) const;
  double max_abs() const;
};

DiscreteD discrete_d(const RasterField& field, double p, DNormMixing mixing = DNormMixing::inside);

struct GapReport {
  double lhs = 0.0;
  double rhs1 = 0.0;
  double rhs2 = 0.0;
  double p = 2.0;
  Mat R;
  bool below_threshold = false;  ///< p < 2d/(2+d)
};

GapReport rigidity_gap(const RasterField& field, double p, DNormMixing mixing = DNormMixing::inside);
/// Same report, reusing a precomputed exterior derivative.
GapReport rigidity_gap(const RasterField& field, const DiscreteD& dV, double p, DNormMixing mixing);

/// dist(A, SO(d)) in Frobenius norm; closed form for d = 2.
double distance_to_rotations(const Eigen::Ref<const Mat>& A);

struct EnsembleMember {
  FieldKind kind = FieldKind::gradient;
  double eta = 1.0;
  std::uint64_t seed = 0;
  std::vector<GapReport> reports;  ///< one per requested p
};

struct EnsembleSpec {
  int constant_rotation = 6;
  int gradient = 16;
  int dislocation = 12;
  int counterexample = 16;
  double half_width = 2.0;   ///< base domain [-w, w]^2
  double resolution = 16.0;  ///< cells per unit length
  double core = 0.5;         ///< dislocation core radius in base units
  std::uint64_t seed = 1;
  int threads = 1;
  DNormMixing mixing = DNormMixing::inside;

  int size() const { return constant_rotation + gradient + dislocation + counterexample; }
};

/// Member j draws its parameters from seed (spec.seed, j), so every eta sees the same base fields.
std::vector<EnsembleMember> run_ensemble(const EnsembleSpec& spec, double eta, const std::vector<double>& ps);

struct ConstantFit {
  double C1 = 0.0;
  double C2 = 0.0;
  int constraints = 0;
};

/// Minimises C1 + C2 subject to lhs <= C1 rhs1 + C2 rhs2 on every member (report `p_index`), C1, C2 >= 0.
ConstantFit estimate_constants(const std::vector<EnsembleMember>& members, std::size_t p_index = 0);
ConstantFit estimate_constants(const std::vector<GapReport>& reports);

/// Reports at the fit's noise floor (lhs <= 1e-10 max(1, max lhs)) are not counted.
int count_gap_violations(const std::vector<GapReport>& reports, const ConstantFit& fit, double rel_tol = 1e-9);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct ScalingResult {
  std::vector<double> etas;
  std::vector<double> ps;
  std::vector<std::vector<ConstantFit>> fits;  ///< [p][eta]
  std::vector<std::vector<EnsembleMember>> members;  ///< [eta]
  std::vector<double> c1_slope;                ///< per p
  std::vector<double> c2_slope;                ///< per p
};

ScalingResult scaling_experiment(const EnsembleSpec& spec, const std::vector<double>& etas,
                                 const std::vector<double>& ps);

struct SharpnessPoint {
  double eta = 1.0;
  double inf_gap = 0.0;     ///< inf_R |V - R|_{L2(eta M)}
  double dV_norm = 0.0;
  double implied_C2 = 0.0;  ///< inf_gap / dV_norm (dist(V, SO) vanishes)
};

/// Fixed unit bump on growing domains eta [-w, w]^2.
std::vector<SharpnessPoint> sharpness_experiment(const std::vector<double>& etas, double p, double resolution,
                                                 double half_width = 2.0, double bump = 1.0);

enum class CellState : signed char { crystal = 0, tube = 1, far = 2 };

/// Rasterised crystal plus the distance data of the collar; independent of the random rotation.
struct ExtensionGeometry {
  RasterField base;                 ///< V on crystal cells, zero elsewhere
  std::vector<CellState> state;
  std::vector<int> simplex;         ///< global simplex id for crystal cells, -1 elsewhere
  std::vector<double> distance;     ///< distance to the crystal cells
  std::vector<long> source;         ///< nearest crystal cell for tube cells
  double rho = 0.0;
};

ExtensionGeometry extension_geometry(const TileComplex& complex, const DeformationField& field,
                                     const PointConfig& P, double rho, double resolution);

/// (1 - g) V(nearest crystal cell) + g Rt in the tube, g = distance / rho; Rt beyond.
RasterField assemble_extension(const ExtensionGeometry& geom, const Mat& Rt);

struct Extension {
  ExtensionGeometry geom;
  RasterField field;
  Mat R_tilde;
};

/// Haar-random Rt from rng.
Extension extend_into_defects(const TileComplex& complex, const DeformationField& field, const PointConfig& P,
                              double rho, double resolution, std::mt19937_64& rng);

struct ExtensionStats {
  double max_dV = 0.0;        ///< max |coefficient| of dV
  double max_dist2 = 0.0;     ///< max dist(V, SO)^2
  int unsupported = 0;        ///< nonzero dV on cells touching neither the tube nor a simplex interface
  double lipschitz = 0.0;     ///< max adjacent jump / step over tube cells
};

ExtensionStats extension_stats(const ExtensionGeometry& geom, const RasterField& field, double zero_tol = 1e-10);

struct ExtensionEnvelope {
  double max_dV = 0.0;
  double max_dist2 = 0.0;
};

/// Sup of the extension maxima over Rt = rotation2(2 pi k / angles), k < angles (d = 2).
ExtensionEnvelope extension_envelope(const ExtensionGeometry& geom, int angles);

}  // namespace crystal
