#include "crystal/rigidity.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <stdexcept>
#include <thread>

namespace crystal {

namespace {

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * M_PI);
  return a;
}

std::mt19937_64 member_rng(std::uint64_t seed, std::uint64_t j) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(j), std::uint32_t(j >> 32)};
  return std::mt19937_64(seq);
}

/// Index-space forward difference of scalar samples; backward at box ends.
double index_difference(const RasterField& f, const std::vector<double>& s, std::size_t c, int axis) {
  long up = f.neighbour(c, axis, +1);
  if (up >= 0) return s[std::size_t(up)] - s[c];
  long down = f.neighbour(c, axis, -1);
  if (down >= 0) return s[c] - s[std::size_t(down)];
  return 0.0;
}

/// V = R0 (Id + grad u) with grad u built from index differences of u pulled back through the step matrix.
void fill_from_displacement(RasterField& f, const std::vector<std::vector<double>>& u, const Mat& R0) {
  const int d = f.d();
  Mat step_inv = f.step().inverse();
  Mat W(d, d);
  for (std::size_t c = 0; c < f.cells(); ++c) {
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k) W(i, k) = index_difference(f, u[i], c, k);
    f.cell(c) = R0 * (Mat::Identity(d, d) + W * step_inv);
  }
}

}  // namespace

RasterDomain RasterDomain::box(const Vec& lo, const Vec& hi) {
  if (lo.size() != hi.size() || lo.size() < 2) throw std::invalid_argument("RasterDomain::box: bad corners");
  if (((hi - lo).array() <= 0.0).any()) throw std::invalid_argument("RasterDomain::box: empty box");
  RasterDomain r;
  r.kind = DomainKind::box;
  r.d = int(lo.size());
  r.origin = lo;
  r.axes = (hi - lo).asDiagonal();
  return r;
}

RasterDomain RasterDomain::square(int d, double half_width) {
  return box(Vec::Constant(d, -half_width), Vec::Constant(d, half_width));
}

RasterDomain RasterDomain::torus(const TorusDomain& t) {
  RasterDomain r;
  r.kind = DomainKind::torus;
  r.d = t.d;
  r.origin = Vec::Zero(t.d);
  r.axes = t.periods();
  return r;
}

RasterField::RasterField(RasterDomain dom, double resolution) : dom_(std::move(dom)), resolution_(resolution) {
  const int d = dom_.d;
  if (!(resolution > 0.0)) throw std::invalid_argument("RasterField: resolution must be positive");
  if (dom_.axes.rows() != d || dom_.axes.cols() != d || dom_.origin.size() != d)
    throw std::invalid_argument("RasterField: domain shape mismatch");
  shape_.resize(d);
  for (int k = 0; k < d; ++k) shape_[k] = std::max(1, int(std::lround(resolution * dom_.axes.col(k).norm())));
  strides_.assign(d, 1);
  for (int k = d - 2; k >= 0; --k) strides_[k] = strides_[k + 1] * std::size_t(shape_[k + 1]);
  cells_ = strides_[0] * std::size_t(shape_[0]);
  step_ = dom_.axes;
  for (int k = 0; k < d; ++k) step_.col(k) /= double(shape_[k]);
  cell_volume_ = std::abs(step_.determinant());
  values_.assign(cells_ * std::size_t(d * d), 0.0);
}

std::size_t RasterField::index(const std::vector<int>& idx) const {
  std::size_t c = 0;
  for (int k = 0; k < d(); ++k) c += std::size_t(idx[k]) * strides_[k];
  return c;
}

std::vector<int> RasterField::multi_index(std::size_t c) const {
  std::vector<int> idx(d());
  for (int k = 0; k < d(); ++k) idx[k] = int((c / strides_[k]) % std::size_t(shape_[k]));
  return idx;
}

long RasterField::neighbour(std::size_t c, int axis, int delta) const {
  const long n = shape_[axis];
  const long i = long((c / strides_[axis]) % std::size_t(n));
  long j = i + delta;
  if (j < 0 || j >= n) {
    if (dom_.kind == DomainKind::box) return -1;
    j = ((j % n) + n) % n;
  }
  return long(c) + (j - i) * long(strides_[axis]);
}

Vec RasterField::center(std::size_t c) const {
  Vec u(d());
  for (int k = 0; k < d(); ++k) u(k) = double((c / strides_[k]) % std::size_t(shape_[k])) + 0.5;
  return dom_.origin + step_ * u;
}

void RasterField::check() const {
  std::size_t expect = 1;
  for (int n : shape_) {
    if (n < 1) throw std::runtime_error("RasterField: empty axis");
    expect *= std::size_t(n);
  }
  if (expect != cells_ || values_.size() != cells_ * std::size_t(d() * d()))
    throw std::runtime_error("RasterField: shape inconsistent with storage");
  for (double v : values_)
    if (!std::isfinite(v)) throw std::runtime_error("RasterField: non-finite value");
}

FieldKind parse_field_kind(const std::string& name) {
  if (name == "constant_rotation") return FieldKind::constant_rotation;
  if (name == "gradient") return FieldKind::gradient;
  if (name == "dislocation") return FieldKind::dislocation;
  if (name == "counterexample") return FieldKind::counterexample;
  throw std::invalid_argument("unknown field kind: " + name);
}

std::string to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::constant_rotation: return "constant_rotation";
    case FieldKind::gradient: return "gradient";
    case FieldKind::dislocation: return "dislocation";
    case FieldKind::counterexample: return "counterexample";
  }
  return "unknown";
}

RasterField make_field(FieldKind kind, const RasterDomain& dom, double resolution, const FieldParams& params,
                       std::mt19937_64& rng) {
  if (resolution < 16.0) throw std::invalid_argument("make_field: resolution must be at least 16 cells per unit");
  if (!(params.eta > 0.0)) throw std::invalid_argument("make_field: eta must be positive");
  const int d = dom.d;
  RasterField f(dom, resolution);
  const Mat R0 = params.random_rotation ? haar_rotation(d, rng) : Mat(Mat::Identity(d, d));
  const Vec c = dom.center();
  const double eta = params.eta;

  switch (kind) {
    case FieldKind::constant_rotation:
      for (std::size_t q = 0; q < f.cells(); ++q) f.cell(q) = R0;
      break;

    case FieldKind::gradient: {
      if (params.modes < 1) throw std::invalid_argument("make_field: gradient needs at least one mode");
      std::normal_distribution<double> gauss(0.0, 1.0);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      struct Mode {
        Vec k, a;
        double phase;
      };
      std::vector<Mode> modes;
      Mat dual = dom.axes.inverse().transpose();
      for (int m = 0; m < params.modes; ++m) {
        Mode md;
        if (dom.kind == DomainKind::torus) {
          // wave vectors on the dual lattice keep u periodic
          Vec n = Vec::Zero(d);
          std::uniform_int_distribution<int> pick(-2, 2);
          while (n.isZero())
            for (int k = 0; k < d; ++k) n(k) = pick(rng);
          md.k = 2.0 * M_PI * dual * n;
        } else {
          Vec dir(d);
          for (int k = 0; k < d; ++k) dir(k) = gauss(rng);
          md.k = dir.normalized() * (M_PI / 2.0 + 1.5 * M_PI * unif(rng)) / eta;
        }
        Vec a(d);
        for (int k = 0; k < d; ++k) a(k) = gauss(rng);
        md.a = a.normalized();
        md.phase = 2.0 * M_PI * unif(rng);
        modes.push_back(md);
      }
      // pointwise |grad u| <= 2 pi amplitude on boxes
      const double scale = params.amplitude / double(params.modes) * (dom.kind == DomainKind::torus ? 1.0 : eta);
      std::vector<std::vector<double>> u(d, std::vector<double>(f.cells()));
      for (std::size_t q = 0; q < f.cells(); ++q) {
        Vec x = f.center(q);
        Vec s = Vec::Zero(d);
        for (const auto& md : modes) s += md.a * std::sin(md.k.dot(x - c) + md.phase);
        for (int i = 0; i < d; ++i) u[i][q] = scale * s(i);
      }
      fill_from_displacement(f, u, R0);
      break;
    }

    case FieldKind::dislocation: {
      if (d != 2) throw std::invalid_argument("make_field: dislocation is two-dimensional");
      if (dom.kind != DomainKind::box) throw std::invalid_argument("make_field: dislocation needs a box domain");
      Vec b = params.burgers.size() == 2 ? params.burgers : Vec(Vec::Unit(2, 0));
      if (params.core <= 0.0) {
        std::vector<double> theta(f.cells());
        for (std::size_t q = 0; q < f.cells(); ++q) {
          Vec y = f.center(q) - c;
          theta[q] = std::atan2(y(1), y(0));
        }
        Mat step_inv = f.step().inverse();
        Mat W(2, 2);
        for (std::size_t q = 0; q < f.cells(); ++q) {
          for (int k = 0; k < 2; ++k) {
            long up = f.neighbour(q, k, +1);
            double dt = up >= 0 ? wrap_angle(theta[std::size_t(up)] - theta[q])
                                : wrap_angle(theta[q] - theta[std::size_t(f.neighbour(q, k, -1))]);
            for (int i = 0; i < 2; ++i) W(i, k) = eta * b(i) * dt / (2.0 * M_PI);
          }
          f.cell(q) = R0 * (Mat::Identity(2, 2) + W * step_inv);
        }
      } else {
        const double a2 = params.core * params.core;
        for (std::size_t q = 0; q < f.cells(); ++q) {
          Vec y = (f.center(q) - c) / eta;
          double r2 = y.squaredNorm();
          Vec g = Vec::Zero(2);
          if (r2 > 0.0) g = Vec{{-y(1), y(0)}} * (-std::expm1(-r2 / a2) / r2);
          f.cell(q) = R0 * (Mat::Identity(2, 2) + b * g.transpose() / (2.0 * M_PI));
        }
      }
      break;
    }

    case FieldKind::counterexample: {
      if (d != 2) throw std::invalid_argument("make_field: counterexample is two-dimensional");
      for (std::size_t q = 0; q < f.cells(); ++q) {
        Vec y = (f.center(q) - c) / eta;
        double r2 = y.squaredNorm();
        double psi = r2 < 1.0 ? params.bump * std::exp(1.0 - 1.0 / (1.0 - r2)) : 0.0;
        f.cell(q) = R0 * rotation2(psi);
      }
      break;
    }
  }
  return f;
}

double DiscreteD::norm_for(double p, DNormMixing mixing) const {
  if (!(p >= 1.0)) throw std::invalid_argument("discrete_d: p must be at least 1");
  std::vector<double> row(d, 0.0);
  const std::size_t n = coeffs.size() / std::size_t(d * pairs);
  for (std::size_t c = 0; c < n; ++c)
    for (int i = 0; i < d; ++i)
      for (int q = 0; q < pairs; ++q) {
        double v = std::abs(coefficient(c, i, q));
        row[i] += p == 1.0 ? v : (p == 2.0 ? v * v : std::pow(v, p));
      }
  if (mixing == DNormMixing::inside) {
    double s = 0.0;
    for (double r : row) s += r;
    return std::pow(cell_volume * s, 1.0 / p);
  }
  double s = 0.0;
  for (double r : row) s += std::pow(cell_volume * r, 1.0 / p);
  return s;
}

double DiscreteD::max_abs() const {
  double m = 0.0;
  for (double v : coeffs) m = std::max(m, std::abs(v));
  return m;
}

DiscreteD discrete_d(const RasterField& field, double p, DNormMixing mixing) {
  if (!(p >= 1.0)) throw std::invalid_argument("discrete_d: p must be at least 1");
  const int d = field.d();
  const int dd = d * d;
  DiscreteD out;
  out.d = d;
  out.pairs = d * (d - 1) / 2;
  out.cell_volume = field.cell_volume();
  const Mat& B = field.step();
  const Mat Binv = B.inverse();

  // rows of V pulled back to index coordinates
  std::vector<double> W(field.cells() * std::size_t(dd));
  for (std::size_t c = 0; c < field.cells(); ++c) {
    Mat w = field.cell(c) * B;
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k) W[c * dd + i * d + k] = w(i, k);
  }
  auto diff = [&](std::size_t c, int axis, int i, int l) {
    long up = field.neighbour(c, axis, +1);
    if (up >= 0) return W[std::size_t(up) * dd + i * d + l] - W[c * dd + i * d + l];
    long down = field.neighbour(c, axis, -1);
    if (down >= 0) return W[c * dd + i * d + l] - W[std::size_t(down) * dd + i * d + l];
    return 0.0;
  };

  out.coeffs.assign(field.cells() * std::size_t(d * out.pairs), 0.0);
  Mat Cidx = Mat::Zero(d, d);
  for (std::size_t c = 0; c < field.cells(); ++c)
    for (int i = 0; i < d; ++i) {
      for (int k = 0; k < d; ++k)
        for (int l = k + 1; l < d; ++l) {
          double v = diff(c, k, i, l) - diff(c, l, i, k);
          Cidx(k, l) = v;
          Cidx(l, k) = -v;
        }
      int q = 0;
      for (int k = 0; k < d; ++k)
        for (int l = k + 1; l < d; ++l) {
          double v = 0.0;
          for (int a = 0; a < d; ++a)
            for (int bb = 0; bb < d; ++bb) v += Binv(a, k) * Cidx(a, bb) * Binv(bb, l);
          out.coeffs[(c * d + i) * out.pairs + q++] = v;
        }
    }
  out.norm = out.norm_for(p, mixing);
  return out;
}

double distance_to_rotations(const Eigen::Ref<const Mat>& A) {
  if (A.rows() == 2 && A.cols() == 2) {
    double th = std::atan2(A(1, 0) - A(0, 1), A(0, 0) + A(1, 1));
    double c = std::cos(th), s = std::sin(th);
    double e00 = A(0, 0) - c, e01 = A(0, 1) + s, e10 = A(1, 0) - s, e11 = A(1, 1) - c;
    return std::sqrt(e00 * e00 + e01 * e01 + e10 * e10 + e11 * e11);
  }
  return nearest_rotation(Mat(A)).dist;
}

GapReport rigidity_gap(const RasterField& field, double p, DNormMixing mixing) {
  return rigidity_gap(field, discrete_d(field, p, mixing), p, mixing);
}

GapReport rigidity_gap(const RasterField& field, const DiscreteD& dV, double p, DNormMixing mixing) {
  const int d = field.d();
  const double w = field.cell_volume();
  GapReport g;
  g.p = p;
  g.below_threshold = p < 2.0 * d / (2.0 + d) - 1e-12;
  Mat sum = Mat::Zero(d, d);
  for (std::size_t c = 0; c < field.cells(); ++c) sum += field.cell(c);
  g.R = nearest_rotation(Mat(w * sum)).R;
  double lhs2 = 0.0, rhs2 = 0.0;
  for (std::size_t c = 0; c < field.cells(); ++c) {
    lhs2 += (field.cell(c) - g.R).squaredNorm();
    double dist = distance_to_rotations(field.cell(c));
    rhs2 += dist * dist;
  }
  g.lhs = std::sqrt(w * lhs2);
  g.rhs1 = std::sqrt(w * rhs2);
  g.rhs2 = dV.norm_for(p, mixing);
  return g;
}

std::vector<EnsembleMember> run_ensemble(const EnsembleSpec& spec, double eta, const std::vector<double>& ps) {
  if (ps.empty()) throw std::invalid_argument("run_ensemble: no exponents");
  const int n = spec.size();
  std::vector<EnsembleMember> out(static_cast<std::size_t>(n));
  auto work = [&](int j) {
    FieldKind kind = j < spec.constant_rotation                    ? FieldKind::constant_rotation
                     : j < spec.constant_rotation + spec.gradient ? FieldKind::gradient
                     : j < spec.constant_rotation + spec.gradient + spec.dislocation ? FieldKind::dislocation
                                                                                       : FieldKind::counterexample;
    std::mt19937_64 rng = member_rng(spec.seed, std::uint64_t(j));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    FieldParams fp;
    fp.eta = eta;
    fp.amplitude = 0.02 + 0.18 * unif(rng);
    fp.modes = 1 + int(4.0 * unif(rng)) % 4;
    double ang = 2.0 * M_PI * unif(rng);
    fp.burgers = (0.1 + 0.4 * unif(rng)) * Vec{{std::cos(ang), std::sin(ang)}};
    fp.core = spec.core;
    fp.bump = 0.3 + 1.2 * unif(rng);
    RasterField f = make_field(kind, RasterDomain::square(2, spec.half_width * eta), spec.resolution, fp, rng);
    DiscreteD dV = discrete_d(f, ps.front(), spec.mixing);
    EnsembleMember m;
    m.kind = kind;
    m.eta = eta;
    m.seed = std::uint64_t(j);
    for (double p : ps) m.reports.push_back(rigidity_gap(f, dV, p, spec.mixing));
    out[std::size_t(j)] = std::move(m);
  };
  const int threads = std::max(1, std::min(spec.threads, n));
  if (threads == 1) {
    for (int j = 0; j < n; ++j) work(j);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (int j = t; j < n; j += threads) work(j);
      });
    for (auto& th : pool) th.join();
  }
  return out;
}

ConstantFit estimate_constants(const std::vector<GapReport>& reports) {
  double scale = 1.0;
  for (const auto& r : reports) scale = std::max(scale, r.lhs);
  struct Row {
    double l, a, b;
  };
  std::vector<Row> rows;
  for (const auto& r : reports)
    if (r.lhs > 1e-10 * scale) rows.push_back({r.lhs, r.rhs1, r.rhs2});
  ConstantFit fit;
  fit.constraints = int(rows.size());
  if (rows.empty()) return fit;

  auto feasible = [&](double c1, double c2) {
    if (c1 < 0.0 || c2 < 0.0 || !std::isfinite(c1) || !std::isfinite(c2)) return false;
    for (const auto& r : rows)
      if (r.a * c1 + r.b * c2 < r.l * (1.0 - 1e-9)) return false;
    return true;
  };
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](double c1, double c2) {
    if (!feasible(c1, c2)) return;
    if (c1 + c2 < best * (1.0 - 1e-15) || (c1 + c2 <= best * (1.0 + 1e-15) && c1 < fit.C1)) {
      best = c1 + c2;
      fit.C1 = c1;
      fit.C2 = c2;
    }
  };
  // the optimum of a two-variable LP sits on a vertex of the feasible region
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].a > 0.0) consider(rows[i].l / rows[i].a, 0.0);
    if (rows[i].b > 0.0) consider(0.0, rows[i].l / rows[i].b);
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      double det = rows[i].a * rows[j].b - rows[j].a * rows[i].b;
      if (std::abs(det) <= 1e-300) continue;
      consider((rows[i].l * rows[j].b - rows[j].l * rows[i].b) / det,
               (rows[i].a * rows[j].l - rows[j].a * rows[i].l) / det);
    }
  }
  if (!std::isfinite(best)) throw std::runtime_error("estimate_constants: infeasible ensemble");
  return fit;
}

ConstantFit estimate_constants(const std::vector<EnsembleMember>& members, std::size_t p_index) {
  std::vector<GapReport> reports;
  for (const auto& m : members) {
    if (p_index >= m.reports.size()) throw std::invalid_argument("estimate_constants: p index out of range");
    reports.push_back(m.reports[p_index]);
  }
  return estimate_constants(reports);
}

int count_gap_violations(const std::vector<GapReport>& reports, const ConstantFit& fit, double rel_tol) {
  double scale = 1.0;
  for (const auto& r : reports) scale = std::max(scale, r.lhs);
  int v = 0;
  for (const auto& r : reports)
    if (r.lhs > 1e-10 * scale && r.lhs > (fit.C1 * r.rhs1 + fit.C2 * r.rhs2) * (1.0 + rel_tol)) ++v;
  return v;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need two or more points");
  const double n = double(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("loglog_slope: non-positive value");
    double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ScalingResult scaling_experiment(const EnsembleSpec& spec, const std::vector<double>& etas,
                                 const std::vector<double>& ps) {
  if (etas.size() < 3) throw std::invalid_argument("scaling_experiment: need at least three eta values");
  ScalingResult res;
  res.etas = etas;
  res.ps = ps;
  res.fits.assign(ps.size(), {});
  for (double eta : etas) {
    res.members.push_back(run_ensemble(spec, eta, ps));
    for (std::size_t q = 0; q < ps.size(); ++q) res.fits[q].push_back(estimate_constants(res.members.back(), q));
  }
  for (std::size_t q = 0; q < ps.size(); ++q) {
    std::vector<double> c1, c2;
    for (const auto& f : res.fits[q]) {
      c1.push_back(f.C1);
      c2.push_back(f.C2);
    }
    res.c1_slope.push_back(loglog_slope(etas, c1));
    res.c2_slope.push_back(loglog_slope(etas, c2));
  }
  return res;
}

std::vector<SharpnessPoint> sharpness_experiment(const std::vector<double>& etas, double p, double resolution,
                                                 double half_width, double bump) {
  std::vector<SharpnessPoint> out;
  std::mt19937_64 rng(0);
  for (double eta : etas) {
    FieldParams fp;
    fp.random_rotation = false;
    fp.bump = bump;
    RasterField f = make_field(FieldKind::counterexample, RasterDomain::square(2, half_width * eta), resolution, fp, rng);
    GapReport g = rigidity_gap(f, p);
    out.push_back({eta, g.lhs, g.rhs2, g.rhs2 > 0.0 ? g.lhs / g.rhs2 : 0.0});
  }
  return out;
}

ExtensionGeometry extension_geometry(const TileComplex& complex, const DeformationField& field,
                                     const PointConfig& P, double rho, double resolution) {
  if (!(rho > 0.0)) throw std::invalid_argument("extend_into_defects: rho must be positive");
  if (rho * resolution < 4.0)
    throw std::invalid_argument("extend_into_defects: resolution too coarse (rho * resolution < 4 cells)");
  const int d = P.dom.d;
  ExtensionGeometry g;
  g.rho = rho;
  g.base = RasterField(RasterDomain::torus(P.dom), resolution);
  RasterField& f = g.base;
  const std::size_t n = f.cells();
  g.state.assign(n, CellState::far);
  g.simplex.assign(n, -1);
  g.distance.assign(n, std::numeric_limits<double>::infinity());
  g.source.assign(n, -1);

  const Mat Binv = f.step().inverse();
  const std::vector<int>& shape = f.shape();
  for (std::size_t e = 0; e < field.entries.size(); ++e) {
    const DeformationEntry& en = field.entries[e];
    const CandidateTile& tile = complex.tiles[std::size_t(en.tile)];
    Mat S = tile.simplex_pts[std::size_t(en.simplex)].colwise() + tile.anchor;
    Mat E(d, d);
    for (int k = 0; k < d; ++k) E.col(k) = S.col(k + 1) - S.col(0);
    Mat Einv = E.inverse();
    // cell centers sit at origin + B (i + 1/2)
    Mat idx = Binv * S;
    Vec lo = idx.rowwise().minCoeff().array() - 0.5, hi = idx.rowwise().maxCoeff().array() - 0.5;
    std::vector<int> a(d), b(d), cur(d);
    for (int k = 0; k < d; ++k) {
      a[k] = int(std::ceil(lo(k) - 1e-9));
      b[k] = int(std::floor(hi(k) + 1e-9));
    }
    bool empty = false;
    for (int k = 0; k < d; ++k) empty = empty || a[k] > b[k];
    cur = a;
    while (!empty) {
      Vec ic(d);
      for (int k = 0; k < d; ++k) ic(k) = cur[k] + 0.5;
      Vec lam = Einv * (f.step() * ic - S.col(0));
      if (lam.minCoeff() >= -1e-12 && lam.sum() <= 1.0 + 1e-12) {
        std::vector<int> w(d);
        for (int k = 0; k < d; ++k) w[k] = ((cur[k] % shape[k]) + shape[k]) % shape[k];
        std::size_t c = f.index(w);
        if (g.state[c] != CellState::crystal) {
          g.state[c] = CellState::crystal;
          g.simplex[c] = int(e);
          g.distance[c] = 0.0;
          g.source[c] = long(c);
          f.cell(c) = en.V;
        }
      }
      int k = d - 1;
      while (k >= 0 && ++cur[k] > b[k]) {
        cur[k] = a[k];
        --k;
      }
      if (k < 0) break;
    }
  }

  // nearest-source propagation over the full neighbourhood stencil, stopped at rho
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (std::size_t c = 0; c < n; ++c)
    if (g.state[c] == CellState::crystal) heap.push({0.0, c});
  std::vector<std::vector<int>> offsets;
  {
    std::vector<int> o(d, -1);
    while (true) {
      if (std::any_of(o.begin(), o.end(), [](int v) { return v != 0; })) offsets.push_back(o);
      int k = d - 1;
      while (k >= 0 && ++o[k] > 1) o[k--] = -1;
      if (k < 0) break;
    }
  }
  std::vector<char> done(n, 0);
  while (!heap.empty()) {
    auto [dist, c] = heap.top();
    heap.pop();
    if (done[c] || dist > g.distance[c]) continue;
    done[c] = 1;
    const std::size_t src = std::size_t(g.source[c]);
    const Vec xs = f.center(src);
    for (const auto& o : offsets) {
      long q = long(c);
      for (int k = 0; k < d && q >= 0; ++k)
        if (o[k] != 0) q = f.neighbour(std::size_t(q), k, o[k]);
      if (q < 0 || done[std::size_t(q)] || g.state[std::size_t(q)] == CellState::crystal) continue;
      double nd = minimal_image(xs, f.center(std::size_t(q)), P.dom).norm();
      if (nd >= rho) continue;
      if (nd < g.distance[std::size_t(q)]) {
        g.distance[std::size_t(q)] = nd;
        g.source[std::size_t(q)] = long(src);
        heap.push({nd, std::size_t(q)});
      }
    }
  }
  for (std::size_t c = 0; c < n; ++c)
    if (g.state[c] != CellState::crystal && g.distance[c] < rho) g.state[c] = CellState::tube;
  return g;
}

RasterField assemble_extension(const ExtensionGeometry& geom, const Mat& Rt) {
  RasterField f = geom.base;
  for (std::size_t c = 0; c < f.cells(); ++c) {
    switch (geom.state[c]) {
      case CellState::crystal: break;
      case CellState::far: f.cell(c) = Rt; break;
      case CellState::tube: {
        double t = geom.distance[c] / geom.rho;
        Mat Vn = geom.base.cell(std::size_t(geom.source[c]));
        f.cell(c) = (1.0 - t) * Vn + t * Rt;
        break;
      }
    }
  }
  return f;
}

Extension extend_into_defects(const TileComplex& complex, const DeformationField& field, const PointConfig& P,
                              double rho, double resolution, std::mt19937_64& rng) {
  Extension ext;
  ext.geom = extension_geometry(complex, field, P, rho, resolution);
  ext.R_tilde = haar_rotation(P.dom.d, rng);
  ext.field = assemble_extension(ext.geom, ext.R_tilde);
  return ext;
}

ExtensionStats extension_stats(const ExtensionGeometry& geom, const RasterField& field, double zero_tol) {
  ExtensionStats st;
  const int d = field.d();
  DiscreteD dV = discrete_d(field, 2.0);
  st.max_dV = dV.max_abs();
  for (std::size_t c = 0; c < field.cells(); ++c) {
    double dist = distance_to_rotations(field.cell(c));
    st.max_dist2 = std::max(st.max_dist2, dist * dist);

    // cells entering the forward differences at c
    std::vector<std::size_t> stencil{c};
    for (int k = 0; k < d; ++k) stencil.push_back(std::size_t(field.neighbour(c, k, +1)));
    bool tube = false, interface = false;
    for (std::size_t s : stencil) {
      if (geom.state[s] == CellState::tube) tube = true;
      if (geom.state[s] != geom.state[c] || geom.simplex[s] != geom.simplex[c]) interface = true;
    }
    if (!tube && !interface)
      for (int i = 0; i < d; ++i)
        for (int q = 0; q < dV.pairs; ++q)
          if (std::abs(dV.coefficient(c, i, q)) > zero_tol) {
            ++st.unsupported;
            i = d;
            break;
          }
    if (geom.state[c] == CellState::tube)
      for (int k = 0; k < d; ++k)
        for (int delta : {-1, 1}) {
          std::size_t q = std::size_t(field.neighbour(c, k, delta));
          double jump = (field.cell(q) - field.cell(c)).norm();
          st.lipschitz = std::max(st.lipschitz, jump / field.step().col(k).norm());
        }
  }
  return st;
}

ExtensionEnvelope extension_envelope(const ExtensionGeometry& geom, int angles) {
  const RasterField& base = geom.base;
  if (base.d() != 2) throw std::invalid_argument("extension_envelope: two-dimensional fields only");
  if (angles < 1) throw std::invalid_argument("extension_envelope: need at least one angle");
  const Mat Binv = base.step().inverse();
  const double jac = Binv(0, 0) * Binv(1, 1) - Binv(1, 0) * Binv(0, 1);
  const Mat& B = base.step();
  auto curl = [&](const RasterField& f, std::size_t c, int row) {
    // index-space circulation of row `row` pulled back through B
    auto w = [&](std::size_t q, int l) { return f.cell(q)(row, 0) * B(0, l) + f.cell(q)(row, 1) * B(1, l); };
    auto diff = [&](int axis, int l) {
      long up = f.neighbour(c, axis, +1);
      if (up >= 0) return w(std::size_t(up), l) - w(c, l);
      long down = f.neighbour(c, axis, -1);
      return down >= 0 ? w(c, l) - w(std::size_t(down), l) : 0.0;
    };
    return (diff(0, 1) - diff(1, 0)) * jac;
  };

  ExtensionEnvelope env;
  std::vector<std::size_t> active;
  for (std::size_t c = 0; c < base.cells(); ++c) {
    bool moving = geom.state[c] != CellState::crystal;
    for (int k = 0; k < 2 && !moving; ++k)
      for (int delta : {-1, 1}) {
        long q = base.neighbour(c, k, delta);
        if (q >= 0 && geom.state[std::size_t(q)] != CellState::crystal) moving = true;
      }
    if (moving) {
      active.push_back(c);
    } else {
      double dist = distance_to_rotations(base.cell(c));
      env.max_dist2 = std::max(env.max_dist2, dist * dist);
      for (int i = 0; i < 2; ++i) env.max_dV = std::max(env.max_dV, std::abs(curl(base, c, i)));
    }
  }
  for (int a = 0; a < angles; ++a) {
    RasterField f = assemble_extension(geom, rotation2(2.0 * M_PI * a / angles));
    for (std::size_t c : active) {
      double dist = distance_to_rotations(f.cell(c));
      env.max_dist2 = std::max(env.max_dist2, dist * dist);
      for (int i = 0; i < 2; ++i) env.max_dV = std::max(env.max_dV, std::abs(curl(f, c, i)));
    }
  }
  return env;
}

}  // namespace crystal
