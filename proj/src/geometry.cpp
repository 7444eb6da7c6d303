#include "crystal/geometry.hpp"

#include <array>
#include <cmath>

namespace crystal {

TorusDomain::TorusDomain(int N_, Mat basis_) : d(int(basis_.rows())), N(N_), basis(std::move(basis_)) {
  if (d < 2) throw std::invalid_argument("TorusDomain: d must be >= 2");
  if (basis.cols() != d) throw std::invalid_argument("TorusDomain: basis must be square");
  if (N < 1) throw std::invalid_argument("TorusDomain: N must be >= 1");
  if (!(std::abs(basis.determinant()) > 0.0)) throw std::invalid_argument("TorusDomain: singular basis");
  inv_periods_ = periods().inverse();
}

bool TorusDomain::rectangular() const {
  Mat G = basis.transpose() * basis;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j && std::abs(G(i, j)) > 1e-14 * (G(i, i) + G(j, j))) return false;
  return true;
}

Vec TorusDomain::to_fractional(const Vec& x) const { return inv_periods_ * x; }

Vec TorusDomain::from_fractional(const Vec& f) const { return periods() * f; }

Vec TorusDomain::wrap(const Vec& x) const {
  Vec f = inv_periods_ * x;
  for (int k = 0; k < d; ++k) {
    f(k) -= std::floor(f(k));
    if (f(k) >= 1.0) f(k) = 0.0;
  }
  return basis * (f * double(N));
}

namespace {

bool lex_greater(const double* a, const double* b, int d) {
  for (int k = 0; k < d; ++k) {
    if (a[k] > b[k]) return true;
    if (a[k] < b[k]) return false;
  }
  return false;
}

}  // namespace

Vec minimal_image(const Vec& p, const Vec& q, const TorusDomain& dom) {
  const int d = dom.d;
  if (d > 8) throw std::invalid_argument("minimal_image: d > 8 unsupported");
  const Mat P = dom.periods();
  Vec f = dom.to_fractional(q - p);
  std::array<double, 8> base{};
  for (int k = 0; k < d; ++k) base[k] = f(k) - std::round(f(k));

  std::array<double, 8> best{}, cand{}, coef{};
  double best_n2 = INFINITY;
  int total = 1;
  for (int k = 0; k < d; ++k) total *= 3;
  for (int code = 0; code < total; ++code) {
    int c = code;
    for (int k = 0; k < d; ++k) {
      coef[k] = base[k] + double(c % 3 - 1);
      c /= 3;
    }
    double n2 = 0.0;
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += P(i, k) * coef[k];
      cand[i] = s;
      n2 += s * s;
    }
    double tol = 1e-12 * (1.0 + best_n2);
    if (code == 0 || n2 < best_n2 - tol || (n2 <= best_n2 + tol && lex_greater(cand.data(), best.data(), d))) {
      best_n2 = std::min(n2, best_n2);
      best = cand;
    }
  }
  Vec out(d);
  for (int i = 0; i < d; ++i) out(i) = best[i];
  return out;
}

Mat rotation2(double theta) {
  Mat R(2, 2);
  R << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return R;
}

bool is_rotation(const Mat& R, double tol) {
  if (R.rows() != R.cols()) return false;
  Mat I = Mat::Identity(R.rows(), R.cols());
  return (R.transpose() * R - I).cwiseAbs().maxCoeff() <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

}  // namespace crystal
