#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace crystal {

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Mat = MatX<double>;
using Vec = VecX<double>;

/// Periodic box I = R^d / (N * L Z^d). Columns of `basis` are the cell vectors L e_j.
struct TorusDomain {
  int d = 2;
  int N = 1;
  Mat basis;

  TorusDomain() = default;
  TorusDomain(int N_, Mat basis_);

  Mat periods() const { return basis * double(N); }
  double volume() const { return std::abs(periods().determinant()); }
  bool rectangular() const;

  Vec to_fractional(const Vec& x) const;
  Vec from_fractional(const Vec& f) const;
  Vec wrap(const Vec& x) const;

 private:
  Mat inv_periods_;
};

/// Rigid motion x = a + R s fitted to a perturbed tile.
struct Alignment {
  Vec a;
  Mat R;
  double deviation = 0.0;
};

template <typename Scalar>
struct RotationProjection {
  MatX<Scalar> R;
  Scalar dist;
  bool ambiguous;
};

/// Shortest q - p over all periodic images; antipodal ties go to the
/// lexicographically largest displacement.
Vec minimal_image(const Vec& p, const Vec& q, const TorusDomain& dom);

namespace detail {

template <typename Scalar>
MatX<Scalar> polar_newton(const MatX<Scalar>& A) {
  MatX<Scalar> X = A;
  for (int it = 0; it < 200; ++it) {
    MatX<Scalar> Xn = Scalar(0.5) * (X + X.inverse().transpose());
    Scalar change = (Xn - X).norm();
    X = std::move(Xn);
    if (change <= Scalar(1e-12) * (Scalar(1) + X.norm())) break;
  }
  return X;
}

}  // namespace detail

/// Frobenius-nearest rotation with Kabsch determinant correction.
template <typename Derived>
RotationProjection<typename Derived::Scalar> nearest_rotation(const Eigen::MatrixBase<Derived>& A_in) {
  using Scalar = typename Derived::Scalar;
  MatX<Scalar> A = A_in;
  const Eigen::Index d = A.rows();
  if (A.cols() != d) throw std::invalid_argument("nearest_rotation: matrix must be square");

  Eigen::JacobiSVD<MatX<Scalar>> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  VecX<Scalar> s = svd.singularValues();
  MatX<Scalar> U = svd.matrixU();
  MatX<Scalar> V = svd.matrixV();
  MatX<Scalar> R;
  if (d <= 3) {
    R = U * V.transpose();
  } else {
    // full rank: Newton polar iteration; rank deficient: fall back to the SVD factor
    R = (s(d - 1) > Scalar(1e-10) * std::max(Scalar(1), s(0))) ? detail::polar_newton(A)
                                                                : MatX<Scalar>(U * V.transpose());
  }
  bool ambiguous = false;
  if (R.determinant() < Scalar(0)) {
    U.col(d - 1) *= Scalar(-1);
    R = U * V.transpose();
    Scalar tol = Scalar(1e-12) * std::max(Scalar(1), s(0));
    ambiguous = d >= 2 && std::abs(s(d - 1) - s(d - 2)) <= tol;
  }
  Scalar dist = (A - R).norm();
  return {R, dist, ambiguous};
}

/// argmin over SO(d) of sum_k w_k |A_k - R|^2.
template <typename Scalar>
MatX<Scalar> weighted_best_rotation(const std::vector<std::pair<Scalar, MatX<Scalar>>>& terms) {
  if (terms.empty()) throw std::invalid_argument("weighted_best_rotation: no terms");
  Scalar wsum(0);
  MatX<Scalar> M = MatX<Scalar>::Zero(terms.front().second.rows(), terms.front().second.cols());
  for (const auto& [w, A] : terms) {
    if (w < Scalar(0)) throw std::invalid_argument("weighted_best_rotation: negative weight");
    wsum += w;
    M += w * A;
  }
  if (!(wsum > Scalar(0))) throw std::invalid_argument("weighted_best_rotation: all weights zero");
  return nearest_rotation(M).R;
}

template <typename Scalar>
Scalar rotation_objective(const std::vector<std::pair<Scalar, MatX<Scalar>>>& terms, const MatX<Scalar>& R) {
  Scalar s(0);
  for (const auto& [w, A] : terms) s += w * (A - R).squaredNorm();
  return s;
}

/// |det(edge matrix)| / d! for d+1 vertices given as columns.
template <typename Derived>
typename Derived::Scalar simplex_volume(const Eigen::MatrixBase<Derived>& vertices) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index d = vertices.rows();
  if (vertices.cols() != d + 1) throw std::invalid_argument("simplex_volume: need d+1 vertices");
  MatX<Scalar> E(d, d);
  for (Eigen::Index k = 0; k < d; ++k) E.col(k) = vertices.col(k + 1) - vertices.col(0);
  Scalar fact(1);
  for (Eigen::Index k = 2; k <= d; ++k) fact *= Scalar(k);
  return std::abs(E.determinant()) / fact;
}

/// 2D rotation by angle theta.
Mat rotation2(double theta);

/// Haar-uniform rotation from a uniform source u in [0,1) (d=2) or Gaussian draws (d>=3).
template <typename Rng>
Mat haar_rotation(int d, Rng& rng);

bool is_rotation(const Mat& R, double tol = 1e-10);

}  // namespace crystal

#include <random>

namespace crystal {

template <typename Rng>
Mat haar_rotation(int d, Rng& rng) {
  if (d == 2) {
    std::uniform_real_distribution<double> u(0.0, 2.0 * M_PI);
    return rotation2(u(rng));
  }
  std::normal_distribution<double> g(0.0, 1.0);
  Mat G(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) G(i, j) = g(rng);
  Eigen::HouseholderQR<Mat> qr(G);
  Mat Q = qr.householderQ();
  Mat Rr = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j)
    if (Rr(j, j) < 0) Q.col(j) *= -1.0;
  if (Q.determinant() < 0) Q.col(0) *= -1.0;
  return Q;
}

}  // namespace crystal
