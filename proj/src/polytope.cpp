#include "crystal/polytope.hpp"

#include <algorithm>
#include <numeric>

namespace crystal {

namespace {

double segment_segment_distance(const Vec& p0, const Vec& p1, const Vec& q0, const Vec& q1) {
  Vec u = p1 - p0, v = q1 - q0, w = p0 - q0;
  double a = u.dot(u), b = u.dot(v), c = v.dot(v), dd = u.dot(w), e = v.dot(w);
  double den = a * c - b * b;
  double s, t;
  if (den <= 1e-14 * a * c) {
    s = 0.0;
    t = c > 0 ? std::clamp(e / c, 0.0, 1.0) : 0.0;
  } else {
    s = std::clamp((b * e - c * dd) / den, 0.0, 1.0);
    t = c > 0 ? (b * s + e) / c : 0.0;
    if (t < 0.0) {
      t = 0.0;
      s = a > 0 ? std::clamp(-dd / a, 0.0, 1.0) : 0.0;
    } else if (t > 1.0) {
      t = 1.0;
      s = a > 0 ? std::clamp((b - dd) / a, 0.0, 1.0) : 0.0;
    }
  }
  return (w + s * u - t * v).norm();
}

std::vector<Vec> sat_axes(const Mat& A, const Mat& B) {
  const int d = int(A.rows());
  std::vector<Vec> axes;
  auto facet_normals = [&](const Mat& S) {
    for (int skip = 0; skip <= d; ++skip) {
      Mat E(d, d - 1);
      int base = skip == 0 ? 1 : 0;
      int c = 0;
      for (int k = 0; k <= d; ++k)
        if (k != skip && k != base) E.col(c++) = S.col(k) - S.col(base);
      Vec n(d);
      if (d == 2) {
        n << -E(1, 0), E(0, 0);
      } else {
        Eigen::FullPivLU<Mat> lu(E.transpose());
        Mat ker = lu.kernel();
        n = ker.col(0);
      }
      if (n.norm() > 0) axes.push_back(n.normalized());
    }
  };
  facet_normals(A);
  facet_normals(B);
  if (d == 3) {
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j)
        for (int k = 0; k < 4; ++k)
          for (int l = k + 1; l < 4; ++l) {
            Eigen::Vector3d e1 = A.col(j) - A.col(i), e2 = B.col(l) - B.col(k);
            Eigen::Vector3d n = e1.cross(e2);
            if (n.norm() > 1e-12 * e1.norm() * e2.norm()) axes.push_back(Vec(n.normalized()));
          }
  }
  return axes;
}

}  // namespace

double point_hull_distance(const Vec& x, const Mat& S) {
  const int k = int(S.cols());
  if (k == 1) return (x - S.col(0)).norm();
  Mat E(S.rows(), k - 1);
  for (int j = 1; j < k; ++j) E.col(j - 1) = S.col(j) - S.col(0);
  Eigen::ColPivHouseholderQR<Mat> qr(E);
  if (qr.rank() == k - 1) {
    Vec lam = qr.solve(Vec(x - S.col(0)));
    double l0 = 1.0 - lam.sum();
    if (l0 >= 0.0 && (lam.array() >= 0.0).all()) return (x - S.col(0) - E * lam).norm();
  }
  double best = INFINITY;
  for (int skip = 0; skip < k; ++skip) {
    Mat F(S.rows(), k - 1);
    int c = 0;
    for (int j = 0; j < k; ++j)
      if (j != skip) F.col(c++) = S.col(j);
    best = std::min(best, point_hull_distance(x, F));
  }
  return best;
}

bool simplices_overlap(const Mat& A, const Mat& B, double tol) {
  for (const Vec& n : sat_axes(A, B)) {
    Vec pa = A.transpose() * n, pb = B.transpose() * n;
    if (pa.maxCoeff() <= pb.minCoeff() + tol || pb.maxCoeff() <= pa.minCoeff() + tol) return false;
  }
  return true;
}

double simplex_distance(const Mat& A, const Mat& B) {
  const int d = int(A.rows());
  // intersecting (including touching) simplices have no strictly separating axis
  bool separated = false;
  for (const Vec& n : sat_axes(A, B)) {
    Vec pa = A.transpose() * n, pb = B.transpose() * n;
    if (pa.maxCoeff() < pb.minCoeff() || pb.maxCoeff() < pa.minCoeff()) {
      separated = true;
      break;
    }
  }
  if (!separated) return 0.0;
  double best = INFINITY;
  for (int k = 0; k <= d; ++k) {
    best = std::min(best, point_hull_distance(A.col(k), B));
    best = std::min(best, point_hull_distance(B.col(k), A));
  }
  if (d == 3) {
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j)
        for (int k = 0; k < 4; ++k)
          for (int l = k + 1; l < 4; ++l)
            best = std::min(best, segment_segment_distance(A.col(i), A.col(j), B.col(k), B.col(l)));
  }
  return best;
}

double convex_hull_area(const Mat& pts) {
  const int n = int(pts.cols());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    return pts(0, a) < pts(0, b) || (pts(0, a) == pts(0, b) && pts(1, a) < pts(1, b));
  });
  auto cross = [&](int o, int a, int b) {
    return (pts(0, a) - pts(0, o)) * (pts(1, b) - pts(1, o)) - (pts(1, a) - pts(1, o)) * (pts(0, b) - pts(0, o));
  };
  std::vector<int> hull(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], idx[i]) <= 0) --k;
    hull[k++] = idx[i];
  }
  for (int i = n - 2, t = k + 1; i >= 0; --i) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], idx[i]) <= 0) --k;
    hull[k++] = idx[i];
  }
  double area = 0.0;
  for (int i = 0; i + 1 < k; ++i)
    area += pts(0, hull[i]) * pts(1, hull[i + 1]) - pts(0, hull[i + 1]) * pts(1, hull[i]);
  return std::abs(area) * 0.5;
}

}  // namespace crystal
