#include "crystal/geometry.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace crystal;

TEST_CASE("nearest_rotation: identity and rotations are fixed points") {
  auto p = nearest_rotation(Mat::Identity(3, 3));
  CHECK((p.R - Mat::Identity(3, 3)).norm() < 1e-14);
  CHECK(p.dist < 1e-14);
  Mat Q = rotation2(M_PI / 2);
  auto q = nearest_rotation(Q);
  CHECK((q.R - Q).norm() < 1e-14);
  CHECK(q.dist < 1e-14);
}

TEST_CASE("nearest_rotation: diag(2,1) against an angle grid") {
  Mat A(2, 2);
  A << 2, 0, 0, 1;
  double angle = 0.0;
  const double grid = oracle::grid_objective({{1.0, A}}, 1e-4, &angle);
  auto p = nearest_rotation(A);
  CHECK((p.R - Mat::Identity(2, 2)).norm() < 1e-12);
  CHECK(p.dist == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.dist * p.dist == doctest::Approx(grid).epsilon(1e-8));
  CHECK(std::abs(angle) < 1e-6);
}

TEST_CASE("nearest_rotation: reflection gets the determinant correction") {
  Mat A(2, 2);
  A << 1, 0, 0, -1;
  auto p = nearest_rotation(A);
  CHECK(is_rotation(p.R));
  CHECK(p.ambiguous);
  CHECK(p.dist == doctest::Approx(2.0));
  Mat B(2, 2);
  B << 3, 0, 0, -1;
  auto q = nearest_rotation(B);
  CHECK_FALSE(q.ambiguous);
  CHECK((q.R - Mat::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("nearest_rotation: left invariance of the distance") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int d : {2, 3, 4}) {
    for (int trial = 0; trial < 50; ++trial) {
      Mat A(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) A(i, j) = g(rng);
      Mat R = haar_rotation(d, rng);
      CHECK(nearest_rotation(Mat(R * A)).dist == doctest::Approx(nearest_rotation(A).dist).epsilon(1e-10));
    }
  }
}

TEST_CASE("nearest_rotation: d = 4 Newton path agrees with the SVD projection") {
  std::mt19937_64 rng(5);
  Mat Q = haar_rotation(4, rng);
  Mat S = Mat::Identity(4, 4);
  S.diagonal() << 1.5, 1.2, 0.9, 0.7;
  auto p = nearest_rotation(Mat(Q * S));
  CHECK((p.R - Q).norm() < 1e-10);
  CHECK(p.dist == doctest::Approx((S - Mat::Identity(4, 4)).norm()).epsilon(1e-10));
}

TEST_CASE("nearest_rotation: templated on float") {
  Eigen::Matrix2f A;
  A << 2.f, 0.f, 0.f, 1.f;
  auto p = nearest_rotation(A);
  CHECK(p.dist == doctest::Approx(1.0f).epsilon(1e-5));
}

TEST_CASE("weighted_best_rotation: matches a 1e-3 angle grid on random ensembles") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> w(0.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::pair<double, Mat>> terms;
    for (int k = 0; k < 5; ++k) {
      Mat A(2, 2);
      A << g(rng), g(rng), g(rng), g(rng);
      terms.emplace_back(w(rng) + 0.01, A);
    }
    const double best = rotation_objective(terms, weighted_best_rotation(terms));
    CHECK(best == doctest::Approx(oracle::grid_objective(terms, 1e-3)).epsilon(1e-4));
  }
}

TEST_CASE("weighted_best_rotation: duplication and weight scaling") {
  std::mt19937_64 rng(3);
  Mat Q = haar_rotation(3, rng);
  CHECK((weighted_best_rotation<double>({{1.0, Q}}) - Q).norm() < 1e-12);
  CHECK((weighted_best_rotation<double>({{1.0, Q}, {1.0, Q}}) - Q).norm() < 1e-12);
  std::normal_distribution<double> g;
  std::vector<std::pair<double, Mat>> a, b;
  for (int k = 0; k < 4; ++k) {
    Mat A = Mat::NullaryExpr(3, 3, [&] { return g(rng); });
    a.emplace_back(0.5 + k, A);
    b.emplace_back(7.0 * (0.5 + k), A);
  }
  CHECK((weighted_best_rotation(a) - weighted_best_rotation(b)).norm() < 1e-10);
  CHECK_THROWS_AS(weighted_best_rotation<double>({{0.0, Q}}), std::invalid_argument);
}

TEST_CASE("simplex_volume") {
  Mat T(2, 3);
  T << 0, 1, 0, 0, 0, 1;
  CHECK(simplex_volume(T) == doctest::Approx(0.5));
  Mat C(2, 3);
  C << 0, 1, 2, 0, 1, 2;
  CHECK(simplex_volume(C) == 0.0);
  Mat E(2, 3);
  E << 0, 1, 0.5, 0, 0, std::sqrt(3.0) / 2;
  CHECK(simplex_volume(E) == doctest::Approx(oracle::shoelace(E)).epsilon(1e-14));
  CHECK(simplex_volume(E) == doctest::Approx(0.43301).epsilon(1e-5));
}

TEST_CASE("minimal_image: antisymmetry and bound on a sheared torus") {
  Mat B(2, 2);
  B << 1, 0.5, 0, std::sqrt(3.0) / 2;
  TorusDomain dom(4, B);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    Vec p = dom.from_fractional(Vec::NullaryExpr(2, [&] { return u(rng); }));
    Vec q = dom.from_fractional(Vec::NullaryExpr(2, [&] { return u(rng); }));
    Vec a = minimal_image(p, q, dom), b = minimal_image(q, p, dom);
    CHECK((a + b).norm() < 1e-12);
    // no lattice translate of a is shorter
    for (int i = -1; i <= 1; ++i)
      for (int j = -1; j <= 1; ++j) {
        Vec t = a + dom.periods() * Vec((Vec(2) << i, j).finished());
        CHECK(a.norm() <= t.norm() + 1e-12);
      }
  }
}

TEST_CASE("haar_rotation returns rotations in d = 2, 3") {
  std::mt19937_64 rng(1);
  for (int d : {2, 3})
    for (int k = 0; k < 20; ++k) CHECK(is_rotation(haar_rotation(d, rng)));
}
