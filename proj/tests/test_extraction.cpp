#include "crystal/energetics.hpp"
#include "crystal/extraction.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

using namespace crystal;

namespace {

const ExtractionParams kParams{0.05, 0.1, false};

std::set<std::vector<int>> corner_sets(const std::vector<CandidateTile>& tiles) {
  std::set<std::vector<int>> s;
  for (const auto& t : tiles) s.insert(t.corners);
  return s;
}

PointConfig remove_point(PointConfig P, int j) {
  P.points.erase(P.points.begin() + j);
  return P;
}

}  // namespace

TEST_CASE("standard configuration extracts to the full tessellation") {
  Tessellation tess = build_triangular(1.0);
  for (int N : {4, 6}) {
    PointConfig P = standard_configuration(tess, N);
    TileComplex cx = extract(P, tess, kParams);
    CHECK(cx.size() == 2 * N * N);
    CHECK(cx.boundary_tiles.empty());
    CHECK(cx.surface_points.empty());
    CHECK(cx.exterior_points.empty());
    CHECK(verify_conditions(cx, P, tess, kParams).empty());
    CHECK(check_admissible(cx, 0.5, N, 2));
  }
  Tessellation sq = build_cubic(2, 1.0);
  TileComplex cs = extract(standard_configuration(sq, 4), sq, kParams);
  CHECK(cs.size() == 16);
  CHECK(cs.surface_points.empty());
}

TEST_CASE("candidate set of the standard configuration contains every reference tile") {
  Tessellation tess = build_triangular(1.0);
  PointConfig P = standard_configuration(tess, 4);
  auto cand = enumerate_candidates(P, tess, kParams.eps);
  CHECK(cand.size() == 32);
  std::set<std::vector<int>> ref;
  for (const auto& t : standard_complex(tess, 4).tiles) {
    auto c = t.corners;
    std::sort(c.begin(), c.end());
    ref.insert(c);
  }
  CHECK(corner_sets(cand) == ref);
}

TEST_CASE("deleted vertex removes its star") {
  Tessellation tess = build_triangular(1.0);
  PointConfig P = remove_point(standard_configuration(tess, 4), 5);
  TileComplex cx = extract(P, tess, kParams);
  CHECK(cx.size() == 32 - 6);
  CHECK(cx.surface_points.size() == 6);
  CHECK(cx.exterior_points.empty());
  CHECK(surface_measure(cx) == doctest::Approx(6.0));
  auto consts = compute_constants(tess);
  CHECK(boundary_inequality(cx, P, consts));
}

TEST_CASE("tile matching tolerance") {
  Tessellation tess = build_triangular(1.0);
  const double eps = 0.05;
  Mat corners = tess.prototiles[0].corners;
  Vec centroid = corners.rowwise().mean();
  Mat near = corners, far = corners;
  Vec out0 = (corners.col(0) - centroid).normalized();
  near.col(0) += 0.5 * eps * out0;
  far.col(0) += 4.0 * eps * out0;
  CHECK(match_tile(near, tess.prototiles[0], eps).has_value());
  CHECK_FALSE(match_tile(far, tess.prototiles[0], eps).has_value());
}

TEST_CASE("greedy extraction matches exhaustive search on two overlapping hexagons") {
  Tessellation tess = build_triangular(1.0);
  PointConfig P;
  P.dom = TorusDomain(4, tess.cell);
  const Vec c = P.dom.from_fractional(Vec::Constant(2, 0.5));
  P.points.push_back(c);
  for (double offset : {0.0, 20.0 * M_PI / 180.0})
    for (int k = 0; k < 6; ++k) {
      double a = offset + k * M_PI / 3.0;
      P.points.push_back(c + Vec((Vec(2) << std::cos(a), std::sin(a)).finished()));
    }
  auto cand = enumerate_candidates(P, tess, kParams.eps);
  REQUIRE(cand.size() == 12);

  std::size_t best = 0;
  for (unsigned mask = 1; mask < (1u << cand.size()); ++mask) {
    const auto count = std::size_t(__builtin_popcount(mask));
    if (count <= best) continue;
    TileComplex sub;
    for (std::size_t k = 0; k < cand.size(); ++k)
      if (mask >> k & 1u) sub.tiles.push_back(cand[k]);
    if (verify_conditions(sub, P, tess, kParams).empty()) best = count;
  }
  TileComplex greedy = extract_crystal(cand, P, tess, kParams);
  CHECK(best == 6);
  CHECK(std::size_t(greedy.size()) == best);
}

TEST_CASE("incremental candidate set equals fresh enumeration") {
  Tessellation tess = build_triangular(1.0);
  std::mt19937_64 rng(21);
  DefectSpec spec;
  spec.vacancies = 2;
  spec.perturbation = 0.0;
  spec.min_separation = 2.0;
  PointConfig P = defected_configuration(tess, 5, spec, rng);
  CandidateSet set(P, tess, kParams.eps);
  std::uniform_int_distribution<int> pick(0, P.size() - 1);
  std::normal_distribution<double> g(0.0, 0.02);
  for (int move = 0; move < 40; ++move) {
    int j = pick(rng);
    set.begin_edit();
    auto before = corner_sets(set.tiles());
    Vec old = P.points[j];
    P.points[j] = P.dom.wrap(old + Vec::NullaryExpr(2, [&] { return g(rng); }));
    set.refresh_point(P, j);
    CHECK(corner_sets(set.tiles()) == corner_sets(enumerate_candidates(P, tess, kParams.eps)));
    TileComplex inc = extract_crystal(set, P, tess, kParams);
    TileComplex fresh = extract(P, tess, kParams);
    CHECK(corner_sets(inc.tiles) == corner_sets(fresh.tiles));
    if (move % 2) {
      P.points[j] = old;
      set.rollback();
      CHECK(corner_sets(set.tiles()) == before);
    }
  }
}

TEST_CASE("counting sample of the standard configuration") {
  Tessellation tess = build_triangular(1.0);
  auto consts = compute_constants(tess);
  PointConfig P = standard_configuration(tess, 4);
  CountingSample s = counting_sample(extract(P, tess, kParams), P, tess, consts, 4);
  CHECK(s.points == 16);
  CHECK(s.covered_points == 16);
  CHECK(s.tiles[0] == 32);
  CHECK(s.standard_tiles[0] == 32);
  CHECK(s.gamma_sum == doctest::Approx(16.0));
}

TEST_CASE("boundary inequality on random defected configurations") {
  Tessellation tess = build_triangular(1.0);
  auto consts = compute_constants(tess);
  std::mt19937_64 rng(8);
  for (int k = 0; k < 20; ++k) {
    DefectSpec spec;
    spec.vacancies = 1 + k % 3;
    spec.interstitials = k % 2;
    spec.perturbation = 0.005;
    PointConfig P = defected_configuration(tess, 5, spec, rng);
    TileComplex cx = extract(P, tess, kParams);
    CHECK(boundary_inequality(cx, P, consts));
    CHECK(verify_conditions(cx, P, tess, kParams).empty());
  }
}
