#include "crystal/tessellation.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <set>

using namespace crystal;

TEST_CASE("triangular prototile and cell") {
  Tessellation t = build_triangular(1.0);
  CHECK(t.prototiles.size() == 1);
  CHECK(t.prototiles[0].volume == doctest::Approx(std::sqrt(3.0) / 4).epsilon(1e-14));
  CHECK(t.labels.size() == 6);
  CHECK(t.placements.size() == 2);
  CHECK(t.cell_vertices.size() == 1);
  CHECK(build_triangular(2.0).prototiles[0].volume == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
}

TEST_CASE("cubic prototile pair set") {
  Tessellation c = build_cubic(3, 1.0);
  CHECK(c.prototiles[0].n() == 8);
  CHECK(c.prototiles[0].energy_pairs().size() == 28);
  Tessellation s = build_cubic(2, 1.0);
  CHECK(s.prototiles[0].volume == doctest::Approx(1.0));
  double kuhn = 0.0;
  for (const auto& simplex : s.prototiles[0].simplices) {
    Mat v(2, 3);
    for (int k = 0; k < 3; ++k) v.col(k) = s.prototiles[0].corners.col(simplex[k]);
    kuhn += simplex_volume(v);
  }
  CHECK(kuhn == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("constants by periodic patch count") {
  auto tri = compute_constants(build_triangular(1.0));
  CHECK(tri.e.at({0, 0}) == 3);
  CHECK(tri.f.at({0, 0}) == 6);
  CHECK(tri.b.at({0, 0}) == 12);
  CHECK(tri.gamma.at(0) == doctest::Approx(0.5));
  CHECK(tri.rho_max > 0.0);
  CHECK(tri.rho_max <= std::sqrt(3.0) / 6 + 1e-12);

  auto sq = compute_constants(build_cubic(2, 1.0));
  CHECK(sq.e.at({0, 0}) == 4);
  CHECK(sq.f.at({0, 0}) == 4);
  CHECK(sq.b.at({0, 0}) == 8);
  CHECK(sq.gamma.at(0) == doctest::Approx(1.0));
}

TEST_CASE("standard complex counts") {
  auto tri = standard_complex(build_triangular(1.0), 4);
  CHECK(tri.points.size() == 16);
  CHECK(tri.tiles.size() == 32);
  auto sq = standard_complex(build_cubic(2, 1.0), 4);
  CHECK(sq.points.size() == 16);
  CHECK(sq.tiles.size() == 16);
  // every point carries f tiles
  std::vector<int> star(tri.points.size(), 0);
  for (const auto& t : tri.tiles)
    for (int c : t.corners) ++star[c];
  for (int s : star) CHECK(s == 6);
}

TEST_CASE("single vertex type on both tessellations") {
  CHECK(build_triangular(1.0).vertex_types.size() == 1);
  CHECK(build_cubic(2, 1.0).vertex_types.size() == 1);
}

TEST_CASE("unknown tessellation is rejected") {
  CHECK_THROWS_AS(build_tessellation("hexagonal", 2, 1.0), std::invalid_argument);
}
