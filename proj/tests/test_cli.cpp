#include "config.hpp"
#include "io.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace crystal;
using namespace crystal::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "crystal_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("config defaults and overrides") {
  RunConfig c = parse_config("[model]\nN = 6\n[params]\nbeta = 15\n[sampler]\nseed = 7\n");
  CHECK(c.model.N == 6);
  CHECK(c.params.beta == 15.0);
  CHECK(c.sampler.seed == std::optional<std::uint64_t>(7));
  CHECK(c.model.tessellation == "triangular");
  CHECK(c.rigidity.p == std::vector<double>{2.0, 1.0});
}

TEST_CASE("config rejects unknown keys, bad values and invalid parameters") {
  CHECK_THROWS_AS(parse_config("[model]\ncolour = red\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[unknown]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\nN = four\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[params]\neps = 0.1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[params]\nrho = 0.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\ntessellation = hexagonal\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[rigidity]\nkinds = gradient,vortex\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[sampler]\nseed = -3\n"), ConfigError);
  CHECK_THROWS_AS(load_config(scratch("missing.ini").string()), ConfigError);
}

TEST_CASE("config round trip is the identity") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    RunConfig c;
    c.model.N = 3 + trial % 5;
    c.params.eps = 0.01 + 0.04 * u(rng);
    c.params.rho = 0.01 + 0.2 * u(rng);
    c.params.beta = 100 * u(rng) + 1e-3;
    c.params.sigma = u(rng) / 3.0;
    c.params.m = -u(rng);
    c.params.tilde = trial % 2 ? TildeMultiplicity::ordered : TildeMultiplicity::once;
    if (trial % 3) c.sampler.seed = rng();
    c.rigidity.eta = {1.0, u(rng) + 1.0, 3.0};
    c.rigidity.kinds = {"gradient", "dislocation"};
    c.io.formats = {"json"};
    c.threads = 1 + trial % 4;
    const std::string text = serialize_config(c);
    RunConfig back = parse_config(text);
    CHECK(serialize_config(back) == text);
    CHECK(back.params.eps == c.params.eps);
    CHECK(back.params.m == c.params.m);
    CHECK(back.sampler.seed == c.sampler.seed);
    CHECK(back.rigidity.eta == c.rigidity.eta);
  }
}

TEST_CASE("manifest JSON is accepted as a config") {
  RunConfig c;
  c.sampler.seed = 42;
  nlohmann::json m;
  m["config"] = serialize_config(c);
  const fs::path path = scratch("manifest.json");
  write_text(path, m.dump());
  RunConfig back = load_config(path.string());
  CHECK(back.sampler.seed == std::optional<std::uint64_t>(42));
  CHECK(serialize_config(back) == serialize_config(c));
}

TEST_CASE("ensemble spec splits members across kinds") {
  RunConfig c = parse_config("[rigidity]\nmembers = 10\nkinds = gradient,dislocation,counterexample\n");
  EnsembleSpec s = make_ensemble_spec(c);
  CHECK(s.size() == 10);
  CHECK(s.constant_rotation == 0);
  CHECK(s.gradient == 4);
  CHECK(s.dislocation == 3);
  CHECK(s.counterexample == 3);
}

TEST_CASE("points CSV round trip") {
  std::vector<Vec> pts{(Vec(2) << 0.1, 1.0 / 3.0).finished(), (Vec(2) << -2.5, 1e-17).finished()};
  const fs::path path = scratch("points.csv");
  write_text(path, points_csv(pts));
  auto back = read_points_csv(path, 2);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == pts[0]);
  CHECK(back[1] == pts[1]);
  CHECK_THROWS_AS(read_points_csv(path, 3), IoError);
}

TEST_CASE("field binary round trip") {
  std::mt19937_64 rng(5);
  FieldParams fp;
  fp.bump = 0.7;
  RasterField f = make_field(FieldKind::counterexample, RasterDomain::square(2, 1.0), 16, fp, rng);
  const fs::path path = scratch("field.bin");
  write_field(path, f);
  CHECK(fs::exists(fs::path(path.string() + ".json")));
  RasterField g = read_field(path);
  CHECK(g.shape() == f.shape());
  CHECK(g.values() == f.values());
  CHECK(g.domain().origin == f.domain().origin);
  CHECK(fs::file_size(path) == 2 * 4 + 2 * 8 + 8 + f.values().size() * 8);
}

TEST_CASE("complex JSON counts") {
  Tessellation tess = build_triangular(1.0);
  PointConfig P = standard_configuration(tess, 4);
  TileComplex cx = extract(P, tess, {0.05, 0.1, false});
  auto j = complex_json(cx, P, tess);
  CHECK(j["n_tiles"] == 32);
  CHECK(j["n_surface"] == 0);
  CHECK(j["tiles"].size() == 32);
  CHECK(j["tiles"][0]["corners"].size() == 3);
}
