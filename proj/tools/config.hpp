#pragma once

#include "crystal/energetics.hpp"
#include "crystal/rigidity.hpp"
#include "crystal/sampler.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace crystal::cli {

/// Raised for anything that maps to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelSection {
  std::string tessellation = "triangular";
  int d = 2;
  double ell = 1.0;
  int N = 4;
  std::string potential = "quadratic";
  std::string potential_table;  ///< CSV with columns r,phi when potential = tabulated
};

struct SamplerSection {
  std::uint64_t steps = 10000;
  std::uint64_t burn_in = 2000;
  std::uint64_t thin = 10;
  std::optional<std::uint64_t> seed;
  int chains = 1;
  int validate_every = 1000;
  double displacement = -1.0;
  std::string hamiltonian = "plain";
  std::string initial = "standard";
};

struct RigiditySection {
  std::vector<std::string> kinds{"constant_rotation", "gradient", "dislocation", "counterexample"};
  std::vector<double> p{2.0, 1.0};
  std::vector<double> eta{1.0, 2.0, 4.0, 8.0};
  double resolution = 16.0;
  double half_width = 2.0;
  int members = 50;
  std::string mixing = "inside";
  std::uint64_t seed = 1;
};

struct ConstantsSection {
  int samples = 10000;
  std::uint64_t seed = 1;
};

struct IoSection {
  std::string output_dir = "out";
  std::vector<std::string> formats{"csv", "json"};
  std::string input;
};

struct RunConfig {
  ModelSection model;
  ModelParams params;
  SamplerSection sampler;
  RigiditySection rigidity;
  ConstantsSection constants;
  IoSection io;
  int threads = 1;
};

/// INI text; unknown sections or keys and invalid values raise ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
/// Canonical INI text (every key, doubles at full precision).
std::string serialize_config(const RunConfig& cfg);

/// Builds the tessellation and revalidates ModelParams against it.
Tessellation make_tessellation(const RunConfig& cfg);
Potential make_potential(const RunConfig& cfg);
EnsembleSpec make_ensemble_spec(const RunConfig& cfg);
SamplerParams make_sampler_params(const RunConfig& cfg);

}  // namespace crystal::cli
