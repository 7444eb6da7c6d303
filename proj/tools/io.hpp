#pragma once

#include "crystal/deformation.hpp"
#include "crystal/rigidity.hpp"
#include "crystal/sampler.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace crystal::cli {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// 17 significant digits
std::string format_double(double v);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
/// Creates the directory and probes it with a scratch file.
void ensure_writable_dir(const std::filesystem::path& dir);

/// Header x1,...,xd, one point per row.
std::vector<Vec> read_points_csv(const std::filesystem::path& path, int d);
std::string points_csv(const std::vector<Vec>& points);

/// Header r,phi.
std::pair<std::vector<double>, std::vector<double>> read_potential_csv(const std::filesystem::path& path);

nlohmann::json tessellation_json(const Tessellation& tess, const TessellationConstants& consts);
nlohmann::json complex_json(const TileComplex& complex, const PointConfig& P, const Tessellation& tess);

/// Binary layout: int32 d, int32 rank, int64 shape[rank], float64 resolution, float64 payload (row-major).
void write_field(const std::filesystem::path& path, const RasterField& field);
RasterField read_field(const std::filesystem::path& path);
/// Domain, shape and resolution; written next to the binary as <path>.json.
nlohmann::json field_sidecar(const RasterField& field);

/// The INI text stored in a manifest.json.
std::string manifest_config_text(const std::string& manifest);

}  // namespace crystal::cli
