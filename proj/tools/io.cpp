#include "io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace crystal::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    auto a = cell.find_first_not_of(" \t\r");
    auto b = cell.find_last_not_of(" \t\r");
    out.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
  }
  return out;
}

std::vector<std::vector<double>> read_numeric_csv(const fs::path& path, const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != header) {
    std::string want;
    for (std::size_t i = 0; i < header.size(); ++i) want += (i ? "," : "") + header[i];
    throw IoError(path.string() + ": expected header '" + want + "'");
  }
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                    " columns");
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(c, &pos));
        if (pos != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": not a number '" + c + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

json matrix_json(const Mat& A) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < A.cols(); ++j) r.push_back(A(i, j));
    rows.push_back(r);
  }
  return rows;
}

json vector_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Mat matrix_from_json(const json& j) {
  const auto rows = Eigen::Index(j.size());
  const auto cols = rows ? Eigen::Index(j[0].size()) : 0;
  Mat A(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) A(i, k) = j[i][k].get<double>();
  return A;
}

Vec vector_from_json(const json& j) {
  Vec v(Eigen::Index(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in, const fs::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError(path.string() + ": truncated field file");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_writable_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw IoError("output directory '" + dir.string() + "' is not writable");
  }
  fs::remove(probe, ec);
}

std::vector<Vec> read_points_csv(const fs::path& path, int d) {
  std::vector<std::string> header;
  for (int k = 1; k <= d; ++k) header.push_back("x" + std::to_string(k));
  std::vector<Vec> points;
  for (const auto& row : read_numeric_csv(path, header)) points.push_back(Eigen::Map<const Vec>(row.data(), d));
  return points;
}

std::string points_csv(const std::vector<Vec>& points) {
  std::ostringstream o;
  const int d = points.empty() ? 2 : int(points.front().size());
  for (int k = 1; k <= d; ++k) o << (k > 1 ? "," : "") << 'x' << k;
  o << '\n';
  for (const auto& p : points) {
    for (int k = 0; k < d; ++k) o << (k ? "," : "") << format_double(p(k));
    o << '\n';
  }
  return o.str();
}

std::pair<std::vector<double>, std::vector<double>> read_potential_csv(const fs::path& path) {
  std::pair<std::vector<double>, std::vector<double>> out;
  for (const auto& row : read_numeric_csv(path, {"r", "phi"})) {
    out.first.push_back(row[0]);
    out.second.push_back(row[1]);
  }
  return out;
}

json tessellation_json(const Tessellation& tess, const TessellationConstants& consts) {
  json j;
  j["name"] = tess.name;
  j["d"] = tess.d;
  j["ell"] = tess.ell;
  j["cell"] = matrix_json(tess.cell);
  json protos = json::array();
  for (const auto& p : tess.prototiles)
    protos.push_back({{"type", p.type_id},
                      {"corners", matrix_json(p.corners)},
                      {"volume", p.volume},
                      {"simplices", p.simplices},
                      {"diameter", p.diameter}});
  j["prototiles"] = protos;
  json placements = json::array();
  for (const auto& p : tess.placements)
    placements.push_back({{"type", p.type_id}, {"offset", vector_json(p.offset)}, {"orientation", matrix_json(p.orientation)}});
  j["placements"] = placements;
  j["vertex_types"] = int(tess.vertex_types.size());
  auto pairs = [](const std::map<std::pair<int, int>, int>& m) {
    json a = json::array();
    for (const auto& [k, v] : m) a.push_back({{"i", k.first}, {"l", k.second}, {"value", v}});
    return a;
  };
  json gamma = json::array();
  for (const auto& [i, g] : consts.gamma) gamma.push_back({{"i", i}, {"value", g}});
  j["constants"] = {{"b", pairs(consts.b)},
                    {"e", pairs(consts.e)},
                    {"f", pairs(consts.f)},
                    {"gamma", gamma},
                    {"rho_max", consts.rho_max}};
  return j;
}

json complex_json(const TileComplex& complex, const PointConfig& P, const Tessellation& tess) {
  std::set<int> boundary(complex.boundary_tiles.begin(), complex.boundary_tiles.end());
  std::set<int> surface(complex.surface_points.begin(), complex.surface_points.end());
  std::set<int> exterior(complex.exterior_points.begin(), complex.exterior_points.end());
  json tiles = json::array();
  for (int t = 0; t < complex.size(); ++t) {
    const auto& c = complex.tiles[t];
    std::vector<int> ordered;
    for (int k = 0; k < tess.prototiles[c.type_id].n(); ++k) ordered.push_back(c.point_of(k));
    tiles.push_back({{"type", c.type_id},
                     {"placement", c.placement},
                     {"corners", ordered},
                     {"deviation", c.alignment.deviation},
                     {"volume", c.volume},
                     {"boundary", bool(boundary.count(t))}});
  }
  json points = json::array();
  for (int i = 0; i < P.size(); ++i)
    points.push_back({{"x", vector_json(P.points[i])},
                      {"surface", bool(surface.count(i))},
                      {"exterior", bool(exterior.count(i))}});
  json j;
  j["tessellation"] = tess.name;
  j["d"] = tess.d;
  j["N"] = P.dom.N;
  j["n_points"] = P.size();
  j["n_tiles"] = complex.size();
  j["n_boundary_tiles"] = complex.boundary_tiles.size();
  j["n_surface"] = complex.surface_points.size();
  j["n_exterior"] = complex.exterior_points.size();
  j["tiles"] = tiles;
  j["points"] = points;
  j["adjacency"] = complex.adjacency;
  return j;
}

void write_field(const fs::path& path, const RasterField& field) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  put<std::int32_t>(out, field.d());
  put<std::int32_t>(out, std::int32_t(field.shape().size()));
  for (int n : field.shape()) put<std::int64_t>(out, n);
  put<double>(out, field.resolution());
  out.write(reinterpret_cast<const char*>(field.values().data()), std::streamsize(field.values().size() * sizeof(double)));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
  fs::path sidecar = path;
  sidecar += ".json";
  write_text(sidecar, field_sidecar(field).dump(2) + "\n");
}

json field_sidecar(const RasterField& field) {
  const auto& dom = field.domain();
  return {{"d", field.d()},
          {"shape", field.shape()},
          {"resolution", field.resolution()},
          {"kind", dom.kind == DomainKind::torus ? "torus" : "box"},
          {"origin", vector_json(dom.origin)},
          {"axes", matrix_json(dom.axes)},
          {"layout", "row-major cells (last axis fastest), row-major d x d blocks, float64"}};
}

RasterField read_field(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  const int d = get<std::int32_t>(in, path);
  const int rank = get<std::int32_t>(in, path);
  if (d < 1 || rank != d) throw IoError(path.string() + ": bad field header");
  std::vector<int> shape;
  for (int k = 0; k < rank; ++k) shape.push_back(int(get<std::int64_t>(in, path)));
  const double resolution = get<double>(in, path);

  RasterDomain dom;
  dom.d = d;
  fs::path sidecar = path;
  sidecar += ".json";
  if (fs::exists(sidecar)) {
    json j = json::parse(read_text(sidecar));
    dom.kind = j.at("kind").get<std::string>() == "torus" ? DomainKind::torus : DomainKind::box;
    dom.origin = vector_from_json(j.at("origin"));
    dom.axes = matrix_from_json(j.at("axes"));
  } else {
    dom.origin = Vec::Zero(d);
    dom.axes = Mat::Zero(d, d);
    for (int k = 0; k < d; ++k) dom.axes(k, k) = shape[k] / resolution;
  }
  RasterField field(dom, resolution);
  if (field.shape() != shape) throw IoError(path.string() + ": header shape disagrees with the sidecar domain");
  auto& v = field.values();
  if (!in.read(reinterpret_cast<char*>(v.data()), std::streamsize(v.size() * sizeof(double))))
    throw IoError(path.string() + ": truncated field payload");
  field.check();
  return field;
}

std::string manifest_config_text(const std::string& manifest) {
  try {
    return json::parse(manifest).at("config").get<std::string>();
  } catch (const json::exception& e) {
    throw IoError(std::string("manifest: ") + e.what());
  }
}

}  // namespace crystal::cli
