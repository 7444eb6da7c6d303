#include "config.hpp"

#include "io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace crystal::cli {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"model", {"tessellation", "d", "ell", "N", "potential", "potential_table"}},
      {"params", {"eps", "rho", "c0", "alpha", "sigma", "m", "beta", "c1", "c2", "tilde"}},
      {"sampler",
       {"steps", "burn_in", "thin", "seed", "chains", "validate_every", "displacement", "hamiltonian", "initial"}},
      {"rigidity", {"kinds", "p", "eta", "resolution", "half_width", "members", "mixing", "seed"}},
      {"constants", {"samples", "seed"}},
      {"io", {"output_dir", "formats", "input"}},
      {"run", {"threads"}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!trim(item).empty()) out.push_back(trim(item));
  return out;
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  template <typename T, typename Parse>
  void get(const std::string& section, const std::string& key, T& out, Parse parse) {
    auto sec = tree_.get_child_optional(section);
    if (!sec) return;
    auto v = sec->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!v) return;
    try {
      out = parse(trim(*v));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("config: invalid value for " + section + "." + key + ": '" + *v + "'");
    }
  }

 private:
  const pt::ptree& tree_;
};

double to_double(const std::string& s) {
  std::size_t pos = 0;
  double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("trailing characters");
  return v;
}

int to_int(const std::string& s) {
  std::size_t pos = 0;
  int v = std::stoi(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("trailing characters");
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  if (s.empty() || s[0] == '-') throw std::invalid_argument("negative");
  std::size_t pos = 0;
  std::uint64_t v = std::stoull(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("trailing characters");
  return v;
}

std::vector<double> to_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& x : split_list(s)) out.push_back(to_double(x));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

std::string join(const std::vector<double>& v) {
  std::vector<std::string> s;
  for (double x : v) s.push_back(fmt(x));
  return join(s);
}

void check(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("config: " + msg);
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const auto& keys = known_keys();
  for (const auto& [section, sub] : tree) {
    auto it = keys.find(section);
    if (it == keys.end()) throw ConfigError("config: unknown section [" + section + "]");
    if (!sub.data().empty()) throw ConfigError("config: top-level key '" + section + "' outside a section");
    for (const auto& [key, value] : sub)
      if (!it->second.count(key)) throw ConfigError("config: unknown key " + section + "." + key);
  }

  RunConfig c;
  Reader r(tree);
  auto str = [](const std::string& s) { return s; };
  r.get("model", "tessellation", c.model.tessellation, str);
  r.get("model", "d", c.model.d, to_int);
  r.get("model", "ell", c.model.ell, to_double);
  r.get("model", "N", c.model.N, to_int);
  r.get("model", "potential", c.model.potential, str);
  r.get("model", "potential_table", c.model.potential_table, str);

  c.params.ell = c.model.ell;
  r.get("params", "eps", c.params.eps, to_double);
  r.get("params", "rho", c.params.rho, to_double);
  r.get("params", "c0", c.params.c0, to_double);
  r.get("params", "alpha", c.params.alpha, to_double);
  r.get("params", "sigma", c.params.sigma, to_double);
  r.get("params", "m", c.params.m, to_double);
  r.get("params", "beta", c.params.beta, to_double);
  r.get("params", "c1", c.params.c1, to_double);
  r.get("params", "c2", c.params.c2, to_double);
  std::string tilde = "once";
  r.get("params", "tilde", tilde, str);
  check(tilde == "once" || tilde == "ordered", "params.tilde must be once or ordered");
  c.params.tilde = tilde == "once" ? TildeMultiplicity::once : TildeMultiplicity::ordered;

  r.get("sampler", "steps", c.sampler.steps, to_u64);
  r.get("sampler", "burn_in", c.sampler.burn_in, to_u64);
  r.get("sampler", "thin", c.sampler.thin, to_u64);
  r.get("sampler", "seed", c.sampler.seed, [](const std::string& s) { return std::optional<std::uint64_t>(to_u64(s)); });
  r.get("sampler", "chains", c.sampler.chains, to_int);
  r.get("sampler", "validate_every", c.sampler.validate_every, to_int);
  r.get("sampler", "displacement", c.sampler.displacement, to_double);
  r.get("sampler", "hamiltonian", c.sampler.hamiltonian, str);
  r.get("sampler", "initial", c.sampler.initial, str);

  r.get("rigidity", "kinds", c.rigidity.kinds, split_list);
  r.get("rigidity", "p", c.rigidity.p, to_doubles);
  r.get("rigidity", "eta", c.rigidity.eta, to_doubles);
  r.get("rigidity", "resolution", c.rigidity.resolution, to_double);
  r.get("rigidity", "half_width", c.rigidity.half_width, to_double);
  r.get("rigidity", "members", c.rigidity.members, to_int);
  r.get("rigidity", "mixing", c.rigidity.mixing, str);
  r.get("rigidity", "seed", c.rigidity.seed, to_u64);

  r.get("constants", "samples", c.constants.samples, to_int);
  r.get("constants", "seed", c.constants.seed, to_u64);

  r.get("io", "output_dir", c.io.output_dir, str);
  r.get("io", "formats", c.io.formats, split_list);
  r.get("io", "input", c.io.input, str);
  r.get("run", "threads", c.threads, to_int);

  check(c.model.N >= 1, "model.N must be >= 1");
  check(c.model.potential == "quadratic" || c.model.potential == "tabulated",
        "model.potential must be quadratic or tabulated");
  check(c.model.potential != "tabulated" || !c.model.potential_table.empty(),
        "model.potential_table is required for a tabulated potential");
  check(c.sampler.thin >= 1, "sampler.thin must be >= 1");
  check(c.sampler.chains >= 1, "sampler.chains must be >= 1");
  check(c.sampler.validate_every >= 1, "sampler.validate_every must be >= 1");
  check(c.sampler.hamiltonian == "plain" || c.sampler.hamiltonian == "tilde",
        "sampler.hamiltonian must be plain or tilde");
  check(!c.rigidity.p.empty(), "rigidity.p must list at least one exponent");
  for (double p : c.rigidity.p) check(p >= 1.0, "rigidity.p values must be >= 1");
  check(!c.rigidity.eta.empty(), "rigidity.eta must list at least one scale");
  for (double e : c.rigidity.eta) check(e > 0.0, "rigidity.eta values must be positive");
  check(c.rigidity.resolution >= 16.0, "rigidity.resolution must be >= 16");
  check(c.rigidity.half_width > 0.0, "rigidity.half_width must be positive");
  check(c.rigidity.members >= 1, "rigidity.members must be >= 1");
  check(c.rigidity.mixing == "inside" || c.rigidity.mixing == "outside", "rigidity.mixing must be inside or outside");
  check(!c.rigidity.kinds.empty(), "rigidity.kinds must not be empty");
  for (const auto& k : c.rigidity.kinds) {
    try {
      parse_field_kind(k);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  check(c.constants.samples >= 1, "constants.samples must be >= 1");
  for (const auto& f : c.io.formats) check(f == "csv" || f == "json" || f == "bin", "io.formats entries must be csv, json or bin");
  check(c.threads >= 1, "run.threads must be >= 1");
  make_tessellation(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") text = manifest_config_text(text);
  RunConfig c = parse_config(text);
  const std::filesystem::path base = std::filesystem::absolute(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  resolve(c.io.input);
  resolve(c.model.potential_table);
  return c;
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream o;
  o << "[model]\n"
    << "tessellation = " << c.model.tessellation << "\n"
    << "d = " << c.model.d << "\n"
    << "ell = " << fmt(c.model.ell) << "\n"
    << "N = " << c.model.N << "\n"
    << "potential = " << c.model.potential << "\n";
  if (!c.model.potential_table.empty()) o << "potential_table = " << c.model.potential_table << "\n";
  o << "\n[params]\n"
    << "eps = " << fmt(c.params.eps) << "\n"
    << "rho = " << fmt(c.params.rho) << "\n"
    << "c0 = " << fmt(c.params.c0) << "\n"
    << "alpha = " << fmt(c.params.alpha) << "\n"
    << "sigma = " << fmt(c.params.sigma) << "\n"
    << "m = " << fmt(c.params.m) << "\n"
    << "beta = " << fmt(c.params.beta) << "\n"
    << "c1 = " << fmt(c.params.c1) << "\n"
    << "c2 = " << fmt(c.params.c2) << "\n"
    << "tilde = " << (c.params.tilde == TildeMultiplicity::once ? "once" : "ordered") << "\n";
  o << "\n[sampler]\n"
    << "steps = " << c.sampler.steps << "\n"
    << "burn_in = " << c.sampler.burn_in << "\n"
    << "thin = " << c.sampler.thin << "\n";
  if (c.sampler.seed) o << "seed = " << *c.sampler.seed << "\n";
  o << "chains = " << c.sampler.chains << "\n"
    << "validate_every = " << c.sampler.validate_every << "\n"
    << "displacement = " << fmt(c.sampler.displacement) << "\n"
    << "hamiltonian = " << c.sampler.hamiltonian << "\n"
    << "initial = " << c.sampler.initial << "\n";
  o << "\n[rigidity]\n"
    << "kinds = " << join(c.rigidity.kinds) << "\n"
    << "p = " << join(c.rigidity.p) << "\n"
    << "eta = " << join(c.rigidity.eta) << "\n"
    << "resolution = " << fmt(c.rigidity.resolution) << "\n"
    << "half_width = " << fmt(c.rigidity.half_width) << "\n"
    << "members = " << c.rigidity.members << "\n"
    << "mixing = " << c.rigidity.mixing << "\n"
    << "seed = " << c.rigidity.seed << "\n";
  o << "\n[constants]\n"
    << "samples = " << c.constants.samples << "\n"
    << "seed = " << c.constants.seed << "\n";
  o << "\n[io]\n"
    << "output_dir = " << c.io.output_dir << "\n"
    << "formats = " << join(c.io.formats) << "\n";
  if (!c.io.input.empty()) o << "input = " << c.io.input << "\n";
  o << "\n[run]\n"
    << "threads = " << c.threads << "\n";
  return o.str();
}

Tessellation make_tessellation(const RunConfig& c) {
  try {
    Tessellation tess = build_tessellation(c.model.tessellation, c.model.d, c.model.ell);
    TessellationConstants consts = compute_constants(tess);
    c.params.validate(tess, consts.rho_max);
    return tess;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

Potential make_potential(const RunConfig& c) {
  try {
    Potential phi;
    if (c.model.potential == "tabulated") {
      auto [r, v] = read_potential_csv(c.model.potential_table);
      phi = tabulated_potential(r, v);
    } else {
      phi = quadratic_potential(c.params.alpha);
    }
    std::string bad = phi.check();
    if (!bad.empty()) throw ConfigError("config: potential " + bad);
    return phi;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const IoError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

EnsembleSpec make_ensemble_spec(const RunConfig& c) {
  EnsembleSpec s;
  s.constant_rotation = s.gradient = s.dislocation = s.counterexample = 0;
  const int k = int(c.rigidity.kinds.size());
  for (int i = 0; i < k; ++i) {
    int share = c.rigidity.members / k + (i < c.rigidity.members % k ? 1 : 0);
    switch (parse_field_kind(c.rigidity.kinds[i])) {
      case FieldKind::constant_rotation: s.constant_rotation += share; break;
      case FieldKind::gradient: s.gradient += share; break;
      case FieldKind::dislocation: s.dislocation += share; break;
      case FieldKind::counterexample: s.counterexample += share; break;
    }
  }
  s.half_width = c.rigidity.half_width;
  s.resolution = c.rigidity.resolution;
  s.seed = c.rigidity.seed;
  s.threads = c.threads;
  s.mixing = c.rigidity.mixing == "inside" ? DNormMixing::inside : DNormMixing::outside;
  return s;
}

SamplerParams make_sampler_params(const RunConfig& c) {
  SamplerParams sp;
  sp.displacement = c.sampler.displacement;
  sp.validate_every = c.sampler.validate_every;
  sp.variant = c.sampler.hamiltonian == "tilde" ? HamiltonianVariant::tilde : HamiltonianVariant::plain;
  return sp;
}

}  // namespace crystal::cli
