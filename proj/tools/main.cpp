#include "config.hpp"
#include "io.hpp"

#include "crystal/deformation.hpp"
#include "crystal/energetics.hpp"
#include "crystal/extraction.hpp"
#include "crystal/rigidity.hpp"
#include "crystal/sampler.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace crystal::cli {
namespace {

enum ExitCode { ok = 0, config_error = 2, invariant_violation = 3 };

struct InvariantViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
};

class Run {
 public:
  Run(std::string command, const Options& opt) : command_(std::move(command)) {
    cfg_ = load_config(opt.config);
    if (opt.seed) cfg_.sampler.seed = *opt.seed;
    if (opt.threads) {
      if (*opt.threads < 1) throw ConfigError("--threads must be >= 1");
      cfg_.threads = *opt.threads;
    }
    if (opt.out) cfg_.io.output_dir = *opt.out;
    dir_ = cfg_.io.output_dir;
    try {
      ensure_writable_dir(dir_);
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
  }

  const RunConfig& cfg() const { return cfg_; }
  bool want(const std::string& format) const {
    return std::find(cfg_.io.formats.begin(), cfg_.io.formats.end(), format) != cfg_.io.formats.end();
  }

  void write(const std::string& name, const std::string& text) {
    write_text(dir_ / name, text);
    outputs_.push_back(name);
  }
  void write(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }
  fs::path path(const std::string& name) {
    outputs_.push_back(name);
    return dir_ / name;
  }
  void seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }

  void finish() {
    json m;
    m["command"] = command_;
    m["config"] = serialize_config(cfg_);
    m["seeds"] = seeds_;
    m["threads"] = cfg_.threads;
    m["outputs"] = outputs_;
    write_text(dir_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  std::string command_;
  RunConfig cfg_;
  fs::path dir_;
  std::vector<std::string> outputs_;
  json seeds_ = json::object();
};

/// Non-finite values become null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

json params_json(const ModelParams& p) {
  return {{"eps", num(p.eps)},     {"rho", num(p.rho)},   {"c0", num(p.c0)}, {"ell", num(p.ell)},
          {"alpha", num(p.alpha)}, {"sigma", num(p.sigma)}, {"m", num(p.m)},   {"beta", num(p.beta)},
          {"c1", num(p.c1)},       {"c2", num(p.c2)},
          {"tilde", p.tilde == TildeMultiplicity::once ? "once" : "ordered"}};
}

PointConfig initial_configuration(const RunConfig& cfg, const Tessellation& tess) {
  if (cfg.sampler.initial == "standard") return standard_configuration(tess, cfg.model.N);
  if (cfg.sampler.initial == "input") {
    if (cfg.io.input.empty()) throw ConfigError("sampler.initial = input needs io.input");
    return {TorusDomain(cfg.model.N, tess.cell), read_points_csv(cfg.io.input, cfg.model.d)};
  }
  throw ConfigError("sampler.initial must be standard or input");
}

int cmd_simulate(Run& run) {
  const auto& cfg = run.cfg();
  if (!cfg.sampler.seed) throw ConfigError("simulate needs a seed (--seed or sampler.seed)");
  if (cfg.sampler.steps <= cfg.sampler.burn_in) throw ConfigError("sampler.steps must exceed sampler.burn_in");
  const std::uint64_t seed = *cfg.sampler.seed;
  run.seed("sampler", seed);

  Tessellation tess = make_tessellation(cfg);
  Potential phi = make_potential(cfg);
  SamplerParams sp = make_sampler_params(cfg);
  PointConfig init = initial_configuration(cfg, tess);

  std::vector<ChainResult> chains;
  try {
    chains = run_chains(tess, cfg.params, phi, sp, init, cfg.sampler.steps, cfg.sampler.burn_in, cfg.sampler.thin,
                        seed, cfg.sampler.chains, cfg.threads);
  } catch (const std::runtime_error& e) {
    throw InvariantViolation(e.what());
  }

  json summary;
  summary["seed"] = seed;
  summary["params"] = params_json(cfg.params);
  summary["tessellation"] = cfg.model.tessellation;
  summary["N"] = cfg.model.N;
  summary["steps"] = cfg.sampler.steps;
  summary["burn_in"] = cfg.sampler.burn_in;
  summary["thin"] = cfg.sampler.thin;
  json per_chain = json::array();
  std::vector<double> all_op, all_gap;
  for (const auto& c : chains) {
    if (run.want("csv")) run.write("chain_" + std::to_string(c.chain_index) + ".csv", trace_csv(c.records));
    std::vector<double> op, gap;
    for (const auto& r : c.records) {
      op.push_back(r.order_param);
      gap.push_back(r.energy_gap_per_tile);
    }
    all_op.insert(all_op.end(), op.begin(), op.end());
    all_gap.insert(all_gap.end(), gap.begin(), gap.end());
    json j;
    j["chain_index"] = c.chain_index;
    j["master_seed"] = c.master_seed;
    j["records"] = c.records.size();
    j["mean_order_param"] = num(mean(op));
    j["median_order_param"] = num(median(op));
    j["mean_energy_gap_per_tile"] = num(mean(gap));
    j["median_energy_gap_per_tile"] = num(median(gap));
    if (!c.records.empty()) {
      const auto& last = c.records.back();
      j["acceptance"] = {{"birth", num(last.acc_birth)}, {"death", num(last.acc_death)}, {"displace", num(last.acc_disp)}};
    }
    j["autocorrelation_time"] = num(c.autocorrelation_time);
    j["max_validation_error"] = num(c.max_validation_error);
    per_chain.push_back(j);
  }
  summary["chains"] = per_chain;
  summary["mean_order_param"] = num(mean(all_op));
  summary["median_order_param"] = num(median(all_op));
  summary["mean_energy_gap_per_tile"] = num(mean(all_gap));
  if (run.want("json")) run.write("summary.json", summary);
  return ok;
}

int cmd_extract(Run& run) {
  const auto& cfg = run.cfg();
  if (cfg.io.input.empty()) throw ConfigError("extract needs io.input (point CSV)");
  Tessellation tess = make_tessellation(cfg);
  PointConfig P{TorusDomain(cfg.model.N, tess.cell), read_points_csv(cfg.io.input, cfg.model.d)};
  for (auto& x : P.points) x = P.dom.wrap(x);
  TileComplex complex = extract(P, tess, cfg.params.extraction());
  json j = complex_json(complex, P, tess);
  if (complex.size() > 0) {
    OrderParameter op = order_parameter(build_deformation(complex, tess));
    j["order_param"] = num(op.value);
  }
  run.write("complex.json", j);
  std::cout << "tiles " << complex.size() << ", surface points " << complex.surface_points.size() << "\n";
  return ok;
}

json fit_json(const ConstantFit& f) { return {{"C1", num(f.C1)}, {"C2", num(f.C2)}, {"constraints", f.constraints}}; }

struct ScalingRun {
  std::vector<std::vector<EnsembleMember>> members;  // [eta]
  std::vector<std::vector<ConstantFit>> fits;        // [p][eta]
};

ScalingRun scaling(const EnsembleSpec& spec, const std::vector<double>& etas, const std::vector<double>& ps) {
  ScalingRun r;
  r.fits.assign(ps.size(), {});
  for (double eta : etas) {
    r.members.push_back(run_ensemble(spec, eta, ps));
    for (std::size_t q = 0; q < ps.size(); ++q) r.fits[q].push_back(estimate_constants(r.members.back(), q));
  }
  return r;
}

json slope_or_null(const std::vector<double>& etas, const std::vector<double>& y) {
  if (etas.size() < 2) return nullptr;
  for (double v : y)
    if (!(v > 0.0)) return nullptr;
  return num(loglog_slope(etas, y));
}

json scaling_json(const ScalingRun& r, const std::vector<double>& etas, const std::vector<double>& ps) {
  json out = json::array();
  for (std::size_t q = 0; q < ps.size(); ++q) {
    std::vector<double> c1, c2;
    json per_eta = json::array();
    for (std::size_t e = 0; e < etas.size(); ++e) {
      c1.push_back(r.fits[q][e].C1);
      c2.push_back(r.fits[q][e].C2);
      json f = fit_json(r.fits[q][e]);
      f["eta"] = num(etas[e]);
      per_eta.push_back(f);
    }
    out.push_back({{"p", num(ps[q])},
                   {"fits", per_eta},
                   {"C1_exponent", slope_or_null(etas, c1)},
                   {"C2_exponent", slope_or_null(etas, c2)}});
  }
  return out;
}

int cmd_rigidity(Run& run) {
  const auto& cfg = run.cfg();
  EnsembleSpec spec = make_ensemble_spec(cfg);
  const auto& etas = cfg.rigidity.eta;
  const auto& ps = cfg.rigidity.p;
  run.seed("rigidity", spec.seed);

  ScalingRun main = scaling(spec, etas, ps);
  if (run.want("csv")) {
    std::ostringstream csv;
    csv << "kind,p,eta,lhs,rhs1,rhs2,C1,C2\n";
    for (std::size_t e = 0; e < etas.size(); ++e)
      for (const auto& m : main.members[e])
        for (std::size_t q = 0; q < ps.size(); ++q) {
          const auto& g = m.reports[q];
          const auto& f = main.fits[q][e];
          csv << to_string(m.kind) << ',' << format_double(ps[q]) << ',' << format_double(m.eta) << ','
              << format_double(g.lhs) << ',' << format_double(g.rhs1) << ',' << format_double(g.rhs2) << ','
              << format_double(f.C1) << ',' << format_double(f.C2) << '\n';
        }
    run.write("gap_reports.csv", csv.str());
  }

  int violations = 0;
  for (std::size_t e = 0; e < etas.size(); ++e)
    for (std::size_t q = 0; q < ps.size(); ++q) {
      std::vector<GapReport> reps;
      for (const auto& m : main.members[e]) reps.push_back(m.reports[q]);
      violations += count_gap_violations(reps, main.fits[q][e]);
    }

  json fit;
  fit["etas"] = etas;
  fit["members"] = spec.size();
  fit["mixing"] = cfg.rigidity.mixing;
  fit["scaling"] = scaling_json(main, etas, ps);
  fit["violations"] = violations;

  std::vector<double> sharp_etas;
  for (double eta : etas)
    if (eta >= 2.0) sharp_etas.push_back(eta);
  if (sharp_etas.empty()) sharp_etas = etas;
  auto sharp = sharpness_experiment(sharp_etas, 2.0, cfg.rigidity.resolution, cfg.rigidity.half_width);
  json sj = json::array();
  for (const auto& s : sharp)
    sj.push_back({{"eta", num(s.eta)}, {"inf_gap", num(s.inf_gap)}, {"dV_norm", num(s.dV_norm)},
                  {"implied_C2", num(s.implied_C2)}});
  fit["sharpness"] = sj;

  EnsembleSpec other = spec;
  other.mixing = spec.mixing == DNormMixing::inside ? DNormMixing::outside : DNormMixing::inside;
  ScalingRun alt = scaling(other, etas, ps);
  fit["mixing_sensitivity"] = {{"mixing", other.mixing == DNormMixing::inside ? "inside" : "outside"},
                               {"scaling", scaling_json(alt, etas, ps)}};

  if (run.want("json")) run.write("scaling_fit.json", fit);

  if (run.want("bin")) {
    std::mt19937_64 rng(spec.seed);
    FieldParams fp;
    fp.random_rotation = false;
    for (const auto& s : sharp) {
      RasterField f = make_field(FieldKind::counterexample, RasterDomain::square(2, cfg.rigidity.half_width * s.eta),
                                 cfg.rigidity.resolution, fp, rng);
      std::string name = "counterexample_eta" + format_double(s.eta) + ".bin";
      write_field(run.path(name), f);
      run.path(name + ".json");
    }
  }
  if (violations > 0) throw InvariantViolation("rigidity: fitted constants violated on " + std::to_string(violations) +
                                               " reports");
  return ok;
}

int cmd_constants(Run& run) {
  const auto& cfg = run.cfg();
  Tessellation tess = make_tessellation(cfg);
  TessellationConstants consts = compute_constants(tess);
  Potential phi = make_potential(cfg);
  run.seed("constants", cfg.constants.seed);
  std::mt19937_64 rng(cfg.constants.seed);
  LocalBoundFit fit = verify_local_bound(tess, phi, cfg.params.ell, cfg.params.eps, cfg.constants.samples, rng);
  json j;
  j["tessellation"] = tessellation_json(tess, consts);
  j["m0"] = num(compute_m0(tess, consts, cfg.params, phi));
  j["local_bound"] = {{"c1", num(fit.c1)}, {"c2", num(fit.c2)}, {"samples", fit.samples},
                      {"violations", fit.violations}};
  run.write("constants.json", j);
  if (fit.violations > 0 || !(fit.c1 > 0.0))
    throw InvariantViolation("constants: local bound fit has " + std::to_string(fit.violations) + " violations");
  return ok;
}

class Suite {
 public:
  void check(const std::string& name, const std::function<std::string()>& body) {
    std::string detail;
    bool pass = false;
    try {
      detail = body();
      pass = detail.rfind("FAIL", 0) != 0;
    } catch (const std::exception& e) {
      detail = std::string("FAIL exception: ") + e.what();
    }
    std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
    results_.push_back({{"name", name}, {"pass", pass}, {"detail", detail}});
    failures_ += pass ? 0 : 1;
  }
  const json& results() const { return results_; }
  int failures() const { return failures_; }

 private:
  json results_ = json::array();
  int failures_ = 0;
};

std::string verdict(bool pass, const std::string& detail) { return (pass ? "" : "FAIL ") + detail; }

int cmd_verify(Run& run) {
  const auto& cfg = run.cfg();
  const std::uint64_t seed = cfg.sampler.seed.value_or(1);
  run.seed("verify", seed);
  Tessellation tess = make_tessellation(cfg);
  TessellationConstants consts = compute_constants(tess);
  Potential phi = make_potential(cfg);
  const int N = cfg.model.N;
  const double Nd = std::pow(double(N), double(tess.d));
  Suite suite;

  suite.check("tessellation constants", [&] {
    bool pass = consts.rho_max > 0.0;
    for (const auto& [i, g] : consts.gamma) pass = pass && g > 0.0;
    return verdict(pass, "rho_max " + format_double(consts.rho_max));
  });
  suite.check("potential", [&] {
    std::string bad = phi.check();
    return verdict(bad.empty(), bad.empty() ? "convex with minimum at 1" : bad);
  });

  PointConfig star = standard_configuration(tess, N);
  TileComplex complex;
  suite.check("standard extraction", [&] {
    complex = extract(star, tess, cfg.params.extraction());
    const int expected = int(std::lround(Nd)) * int(tess.placements.size());
    bool pass = complex.size() == expected && complex.surface_points.empty() && complex.exterior_points.empty() &&
                complex.boundary_tiles.empty();
    return verdict(pass, std::to_string(complex.size()) + " tiles (expected " + std::to_string(expected) + "), " +
                             std::to_string(complex.surface_points.size()) + " surface points");
  });
  suite.check("locally M-like conditions", [&] {
    std::string bad = verify_conditions(complex, star, tess, cfg.params.extraction());
    return verdict(bad.empty(), bad.empty() ? "all hold" : bad);
  });
  suite.check("admissibility", [&] {
    return verdict(check_admissible(complex, cfg.params.c0, N, tess.d), "|T| >= c0 N^d");
  });
  suite.check("boundary inequality", [&] {
    return verdict(boundary_inequality(complex, star, consts), "|dP| >= |P| - sum gamma |T| >= 0");
  });
  suite.check("order parameter", [&] {
    DeformationField field = build_deformation(complex, tess);
    OrderParameter op = order_parameter(field);
    double glue = gluing_defect(complex, tess);
    return verdict(op.value <= 1e-12 && glue <= 1e-12,
                   "value " + format_double(op.value) + ", gluing " + format_double(glue));
  });

  suite.check("rigidity zero cases", [&] {
    std::mt19937_64 rng(seed);
    RasterDomain dom = RasterDomain::square(2, 1.0);
    FieldParams fp;
    RasterField rot = make_field(FieldKind::constant_rotation, dom, 16.0, fp, rng);
    GapReport g = rigidity_gap(rot, 2.0);
    RasterField grad = make_field(FieldKind::gradient, dom, 16.0, fp, rng);
    double dV = discrete_d(grad, 2.0).max_abs();
    bool pass = g.lhs <= 1e-12 && g.rhs1 <= 1e-12 && g.rhs2 <= 1e-12 && dV <= 1e-12;
    return verdict(pass, "rotation gap (" + format_double(g.lhs) + ", " + format_double(g.rhs1) + ", " +
                             format_double(g.rhs2) + "), curl of gradient " + format_double(dV));
  });

  const std::uint64_t steps = std::min<std::uint64_t>(cfg.sampler.steps, 2000);
  SamplerParams sp = make_sampler_params(cfg);
  sp.log_transitions = true;
  sp.validate_every = std::min(cfg.sampler.validate_every, 100);
  auto sampler_check = [&](const ModelParams& params) {
    Chain chain(tess, params, phi, sp, star, seed, 0);
    double worst = 0.0;
    for (std::uint64_t s = 0; s < steps; ++s) {
      chain.step();
      if (!chain.boundary_inequality()) return std::string("FAIL boundary inequality at step ") + std::to_string(s);
    }
    chain.validate();
    for (const auto& t : chain.transitions())
      worst = std::max(worst, std::abs(t.log_forward - t.log_reverse) / (1.0 + std::abs(t.log_forward)));
    return verdict(worst <= 1e-10, std::to_string(chain.transitions().size()) + " transitions, worst balance " +
                                       format_double(worst) + ", max cache error " +
                                       format_double(chain.max_validation_error()));
  };
  suite.check("sampler validation and detailed balance", [&] { return sampler_check(cfg.params); });
  ModelParams mobile = cfg.params;
  mobile.sigma = 0.1;
  mobile.m = 0.0;
  suite.check("sampler detailed balance, mobile regime (sigma 0.1, m 0)", [&] { return sampler_check(mobile); });
  suite.check("determinism", [&] {
    SamplerParams plain = make_sampler_params(cfg);
    auto a = run_chain(tess, cfg.params, phi, plain, star, 600, 100, 5, seed, 0);
    auto b = run_chain(tess, cfg.params, phi, plain, star, 600, 100, 5, seed, 0);
    return verdict(trace_csv(a.records) == trace_csv(b.records), "identical traces for equal seeds");
  });
  suite.check("local bound", [&] {
    std::mt19937_64 rng(cfg.constants.seed);
    LocalBoundFit fit = verify_local_bound(tess, phi, cfg.params.ell, cfg.params.eps, cfg.constants.samples, rng);
    return verdict(fit.c1 > 0.0 && fit.violations == 0, "c1 " + format_double(fit.c1) + ", c2 " +
                                                            format_double(fit.c2) + ", " +
                                                            std::to_string(fit.violations) + " violations");
  });

  json j;
  j["checks"] = suite.results();
  j["failures"] = suite.failures();
  run.write("verify.json", j);
  if (suite.failures() > 0) throw InvariantViolation(std::to_string(suite.failures()) + " invariant checks failed");
  return ok;
}

}  // namespace
}  // namespace crystal::cli

int main(int argc, char** argv) {
  using namespace crystal::cli;
  CLI::App app{"Crystallization model: extraction, sampling and rigidity experiments"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out;

  std::map<std::string, std::function<int(Run&)>> commands{
      {"simulate", cmd_simulate}, {"extract", cmd_extract},   {"rigidity", cmd_rigidity},
      {"constants", cmd_constants}, {"verify", cmd_verify}};
  std::map<std::string, std::string> help{
      {"simulate", "Run Metropolis-Hastings chains; writes chain CSVs and summary.json"},
      {"extract", "Extract the crystal from a point CSV; writes complex.json"},
      {"rigidity", "Rigidity ensemble, constant fits, scaling and sharpness; writes gap_reports.csv and scaling_fit.json"},
      {"constants", "Tessellation constants, m0 and the local-bound fit; writes constants.json"},
      {"verify", "Run the invariant suite; exit 3 on any violation"}};
  std::vector<CLI::Option*> seed_opts, thread_opts, out_opts;
  for (const auto& [name, fn] : commands) {
    auto* sub = app.add_subcommand(name, help[name]);
    sub->add_option("--config", opt.config, "INI config or manifest.json")->required();
    seed_opts.push_back(sub->add_option("--seed", seed, "Master seed"));
    thread_opts.push_back(sub->add_option("--threads", threads, "Worker cap"));
    out_opts.push_back(sub->add_option("--out", out, "Output directory"));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return config_error;
  }
  auto given = [](const std::vector<CLI::Option*>& v) {
    return std::any_of(v.begin(), v.end(), [](CLI::Option* o) { return o->count() > 0; });
  };
  if (given(seed_opts)) opt.seed = seed;
  if (given(thread_opts)) opt.threads = threads;
  if (given(out_opts)) opt.out = out;

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    Run run(name, opt);
    int code = ok;
    try {
      code = commands[name](run);
    } catch (const InvariantViolation&) {
      run.finish();
      throw;
    }
    run.finish();
    return code;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return config_error;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return config_error;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return invariant_violation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return config_error;
  }
}
