#include "crystal/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace crystal {

namespace {

std::mt19937_64 chain_rng(std::uint64_t master, std::uint64_t chain) {
  std::seed_seq seq{std::uint32_t(master), std::uint32_t(master >> 32), std::uint32_t(chain),
                    std::uint32_t(chain >> 32)};
  return std::mt19937_64(seq);
}

double log_gaussian(const Vec& delta, double s) {
  const double d = double(delta.size());
  return -0.5 * delta.squaredNorm() / (s * s) - d * std::log(s * std::sqrt(2.0 * M_PI));
}

}  // namespace

double move_probability(const SamplerParams& sp, MoveType type, int n) {
  const double total = sp.p_birth + sp.p_death + sp.p_displace;
  if (n == 0) return type == MoveType::birth ? 1.0 : 0.0;
  switch (type) {
    case MoveType::birth: return sp.p_birth / total;
    case MoveType::death: return sp.p_death / total;
    case MoveType::displace: return sp.p_displace / total;
  }
  return 0.0;
}

double acceptance_ratio(const SamplerParams& sp, MoveType type, int n, double volume, double beta, double H_from,
                        double H_to) {
  double log_r = -beta * (H_to - H_from);
  switch (type) {
    case MoveType::birth:
      log_r += std::log(volume / double(n + 1)) + std::log(move_probability(sp, MoveType::death, n + 1)) -
               std::log(move_probability(sp, MoveType::birth, n));
      break;
    case MoveType::death:
      log_r += std::log(double(n) / volume) + std::log(move_probability(sp, MoveType::birth, n - 1)) -
               std::log(move_probability(sp, MoveType::death, n));
      break;
    case MoveType::displace: break;
  }
  return log_r >= 0.0 ? 1.0 : std::exp(log_r);
}

Chain::Chain(const Tessellation& tess, const ModelParams& params, const Potential& phi, const SamplerParams& sp,
             PointConfig initial, std::uint64_t master_seed, std::uint64_t chain_index)
    : tess_(tess),
      params_(params),
      phi_(phi),
      sp_(sp),
      consts_(compute_constants(tess)),
      P_(std::move(initial)),
      rng_(chain_rng(master_seed, chain_index)) {
  if (sp_.displacement <= 0.0) sp_.displacement = params_.eps / 2.0;
  omega_min_ = params_.c0 * std::pow(double(P_.dom.N), double(P_.dom.d));
  cands_ = CandidateSet(P_, tess_, params_.eps);
  complex_ = extract_crystal(cands_, P_, tess_, params_.extraction());
  if (!in_omega(complex_)) throw std::invalid_argument("initial configuration is not in Omega (|T| < c0 N^d)");
  H_ = energy_of(complex_);
  PointConfig star = standard_configuration(tess_, P_.dom.N);
  H_ref_ = total_hamiltonian(extract(star, tess_, params_.extraction()), star, tess_, params_, phi_, sp_.variant);
}

double Chain::energy_of(const TileComplex& cx) const {
  return total_hamiltonian(cx, P_, tess_, params_, phi_, sp_.variant);
}

bool Chain::in_omega(const TileComplex& cx) const { return double(cx.size()) >= omega_min_; }

Proposal Chain::propose() {
  const int n = P_.size();
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double total = sp_.p_birth + sp_.p_death + sp_.p_displace;
  double u = u01(rng_) * total;
  Proposal p;
  p.type = u < sp_.p_birth ? MoveType::birth : (u < sp_.p_birth + sp_.p_death ? MoveType::death : MoveType::displace);
  if (n == 0) p.type = MoveType::birth;
  const int d = P_.dom.d;
  if (p.type == MoveType::birth) {
    Vec f(d);
    for (int k = 0; k < d; ++k) f(k) = u01(rng_);
    p.point = P_.dom.wrap(P_.dom.from_fractional(f));
  } else {
    std::uniform_int_distribution<int> pick(0, n - 1);
    p.index = pick(rng_);
    if (p.type == MoveType::displace) {
      std::normal_distribution<double> g(0.0, sp_.displacement);
      Vec step(d);
      for (int k = 0; k < d; ++k) step(k) = g(rng_);
      p.point = P_.dom.wrap(P_.points[p.index] + step);
    }
  }
  return p;
}

bool Chain::step(const Proposal& prop) {
  ++step_;
  const int n = P_.size();
  const int t = int(prop.type);
  ++proposed_[t];
  const int j = prop.index;
  Vec saved;
  cands_.begin_edit();
  switch (prop.type) {
    case MoveType::birth:
      P_.points.push_back(prop.point);
      cands_.refresh_point(P_, n);
      break;
    case MoveType::death:
      saved = P_.points[j];
      P_.points[j] = P_.points.back();
      P_.points.pop_back();
      cands_.swap_remove(P_, j, n - 1);
      break;
    case MoveType::displace:
      saved = P_.points[j];
      P_.points[j] = prop.point;
      cands_.refresh_point(P_, j);
      break;
  }

  TileComplex cx = extract_crystal(cands_, P_, tess_, params_.extraction());
  const bool ok = in_omega(cx);
  const double H_new = ok ? energy_of(cx) : INFINITY;
  const double volume = P_.dom.volume();
  const double alpha = ok ? acceptance_ratio(sp_, prop.type, n, volume, params_.beta, H_, H_new) : 0.0;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const bool accept = u01(rng_) < alpha;

  if (accept) {
    if (sp_.log_transitions && int(log_.size()) < sp_.max_logged) {
      Transition tr{prop.type, n, H_, H_new, 0.0, 0.0};
      double q_fwd = 0.0, q_rev = 0.0;
      MoveType rev = prop.type;
      int n_to = n;
      switch (prop.type) {
        case MoveType::birth:
          q_fwd = std::log(move_probability(sp_, MoveType::birth, n) / volume);
          q_rev = std::log(move_probability(sp_, MoveType::death, n + 1) / double(n + 1));
          rev = MoveType::death;
          n_to = n + 1;
          break;
        case MoveType::death:
          q_fwd = std::log(move_probability(sp_, MoveType::death, n) / double(n));
          q_rev = std::log(move_probability(sp_, MoveType::birth, n - 1) / volume);
          rev = MoveType::birth;
          n_to = n - 1;
          break;
        case MoveType::displace: {
          double g = log_gaussian(minimal_image(saved, prop.point, P_.dom), sp_.displacement);
          q_fwd = std::log(move_probability(sp_, MoveType::displace, n) / double(n)) + g;
          q_rev = q_fwd;
          break;
        }
      }
      double a_rev = acceptance_ratio(sp_, rev, n_to, volume, params_.beta, H_new, H_);
      tr.log_forward = -params_.beta * H_ + q_fwd + std::log(alpha);
      tr.log_reverse = -params_.beta * H_new + q_rev + std::log(a_rev);
      log_.push_back(tr);
    }
    complex_ = std::move(cx);
    H_ = H_new;
    ++accepted_[t];
  } else {
    switch (prop.type) {
      case MoveType::birth: P_.points.pop_back(); break;
      case MoveType::death:
        if (j == n - 1) {
          P_.points.push_back(saved);
        } else {
          P_.points.push_back(P_.points[j]);
          P_.points[j] = saved;
        }
        break;
      case MoveType::displace: P_.points[j] = saved; break;
    }
    cands_.rollback();
  }
  if (sp_.validate_every > 0 && step_ % std::uint64_t(sp_.validate_every) == 0) validate();
  return accept;
}

void Chain::validate() const {
  TileComplex fresh = extract(P_, tess_, params_.extraction());
  bool same = fresh.size() == complex_.size() && fresh.surface_points == complex_.surface_points;
  for (int t = 0; same && t < fresh.size(); ++t)
    same = fresh.tiles[t].corners == complex_.tiles[t].corners && fresh.tiles[t].type_id == complex_.tiles[t].type_id &&
           fresh.tiles[t].placement == complex_.tiles[t].placement;
  if (!same) throw std::runtime_error("sampler: incremental extraction differs from fresh extraction at step " +
                                      std::to_string(step_));
  double H = total_hamiltonian(fresh, P_, tess_, params_, phi_, sp_.variant);
  double err = std::abs(H - H_);
  max_validation_error_ = std::max(max_validation_error_, err);
  if (err > 1e-8)
    throw std::runtime_error("sampler: cached H drifted by " + std::to_string(err) + " at step " +
                             std::to_string(step_));
}

bool Chain::boundary_inequality() const { return crystal::boundary_inequality(complex_, P_, consts_); }

ObservableRecord Chain::observe() const {
  ObservableRecord r;
  r.step = step_;
  r.n_points = P_.size();
  r.n_tiles = complex_.size();
  r.n_surface = int(complex_.surface_points.size());
  if (complex_.size() > 0) {
    r.order_param = order_parameter(build_deformation(complex_, tess_)).value;
    r.energy_gap_per_tile = (H_ - H_ref_) / double(complex_.size());
  }
  auto rate = [&](int k) { return proposed_[k] ? double(accepted_[k]) / double(proposed_[k]) : 0.0; };
  r.acc_birth = rate(0);
  r.acc_death = rate(1);
  r.acc_disp = rate(2);
  return r;
}

ChainResult run_chain(const Tessellation& tess, const ModelParams& params, const Potential& phi,
                      const SamplerParams& sp, const PointConfig& initial, std::uint64_t steps,
                      std::uint64_t burn_in, std::uint64_t thin, std::uint64_t master_seed,
                      std::uint64_t chain_index) {
  if (steps <= burn_in) throw std::invalid_argument("run_chain: steps must exceed burn_in");
  if (thin == 0) thin = 1;
  Chain chain(tess, params, phi, sp, initial, master_seed, chain_index);
  ChainResult res;
  res.master_seed = master_seed;
  res.chain_index = chain_index;
  for (std::uint64_t s = 1; s <= steps; ++s) {
    chain.step();
    if (s > burn_in && (s - burn_in) % thin == 0) {
      if (!chain.boundary_inequality())
        throw std::runtime_error("sampler: boundary inequality violated at step " + std::to_string(s));
      res.records.push_back(chain.observe());
    }
  }
  chain.validate();
  std::vector<double> op;
  for (const auto& r : res.records) op.push_back(r.order_param);
  res.autocorrelation_time = integrated_autocorrelation_time(op);
  res.max_validation_error = chain.max_validation_error();
  res.transitions = chain.transitions();
  return res;
}

std::vector<ChainResult> run_chains(const Tessellation& tess, const ModelParams& params, const Potential& phi,
                                    const SamplerParams& sp, const PointConfig& initial, std::uint64_t steps,
                                    std::uint64_t burn_in, std::uint64_t thin, std::uint64_t master_seed,
                                    int chains, int threads) {
  std::vector<ChainResult> out(chains);
  std::vector<std::exception_ptr> errors(chains);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int c = next++; c < chains; c = next++) {
      try {
        out[c] = run_chain(tess, params, phi, sp, initial, steps, burn_in, thin, master_seed, std::uint64_t(c));
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const int nw = std::max(1, std::min(threads, chains));
  std::vector<std::thread> pool;
  for (int w = 1; w < nw; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

double integrated_autocorrelation_time(const std::vector<double>& x) {
  const size_t n = x.size();
  if (n < 2) return 1.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= double(n);
  double c0 = 0.0;
  for (double v : x) c0 += (v - mean) * (v - mean);
  c0 /= double(n);
  if (!(c0 > 0.0)) return 1.0;
  double tau = 1.0;
  for (size_t t = 1; t < n; ++t) {
    double c = 0.0;
    for (size_t i = 0; i + t < n; ++i) c += (x[i] - mean) * (x[i + t] - mean);
    c /= double(n);
    tau += 2.0 * c / c0;
    if (double(t) >= 5.0 * tau) break;
  }
  return std::max(tau, 1e-12);
}

std::string trace_csv(const std::vector<ObservableRecord>& records) {
  std::ostringstream os;
  os << "step,order_param,energy_gap_per_tile,n_points,n_tiles,n_surface,acc_birth,acc_death,acc_disp\n";
  char buf[512];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%llu,%.17g,%.17g,%d,%d,%d,%.17g,%.17g,%.17g\n", (unsigned long long)r.step,
                  r.order_param, r.energy_gap_per_tile, r.n_points, r.n_tiles, r.n_surface, r.acc_birth, r.acc_death,
                  r.acc_disp);
    os << buf;
  }
  return os.str();
}

}  // namespace crystal
