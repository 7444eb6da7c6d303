#pragma once

#include "crystal/deformation.hpp"
#include "crystal/energetics.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace crystal {

enum class MoveType { birth = 0, death = 1, displace = 2 };

struct SamplerParams {
  double p_birth = 0.25;
  double p_death = 0.25;
  double p_displace = 0.5;
  double displacement = -1.0;  ///< Gaussian step std; negative means eps/2
  int validate_every = 1000;
  bool log_transitions = false;
  int max_logged = 100000;
  HamiltonianVariant variant = HamiltonianVariant::plain;
};

struct Proposal {
  MoveType type = MoveType::birth;
  int index = -1;  ///< death / displace target
  Vec point;       ///< birth / displace destination
};

struct Transition {
  MoveType type;
  int n_from;
  double H_from, H_to;
  double log_forward;  ///< log(pi(x) q(x->y) alpha(x->y))
  double log_reverse;  ///< log(pi(y) q(y->x) alpha(y->x))
};

struct ObservableRecord {
  std::uint64_t step = 0;
  double order_param = 0.0;
  double energy_gap_per_tile = 0.0;
  int n_points = 0, n_tiles = 0, n_surface = 0;
  double acc_birth = 0.0, acc_death = 0.0, acc_disp = 0.0;
};

/// Effective move-type probabilities at n points (death and displacement fold into birth on empty configurations).
double move_probability(const SamplerParams& sp, MoveType type, int n);

/// Metropolis-Hastings ratio for a move from n points with energies H_from -> H_to.
double acceptance_ratio(const SamplerParams& sp, MoveType type, int n, double volume, double beta, double H_from,
                        double H_to);

class Chain {
 public:
  Chain(const Tessellation& tess, const ModelParams& params, const Potential& phi, const SamplerParams& sp,
        PointConfig initial, std::uint64_t master_seed, std::uint64_t chain_index);

  Proposal propose();
  bool step(const Proposal& prop);
  bool step() { return step(propose()); }

  ObservableRecord observe() const;
  /// Fresh extraction and energy; throws std::runtime_error on mismatch with the cached state.
  void validate() const;
  /// |dP| >= |P| - sum gamma_i |T^i| >= 0
  bool boundary_inequality() const;

  const PointConfig& config() const { return P_; }
  const TileComplex& complex() const { return complex_; }
  double energy() const { return H_; }
  double reference_energy() const { return H_ref_; }
  std::uint64_t steps() const { return step_; }
  const std::vector<Transition>& transitions() const { return log_; }
  double max_validation_error() const { return max_validation_error_; }

 private:
  double energy_of(const TileComplex& cx) const;
  bool in_omega(const TileComplex& cx) const;

  const Tessellation& tess_;
  ModelParams params_;
  Potential phi_;
  SamplerParams sp_;
  TessellationConstants consts_;
  PointConfig P_;
  CandidateSet cands_;
  TileComplex complex_;
  double H_ = 0.0;
  double H_ref_ = 0.0;
  double omega_min_ = 0.0;
  std::mt19937_64 rng_;
  std::uint64_t step_ = 0;
  std::uint64_t proposed_[3] = {0, 0, 0};
  std::uint64_t accepted_[3] = {0, 0, 0};
  std::vector<Transition> log_;
  mutable double max_validation_error_ = 0.0;
};

struct ChainResult {
  std::uint64_t master_seed = 0;
  std::uint64_t chain_index = 0;
  std::vector<ObservableRecord> records;
  double autocorrelation_time = 0.0;
  double max_validation_error = 0.0;
  std::vector<Transition> transitions;
};

ChainResult run_chain(const Tessellation& tess, const ModelParams& params, const Potential& phi,
                      const SamplerParams& sp, const PointConfig& initial, std::uint64_t steps,
                      std::uint64_t burn_in, std::uint64_t thin, std::uint64_t master_seed,
                      std::uint64_t chain_index = 0);

/// Independent chains on up to `threads` workers, merged by chain index.
std::vector<ChainResult> run_chains(const Tessellation& tess, const ModelParams& params, const Potential& phi,
                                    const SamplerParams& sp, const PointConfig& initial, std::uint64_t steps,
                                    std::uint64_t burn_in, std::uint64_t thin, std::uint64_t master_seed,
                                    int chains, int threads);

/// Integrated autocorrelation time with Sokal's self-consistent window (c = 5).
double integrated_autocorrelation_time(const std::vector<double>& x);

std::string trace_csv(const std::vector<ObservableRecord>& records);

}  // namespace crystal
