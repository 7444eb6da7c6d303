#include "crystal/sampler.hpp"

#include <doctest.h>

#include <cmath>

using namespace crystal;

namespace {

ModelParams mobile() {
  ModelParams mp;
  mp.sigma = 0.1;
  mp.m = 0.0;
  mp.beta = 5.0;
  return mp;
}

/// Independent Metropolis-Hastings bookkeeping: log of pi(x) q(x->y) alpha(x->y) and of the reverse.
std::pair<double, double> balance_terms(const Transition& t, const SamplerParams& sp, double beta, double volume) {
  const double pb = sp.p_birth, pd = sp.p_death, pm = sp.p_displace, tot = pb + pd + pm;
  auto prob = [&](MoveType m, int n) {
    if (n == 0) return m == MoveType::birth ? 1.0 : 0.0;
    return (m == MoveType::birth ? pb : m == MoveType::death ? pd : pm) / tot;
  };
  const int n = t.n_from;
  double q_fwd = 0.0, q_rev = 0.0;
  switch (t.type) {
    case MoveType::birth:
      q_fwd = prob(MoveType::birth, n) / volume;
      q_rev = prob(MoveType::death, n + 1) / (n + 1);
      break;
    case MoveType::death:
      q_fwd = prob(MoveType::death, n) / n;
      q_rev = prob(MoveType::birth, n - 1) / volume;
      break;
    case MoveType::displace:
      q_fwd = q_rev = 1.0;  // symmetric Gaussian kernel cancels
      break;
  }
  const double pi_x = -beta * t.H_from, pi_y = -beta * t.H_to;
  const double log_ratio = pi_y + std::log(q_rev) - pi_x - std::log(q_fwd);
  const double a_fwd = std::min(0.0, log_ratio), a_rev = std::min(0.0, -log_ratio);
  return {pi_x + std::log(q_fwd) + a_fwd, pi_y + std::log(q_rev) + a_rev};
}

}  // namespace

TEST_CASE("move probabilities fold into birth on the empty configuration") {
  SamplerParams sp;
  CHECK(move_probability(sp, MoveType::birth, 0) == 1.0);
  CHECK(move_probability(sp, MoveType::death, 0) == 0.0);
  CHECK(move_probability(sp, MoveType::displace, 5) == doctest::Approx(0.5));
}

TEST_CASE("acceptance ratio against a hand formula") {
  SamplerParams sp;
  const double V = 13.856, beta = 2.0;
  const double birth = acceptance_ratio(sp, MoveType::birth, 10, V, beta, 1.0, 1.5);
  CHECK(birth == doctest::Approx(std::min(1.0, std::exp(-beta * 0.5) * V / 11.0)));
  const double death = acceptance_ratio(sp, MoveType::death, 10, V, beta, 1.0, 1.5);
  CHECK(death == doctest::Approx(std::min(1.0, std::exp(-beta * 0.5) * 10.0 / V)));
  const double disp = acceptance_ratio(sp, MoveType::displace, 10, V, beta, 1.0, 1.5);
  CHECK(disp == doctest::Approx(std::exp(-1.0)));
  const double from_empty = acceptance_ratio(sp, MoveType::birth, 0, V, beta, 0.0, 0.0);
  CHECK(from_empty == doctest::Approx(std::min(1.0, V * 0.25)));
}

TEST_CASE("proposal frequencies") {
  Tessellation tess = build_triangular(1.0);
  Chain chain(tess, mobile(), quadratic_potential(0.25), SamplerParams{}, standard_configuration(tess, 4), 3, 0);
  const int n = 100000;
  int counts[3] = {0, 0, 0};
  for (int k = 0; k < n; ++k) ++counts[int(chain.propose().type)];
  const double expect[3] = {0.25, 0.25, 0.5};
  for (int t = 0; t < 3; ++t) {
    const double sd = std::sqrt(n * expect[t] * (1 - expect[t]));
    CHECK(std::abs(counts[t] - n * expect[t]) <= 3 * sd);
  }
}

TEST_CASE("detailed balance on logged transitions") {
  Tessellation tess = build_triangular(1.0);
  SamplerParams sp;
  sp.log_transitions = true;
  sp.validate_every = 100;
  ModelParams mp = mobile();
  Chain chain(tess, mp, quadratic_potential(0.25), sp, standard_configuration(tess, 4), 11, 0);
  for (int s = 0; s < 3000; ++s) chain.step();
  REQUIRE(chain.transitions().size() >= 500);
  const double volume = chain.config().dom.volume();
  for (const auto& t : chain.transitions()) {
    auto [fwd, rev] = balance_terms(t, sp, mp.beta, volume);
    CHECK(std::abs(fwd - rev) <= 1e-10 * (1.0 + std::abs(fwd)));
    if (t.type != MoveType::displace) CHECK(std::abs(t.log_forward - fwd) <= 1e-10 * (1.0 + std::abs(fwd)));
  }
}

TEST_CASE("cached state agrees with fresh extraction at every checkpoint") {
  Tessellation tess = build_triangular(1.0);
  SamplerParams sp;
  sp.validate_every = 25;
  Chain chain(tess, mobile(), quadratic_potential(0.25), sp, standard_configuration(tess, 4), 5, 1);
  CHECK_NOTHROW(for (int s = 0; s < 2000; ++s) chain.step());
  CHECK(chain.max_validation_error() <= 1e-8);
  CHECK(chain.boundary_inequality());
}

TEST_CASE("identical seeds give identical traces, different chains differ") {
  Tessellation tess = build_triangular(1.0);
  Potential phi = quadratic_potential(0.25);
  PointConfig init = standard_configuration(tess, 4);
  auto a = run_chain(tess, mobile(), phi, SamplerParams{}, init, 1500, 500, 10, 7, 0);
  auto b = run_chain(tess, mobile(), phi, SamplerParams{}, init, 1500, 500, 10, 7, 0);
  auto c = run_chain(tess, mobile(), phi, SamplerParams{}, init, 1500, 500, 10, 7, 1);
  CHECK(trace_csv(a.records) == trace_csv(b.records));
  CHECK(trace_csv(a.records) != trace_csv(c.records));
  auto multi = run_chains(tess, mobile(), phi, SamplerParams{}, init, 1500, 500, 10, 7, 2, 2);
  CHECK(trace_csv(multi[0].records) == trace_csv(a.records));
  CHECK(trace_csv(multi[1].records) == trace_csv(c.records));
}

TEST_CASE("trace CSV header and precision") {
  ObservableRecord r;
  r.step = 10;
  r.order_param = 1.0 / 3.0;
  std::string csv = trace_csv({r});
  CHECK(csv.rfind("step,order_param,energy_gap_per_tile,n_points,n_tiles,n_surface,acc_birth,acc_death,acc_disp\n", 0) == 0);
  CHECK(csv.find("0.33333333333333331") != std::string::npos);
}

TEST_CASE("low temperature freezes the standard configuration") {
  Tessellation tess = build_triangular(1.0);
  ModelParams mp;
  mp.beta = 1000.0;
  auto res = run_chain(tess, mp, quadratic_potential(0.25), SamplerParams{}, standard_configuration(tess, 4), 10000,
                       1000, 10, 1, 0);
  double mean = 0.0;
  for (const auto& r : res.records) mean += r.order_param;
  CHECK(mean / res.records.size() < 1e-3);
}

TEST_CASE("high temperature accepts most displacements") {
  Tessellation tess = build_triangular(1.0);
  ModelParams mp = mobile();
  mp.beta = 0.1;
  auto res = run_chain(tess, mp, quadratic_potential(0.25), SamplerParams{}, standard_configuration(tess, 4), 3000,
                       500, 10, 2, 0);
  CHECK(res.records.back().acc_disp > 0.5);
}

TEST_CASE("integrated autocorrelation time") {
  std::vector<double> white;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int k = 0; k < 20000; ++k) white.push_back(g(rng));
  CHECK(integrated_autocorrelation_time(white) == doctest::Approx(1.0).epsilon(0.15));
  std::vector<double> ar(20000);
  const double rho = 0.8;
  for (int k = 1; k < 20000; ++k) ar[k] = rho * ar[k - 1] + g(rng);
  CHECK(integrated_autocorrelation_time(ar) == doctest::Approx((1 + rho) / (1 - rho)).epsilon(0.25));
}

TEST_CASE("initial configuration outside Omega is rejected") {
  Tessellation tess = build_triangular(1.0);
  PointConfig empty{TorusDomain(4, tess.cell), {}};
  CHECK_THROWS_AS(Chain(tess, mobile(), quadratic_potential(0.25), SamplerParams{}, empty, 1, 0), std::invalid_argument);
}
