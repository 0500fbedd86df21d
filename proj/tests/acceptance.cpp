// Acceptance gate: one line per criterion, [PASS]/[FAIL], exit 0 iff all pass.
//
// Each criterion is self-contained and seeds its own RNGs, so the binary is
// deterministic end to end. Oracles used here are independent of the library
// code under test: long-double closed forms for the calculators, an exact
// occupancy DP for exploration probabilities, enumeration for expectations.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rankgrad/envs.hpp"
#include "rankgrad/gradients.hpp"
#include "rankgrad/harness.hpp"
#include "rankgrad/model.hpp"
#include "rankgrad/offpolicy.hpp"
#include "rankgrad/policy.hpp"
#include "rankgrad/theory.hpp"

namespace {

using namespace rankgrad;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::filesystem::path scratch_dir(const std::string& leaf) {
  auto p = std::filesystem::temp_directory_path() / "rankgrad_acceptance" / leaf;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// ---------------------------------------------------------------------------
// C1: analytic gradients of all five estimators match central finite
// differences on tabular, linear, and MLP models across random draws.
// ---------------------------------------------------------------------------
bool c1_gradient_correctness(std::string& detail) {
  const auto t0 = Clock::now();
  const std::uint32_t states = 6;
  const std::uint32_t actions = 3;
  const std::vector<LossKind> kinds = {LossKind::rpg, LossKind::rpg_exact, LossKind::lpg,
                                       LossKind::hinge, LossKind::xent};
  double worst = 0.0;
  std::size_t excluded = 0;
  std::size_t checked = 0;
  bool ok = true;
  for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
    const LossKind kind = kinds[ki];
    for (int draw = 0; draw < 100; ++draw) {
      std::mt19937_64 rng(1000 * (ki + 1) + static_cast<std::uint64_t>(draw));
      ModelArch arch;
      arch.input_dim = states;
      arch.actions = actions;
      switch (draw % 3) {
        case 0: arch.kind = ModelKind::tabular; break;
        case 1: arch.kind = ModelKind::linear; break;
        default:
          arch.kind = ModelKind::mlp;
          arch.hidden = {5};
          break;
      }
      LambdaModel model = LambdaModel::random_init(arch, rng(), 0.5);
      std::uniform_int_distribution<std::uint32_t> pick_state(0, states - 1);
      std::uniform_int_distribution<std::uint32_t> pick_action(0, actions - 1);
      std::uniform_real_distribution<double> pick_reward(0.1, 2.0);
      LossClosure closure;
      if (kind == LossKind::hinge || kind == LossKind::xent) {
        std::vector<SupervisedExample> batch;
        const std::size_t n = 1 + rng() % 5;
        for (std::size_t i = 0; i < n; ++i) batch.push_back({pick_state(rng), pick_action(rng)});
        closure = supervised_loss_closure(kind, std::move(batch), 1.0);
      } else {
        Trajectory traj;
        const std::size_t len = 1 + rng() % 4;
        for (std::size_t t = 0; t < len; ++t)
          traj.push(pick_state(rng), pick_action(rng), pick_reward(rng));
        closure = trajectory_loss_closure(kind, std::move(traj));
      }
      const FiniteDiffReport rep = finite_difference_check(model, closure, 1e-4);
      if (rep.kink_excluded) {
        ++excluded;
        continue;
      }
      ++checked;
      if (!rep.pass) ok = false;
      worst = std::max(worst, rep.max_rel_error);
    }
  }
  const double secs = seconds_since(t0);
  ok = ok && worst < 1e-4 && secs < 120.0;
  detail = "max rel err " + fmt(worst) + " over " + std::to_string(checked) + " draws (" +
           std::to_string(excluded) + " kink-excluded), " + fmt(secs) + "s";
  return ok;
}

// ---------------------------------------------------------------------------
// C2: listwise probabilities normalize for m in 2..10; pairwise m=2
// normalizes exactly; pairwise m=3 with equal scores is uniform 1/4 with a
// 1/4 dummy.
// ---------------------------------------------------------------------------
bool c2_policy_normalization(std::string& detail) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> wide(-30.0, 30.0);
  double worst_listwise = 0.0;
  for (std::uint32_t m = 2; m <= 10; ++m) {
    for (int i = 0; i < 1000; ++i) {
      std::vector<double> lam(m);
      for (double& v : lam) v = wide(rng);
      const std::vector<double> p = listwise_probs(lam);
      double sum = 0.0;
      for (double v : p) sum += v;
      worst_listwise = std::max(worst_listwise, std::abs(sum - 1.0));
    }
  }
  std::uniform_real_distribution<double> mid(-20.0, 20.0);
  double worst_pairwise = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> lam = {mid(rng), mid(rng)};
    const std::vector<double> p = pairwise_action_probs(lam);
    worst_pairwise = std::max(worst_pairwise, std::abs(p[0] + p[1] - 1.0));
  }
  std::uniform_real_distribution<double> small(-5.0, 5.0);
  double worst_equal = 0.0;
  bool shape_ok = true;
  for (int i = 0; i < 100; ++i) {
    const double c = small(rng);
    const std::vector<double> p = pairwise_action_probs(std::vector<double>{c, c, c}, true);
    shape_ok = shape_ok && p.size() == 4;
    for (double v : p) worst_equal = std::max(worst_equal, std::abs(v - 0.25));
  }
  const bool ok = shape_ok && worst_listwise <= 1e-12 && worst_pairwise <= 1e-12 &&
                  worst_equal <= 1e-12;
  detail = "listwise |sum-1| " + fmt(worst_listwise) + ", pairwise m=2 " + fmt(worst_pairwise) +
           ", equal-score m=3 dev " + fmt(worst_equal);
  return ok;
}

// ---------------------------------------------------------------------------
// C3: the sampled listwise policy-gradient estimator is unbiased — its Monte
// Carlo mean over 1e5 trajectories matches the enumerated expectation per
// coordinate within three standard errors.
// ---------------------------------------------------------------------------
bool c3_estimator_unbiasedness(std::string& detail) {
  const auto t0 = Clock::now();
  const MdpSpec spec = make_env("tree:T=3,roots=1,opt=5,rewards=3,1,4,1,5,9,2,6");
  ModelArch arch;
  arch.kind = ModelKind::tabular;
  arch.input_dim = spec.state_count;
  arch.actions = spec.max_actions;
  const LambdaModel model = LambdaModel::random_init(arch, 303, 0.4);
  const AnyPolicy pol = ListwisePolicy{&model, 1.0};

  std::vector<double> exact(model.param_count(), 0.0);
  for (const EnumeratedTrajectory& et : enumerate_trajectories(spec)) {
    const double w = et.dynamics_prob * policy_path_prob(pol, et.traj);
    const GradEstimate g = lpg_trajectory_grad(model, et.traj);
    for (std::size_t c = 0; c < exact.size(); ++c) exact[c] += w * g.grad.values[c];
  }

  const std::size_t n = 100000;
  VarianceAccumulator acc(model.param_count());
  EnvState env(spec, 404);
  for (std::size_t i = 0; i < n; ++i) {
    env.reset();
    const Trajectory traj = rollout(spec, pol, SelectMode::sample, env);
    acc.add(lpg_trajectory_grad(model, traj).grad.values);
  }
  const std::vector<double> var = acc.variance();
  const std::vector<double>& mean = acc.mean();
  bool ok = true;
  double worst_z = 0.0;
  for (std::size_t c = 0; c < exact.size(); ++c) {
    const double se = std::sqrt(var[c] / static_cast<double>(n));
    const double diff = std::abs(mean[c] - exact[c]);
    if (se > 0.0) {
      worst_z = std::max(worst_z, diff / se);
      if (diff > 3.0 * se) ok = false;
    } else if (diff > 1e-12) {
      ok = false;
    }
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 60.0;
  detail = "worst |mean-exact|/SE " + fmt(worst_z) + " over " +
           std::to_string(exact.size()) + " coords, " + fmt(secs) + "s";
  return ok;
}

// ---------------------------------------------------------------------------
// C4: exact exploration-efficiency probabilities match Monte Carlo at 2e5
// replicates across the (N, |opt|, i, k) grid, and the i=1 case equals the
// closed form 1 - ((N-|opt|)/N)^k.
// ---------------------------------------------------------------------------
bool c4_exploration_efficiency(std::string& detail) {
  const auto t0 = Clock::now();
  const std::size_t replicates = 200000;
  double worst_gap = 0.0;
  double worst_i1 = 0.0;
  bool ok = true;
  std::uint64_t seed = 4000;
  for (std::uint64_t N : {4ull, 8ull, 16ull}) {
    for (std::uint64_t opt : {1ull, 2ull, 3ull}) {
      for (std::uint64_t k : {1ull, 5ull, 10ull, 20ull}) {
        const std::vector<std::uint32_t> counts =
            simulate_distinct_optimal_counts(N, opt, k, replicates, ++seed);
        for (std::uint64_t i : {1ull, 2ull}) {
          std::size_t hits = 0;
          for (std::uint32_t c : counts)
            if (c >= i) ++hits;
          const double mc = static_cast<double>(hits) / static_cast<double>(replicates);
          const double closed = exploration_efficiency_random(N, opt, k, i);
          const double gap = std::abs(closed - mc);
          worst_gap = std::max(worst_gap, gap);
          if (gap > 0.005) ok = false;
        }
        const double direct =
            1.0 - std::pow(static_cast<double>(N - opt) / static_cast<double>(N),
                           static_cast<double>(k));
        const double i1 = std::abs(exploration_efficiency_random(N, opt, k, 1) - direct);
        worst_i1 = std::max(worst_i1, i1);
        if (i1 > 1e-12) ok = false;
      }
    }
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 120.0;
  detail = "worst closed-vs-MC gap " + fmt(worst_gap) + ", worst i=1 identity dev " +
           fmt(worst_i1) + ", " + fmt(secs) + "s";
  return ok;
}

// ---------------------------------------------------------------------------
// C5: the four bound calculators match independent long-double evaluations on
// 20 grid points each, including the worked supervised-to-RL point
// (m=2, T=5, D=1, eps=0.5, |H|=16, delta=0.1) -> 1036 samples.
// ---------------------------------------------------------------------------
namespace oracle {

constexpr long double kOnePlusE = 1.0L + 2.718281828459045235360287471352662498L;

long double sl(long double gamma, long double delta, long double hyp) {
  return std::ceil(1.0L / (2.0L * gamma * gamma) * std::log(2.0L * hyp / delta));
}

long double gen(long double D, long double eta, long double m, long double T) {
  return D * std::pow(kOnePlusE, eta * (1.0L - m) * T);
}

long double rl(long double eps, long double D, long double m, long double T, long double hyp,
               long double delta) {
  const long double denom = std::log(D / (1.0L - eps)) / std::log(kOnePlusE);
  return std::ceil(2.0L * (m - 1.0L) * (m - 1.0L) * T * T / (denom * denom) *
                   std::log(2.0L * hyp / delta));
}

// Occupancy DP: probability that k uniform draws over N trajectories hit at
// least `needed` distinct members of the opt_count optimal ones.
long double explore_at_least(std::uint64_t N, std::uint64_t opt, std::uint64_t k,
                             std::uint64_t needed) {
  std::vector<long double> prob(opt + 1, 0.0L);
  prob[0] = 1.0L;
  for (std::uint64_t step = 0; step < k; ++step) {
    std::vector<long double> next(opt + 1, 0.0L);
    for (std::uint64_t j = 0; j <= opt; ++j) {
      const long double discover = static_cast<long double>(opt - j) / static_cast<long double>(N);
      next[j] += prob[j] * (1.0L - discover);
      if (j + 1 <= opt) next[j + 1] += prob[j] * discover;
    }
    prob.swap(next);
  }
  long double total = 0.0L;
  for (std::uint64_t j = needed; j <= opt; ++j) total += prob[j];
  return total;
}

}  // namespace oracle

bool within_rel(double got, long double want, double tol = 1e-9) {
  const long double w = want;
  return std::abs(static_cast<long double>(got) - w) <=
         tol * std::max<long double>(1.0L, std::abs(w));
}

bool c5_bound_calculators(std::string& detail) {
  bool ok = true;
  std::size_t points = 0;

  for (double gamma : {0.05, 0.1, 0.15, 0.2, 0.25})
    for (double delta : {0.05, 0.1})
      for (std::uint64_t hyp : {16ull, 1024ull}) {
        const std::uint64_t got = sl_sample_complexity(gamma, delta, hyp);
        ok = ok && within_rel(static_cast<double>(got), oracle::sl(gamma, delta, hyp));
        ++points;
      }

  for (double D : {0.25, 0.5, 0.75, 1.0, 1.5})
    for (double eta : {0.0, 0.05, 0.1, 0.25}) {
      const double got = generalization_lower_bound(D, eta, 3, 4);
      ok = ok && within_rel(got, oracle::gen(D, eta, 3.0L, 4.0L));
      ++points;
    }

  struct RlGroup {
    std::uint32_t m, T;
    std::uint64_t hyp;
    double delta;
  };
  for (const RlGroup& g : {RlGroup{2, 5, 16, 0.1}, RlGroup{3, 3, 64, 0.05}})
    for (double eps : {0.3, 0.5, 0.7, 0.9, 0.95})
      for (double D : {1.0, 1.25}) {
        const std::uint64_t got = rl_sample_complexity(eps, D, g.m, g.T, g.hyp, g.delta);
        ok = ok && within_rel(static_cast<double>(got),
                              oracle::rl(eps, D, g.m, g.T, g.hyp, g.delta));
        ++points;
      }
  const std::uint64_t worked = rl_sample_complexity(0.5, 1.0, 2, 5, 16, 0.1);
  ok = ok && worked == 1036;

  struct JointPoint {
    double delta_prime;
    std::uint64_t n, k, N, opt, hyp;
    std::uint32_t m, T;
    double D;
  };
  std::vector<JointPoint> joints;
  for (std::uint64_t k : {40ull, 80ull})
    for (auto [n, T] : std::vector<std::pair<std::uint64_t, std::uint32_t>>{
             {2, 2}, {4, 2}, {4, 4}, {8, 4}})
      joints.push_back({0.5, n, k, 8, 2, 16, 2, T, 1.0});
  for (std::uint64_t k : {20ull, 40ull})
    for (auto [n, T] : std::vector<std::pair<std::uint64_t, std::uint32_t>>{
             {2, 2}, {4, 2}, {4, 4}, {8, 4}})
      joints.push_back({0.5, n, k, 4, 2, 16, 2, T, 1.0});
  for (std::uint64_t k : {60ull, 90ull})
    for (std::uint64_t n : {2ull, 4ull}) joints.push_back({0.2, n, k, 8, 3, 64, 2, 2, 0.8});

  double worst_joint = 0.0;
  for (const JointPoint& jp : joints) {
    const JointBoundResult got =
        joint_bound(jp.delta_prime, jp.n, jp.k, jp.N, jp.opt, jp.hyp, jp.m, jp.T, jp.D);
    const std::uint64_t needed = (jp.n + jp.T - 1) / jp.T;
    const long double p = oracle::explore_at_least(jp.N, jp.opt, jp.k, needed);
    const long double eta =
        2.0L * std::sqrt(std::log(2.0L * static_cast<long double>(jp.hyp) * p /
                                  (p - 1.0L + static_cast<long double>(jp.delta_prime))) /
                         (2.0L * static_cast<long double>(jp.n)));
    const long double lower = oracle::gen(jp.D, eta, jp.m, jp.T);
    ok = ok && got.trajectories_needed == needed;
    ok = ok && within_rel(got.exploration_prob, p);
    ok = ok && within_rel(got.eta, eta);
    ok = ok && within_rel(got.lower_bound, lower);
    const double dev = std::max(
        {std::abs(got.exploration_prob - static_cast<double>(p)),
         std::abs(got.eta - static_cast<double>(eta)) /
             std::max(1.0, static_cast<double>(eta)),
         std::abs(got.lower_bound - static_cast<double>(lower)) /
             std::max(1.0, static_cast<double>(lower))});
    worst_joint = std::max(worst_joint, dev);
    ++points;
  }

  detail = std::to_string(points) + " grid points, worked RL point -> " +
           std::to_string(worked) + ", worst joint rel dev " + fmt(worst_joint);
  return ok;
}

// ---------------------------------------------------------------------------
// C6: empirical per-dimension variances respect the worst-case bounds —
// T^2 C^2 R_max^2 for the policy gradient, C^2 for single-example supervised
// hinge gradients — on a depth-5 tree under a fixed random policy.
// ---------------------------------------------------------------------------
bool c6_variance_bounds(std::string& detail) {
  const MdpSpec spec = make_env("tree:T=5,roots=1,opt=0,rewards=2,1,normalize=on");
  const double r_max = max_trajectory_reward(spec);
  ModelArch arch;
  arch.kind = ModelKind::tabular;
  arch.input_dim = spec.state_count;
  arch.actions = spec.max_actions;
  const LambdaModel model = LambdaModel::random_init(arch, 77, 0.3);
  const AnyPolicy pol = ListwisePolicy{&model, 1.0};

  const std::size_t n = 10000;
  std::vector<GradEstimate> pg;
  pg.reserve(n);
  double c_pg = 0.0;
  EnvState env(spec, 123);
  for (std::size_t i = 0; i < n; ++i) {
    env.reset();
    const Trajectory traj = rollout(spec, pol, SelectMode::sample, env);
    pg.push_back(lpg_trajectory_grad(model, traj));
    c_pg = std::max(c_pg, max_step_log_grad_inf_norm(model, traj));
  }
  const VarianceReport pg_rep =
      grad_variance_report(pg, c_pg, spec.horizon, r_max, GradKind::policy_gradient);

  ShapingConfig shaping;
  shaping.mode = ShapingConfig::Mode::fixed;
  shaping.threshold = r_max;
  ReplayBuffers buffers(1000, 1000);
  for (const EnumeratedTrajectory& et : enumerate_trajectories(spec))
    if (et.traj.trajectory_reward >= r_max) buffers.insert_if_near_optimal(et.traj, shaping);

  std::mt19937_64 rng(321);
  std::vector<GradEstimate> sup;
  sup.reserve(n);
  double c_sup = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<SupervisedExample> batch = buffers.sample_batch(1, rng);
    GradEstimate est = hinge_loss_and_grad(model, batch, 1.0);
    c_sup = std::max(c_sup, est.grad.inf_norm());
    sup.push_back(std::move(est));
  }
  const VarianceReport sup_rep =
      grad_variance_report(sup, c_sup, spec.horizon, r_max, GradKind::supervised);

  const double ratio =
      sup_rep.max_variance > 0.0 ? pg_rep.max_variance / sup_rep.max_variance : 0.0;
  const bool ok = pg_rep.pass && sup_rep.pass && pg_rep.samples == n && sup_rep.samples == n;
  detail = "PG max var " + fmt(pg_rep.max_variance) + " <= " + fmt(pg_rep.bound) +
           ", supervised max var " + fmt(sup_rep.max_variance) + " <= " + fmt(sup_rep.bound) +
           ", PG/supervised ratio " + fmt(ratio);
  return ok;
}

// ---------------------------------------------------------------------------
// C7: two-stage off-policy training masters a depth-6 single-goal tree
// (greedy return R_max on all 20 evaluation episodes) within 5e4 environment
// steps on at least 9 of 10 seeds; REINFORCE runs the identical budget and
// median steps-to-mastery are reported.
// ---------------------------------------------------------------------------
bool c7_convergence_vs_reinforce(std::string& detail) {
  const auto t0 = Clock::now();
  const MdpSpec spec = make_env("tree:T=6,roots=1,opt=0,rewards=2,1,normalize=on");
  const double budget = 50000.0;

  TrainRunConfig base;
  base.env_name = "tree:T=6,roots=1,opt=0,rewards=2,1,normalize=on";
  base.loss = LossKind::hinge;
  base.explorer = ExplorerKind::random;
  base.model = ModelKind::tabular;
  base.lr = 0.5;
  base.batch = 32;
  base.update_period = 4;
  base.evaluation_period = 500;
  base.eval_episodes = 20;
  base.max_episodes = 1000000;
  base.max_env_steps = 50000;

  int converged = 0;
  std::vector<double> rpg_steps;
  std::vector<double> pg_steps;
  int pg_converged = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    TrainRunConfig cfg = base;
    cfg.seed = seed;
    const RunLog log = train(cfg, spec);
    if (log.reached_target) {
      ++converged;
      rpg_steps.push_back(static_cast<double>(log.records.back().env_steps));
    } else {
      rpg_steps.push_back(budget);
    }
    const RunLog pg = onpolicy_reinforce_baseline(cfg, spec);
    if (pg.reached_target) {
      ++pg_converged;
      pg_steps.push_back(static_cast<double>(pg.records.back().env_steps));
    } else {
      pg_steps.push_back(budget);
    }
  }
  const double rpg_median = median(rpg_steps);
  const double pg_median = median(pg_steps);
  const double secs = seconds_since(t0);
  const bool ok = converged >= 9;
  detail = "off-policy " + std::to_string(converged) + "/10 seeds, median steps " +
           fmt(rpg_median) + "; REINFORCE " + std::to_string(pg_converged) +
           "/10, median steps " + fmt(pg_median) +
           (rpg_median <= pg_median ? " (off-policy <= baseline)" : " (baseline faster)") +
           ", " + fmt(secs) + "s";
  return ok;
}

// ---------------------------------------------------------------------------
// C8: threshold trade-off on a {10, 8, 2, ...} tree — the strict threshold
// c=10 takes longer to find its first near-optimal trajectory but ends at a
// final greedy return at least as high as c=8.
// ---------------------------------------------------------------------------
bool c8_threshold_tradeoff(std::string& detail) {
  const std::string env = "tree:T=3,roots=1,opt=0,rewards=10,8,2,2,2,2,2,2";
  const MdpSpec spec = make_env(env);

  auto run_for_threshold = [&](double c, std::vector<double>& first_insert,
                               std::vector<double>& final_return) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      TrainRunConfig cfg;
      cfg.env_name = env;
      cfg.seed = seed;
      cfg.loss = LossKind::hinge;
      cfg.explorer = ExplorerKind::random;
      cfg.model = ModelKind::tabular;
      cfg.lr = 0.5;
      cfg.batch = 16;
      cfg.update_period = 2;
      cfg.evaluation_period = 60;
      cfg.eval_episodes = 4;
      cfg.max_episodes = 2000;
      cfg.threshold = c;
      const RunLog log = train(cfg, spec);
      first_insert.push_back(log.episodes_to_first_insert == 0
                                 ? 1e9
                                 : static_cast<double>(log.episodes_to_first_insert));
      final_return.push_back(log.final_eval_return);
    }
  };

  std::vector<double> first10, final10, first8, final8;
  run_for_threshold(10.0, first10, final10);
  run_for_threshold(8.0, first8, final8);

  const double med_first10 = median(first10);
  const double med_first8 = median(first8);
  const double med_final10 = median(final10);
  const double med_final8 = median(final8);
  const bool ok = med_first10 > med_first8 && med_final10 >= med_final8;
  detail = "median episodes to first insert: c=10 -> " + fmt(med_first10) + ", c=8 -> " +
           fmt(med_first8) + "; median final return: c=10 -> " + fmt(med_final10) +
           ", c=8 -> " + fmt(med_final8);
  return ok;
}

// ---------------------------------------------------------------------------
// C9: the trajectory log-likelihood equals its state-action visit-frequency
// decomposition to 1e-12 on 1e3 random (policy, trajectory) pairs.
// ---------------------------------------------------------------------------
bool c9_loglikelihood_decomposition(std::string& detail) {
  std::mt19937_64 rng(555);
  double worst = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    const std::uint32_t m = 2 + draw % 4;
    const std::uint32_t states = 3 + draw % 5;
    ModelArch arch;
    arch.kind = ModelKind::tabular;
    arch.input_dim = states;
    arch.actions = m;
    const LambdaModel model = LambdaModel::random_init(arch, rng(), 0.5);
    AnyPolicy pol;
    if (draw % 2 == 0)
      pol = PairwisePolicy{&model, false};
    else
      pol = ListwisePolicy{&model, 1.0};
    Trajectory traj;
    const std::size_t len = 1 + rng() % 8;
    std::uniform_int_distribution<std::uint32_t> pick_state(0, states - 1);
    std::uniform_int_distribution<std::uint32_t> pick_action(0, m - 1);
    std::uniform_real_distribution<double> pick_reward(0.0, 1.0);
    for (std::size_t t = 0; t < len; ++t)
      traj.push(pick_state(rng), pick_action(rng), pick_reward(rng));
    const DecompositionCheck chk = loglikelihood_decomposition_check(pol, traj);
    worst = std::max(worst, chk.abs_diff);
  }
  detail = "worst |per-step - frequency| " + fmt(worst) + " over 1000 pairs";
  return worst <= 1e-12;
}

// ---------------------------------------------------------------------------
// C10: models trained on n uniformly-near-optimal supervision samples satisfy
// the long-term performance inequality: enumerated greedy return >=
// D (1+e)^(eta_emp (1-m) T) with the measured empirical error eta_emp.
// ---------------------------------------------------------------------------
bool c10_performance_lower_bound(std::string& detail) {
  const MdpSpec spec = make_env("tree:T=4,roots=1,opt=15,rewards=16,8,normalize=on");
  const auto all = enumerate_trajectories(spec);
  const EnumeratedTrajectory* best = &all.front();
  for (const EnumeratedTrajectory& et : all)
    if (et.traj.trajectory_reward > best->traj.trajectory_reward) best = &et;
  const std::vector<TrajectoryStep>& path = best->traj.steps;

  bool ok = true;
  std::ostringstream os;
  for (std::size_t n : {4u, 16u, 64u}) {
    std::mt19937_64 rng(9100 + n);
    std::uniform_int_distribution<std::size_t> pick(0, path.size() - 1);
    std::vector<SupervisedExample> samples;
    for (std::size_t i = 0; i < n; ++i) {
      const TrajectoryStep& st = path[pick(rng)];
      samples.push_back({st.state, st.action});
    }
    ModelArch arch;
    arch.kind = ModelKind::tabular;
    arch.input_dim = spec.state_count;
    arch.actions = spec.max_actions;
    LambdaModel model(arch);
    for (int step = 0; step < 400; ++step) {
      const GradEstimate est = hinge_loss_and_grad(model, samples, 1.0);
      sgd_update(model, est.grad, 0.25);
    }
    std::size_t errors = 0;
    for (const TrajectoryStep& st : path)
      if (argmax_action(model.forward(st.state)) != st.action) ++errors;
    const double eta_emp = static_cast<double>(errors) / static_cast<double>(path.size());

    // Greedy rollout is deterministic here; find the enumerated trajectory
    // whose every action is the greedy argmax at its own state.
    double greedy_return = 0.0;
    bool found = false;
    for (const EnumeratedTrajectory& et : all) {
      bool matches = true;
      for (const TrajectoryStep& st : et.traj.steps)
        if (argmax_action(model.forward(st.state)) != st.action) {
          matches = false;
          break;
        }
      if (matches) {
        greedy_return = et.traj.trajectory_reward;
        found = true;
        break;
      }
    }
    const double bound = generalization_lower_bound(1.0, eta_emp, 2, spec.horizon);
    const bool holds = found && greedy_return >= bound - 1e-9;
    ok = ok && holds;
    os << (os.tellp() > 0 ? "; " : "") << "n=" << n << ": eta " << fmt(eta_emp) << ", return "
       << fmt(greedy_return) << " >= bound " << fmt(bound) << (holds ? "" : " VIOLATED");
  }
  detail = os.str();
  return ok;
}

// ---------------------------------------------------------------------------
// C11: identical (config, seed) produces a byte-identical metrics CSV, and a
// checkpoint save -> load -> save round trip is bit-exact.
// ---------------------------------------------------------------------------
bool c11_reproducibility(std::string& detail) {
  const auto dir = scratch_dir("c11");
  const std::string env = "tree:T=2,roots=1,opt=0,rewards=2,1";
  const MdpSpec spec = make_env(env);

  auto run = [&](const std::string& out) {
    TrainRunConfig cfg;
    cfg.env_name = env;
    cfg.seed = 7;
    cfg.loss = LossKind::hinge;
    cfg.explorer = ExplorerKind::random;
    cfg.model = ModelKind::tabular;
    cfg.lr = 0.5;
    cfg.batch = 16;
    cfg.update_period = 2;
    cfg.evaluation_period = 40;
    cfg.eval_episodes = 4;
    cfg.max_episodes = 600;
    cfg.stop_target = 100.0;  // unreachable: exercise the full training curve
    cfg.out_dir = out;
    return train(cfg, spec);
  };
  const RunLog a = run((dir / "a").string());
  const RunLog b = run((dir / "b").string());

  std::ostringstream csv_a, csv_b;
  write_metrics_csv(a, csv_a);
  write_metrics_csv(b, csv_b);
  const bool csv_ok = !a.records.empty() && csv_a.str() == csv_b.str() &&
                      a.config_snapshot == b.config_snapshot;

  const LambdaModel restored = load_checkpoint(a.final_checkpoint);
  const std::string copy = (dir / "copy.rpgc").string();
  save_checkpoint(restored, copy);
  const bool ckpt_ok = !a.final_checkpoint.empty() &&
                       read_bytes(a.final_checkpoint) == read_bytes(copy) &&
                       !read_bytes(copy).empty();

  detail = std::string("metrics CSV ") + (csv_ok ? "byte-identical" : "MISMATCH") +
           ", checkpoint round trip " + (ckpt_ok ? "bit-exact" : "MISMATCH") + " (" +
           std::to_string(a.records.size()) + " eval rows)";
  return csv_ok && ckpt_ok;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    bool (*fn)(std::string&);
  };
  const Criterion criteria[] = {
      {"C1 gradient-correctness", c1_gradient_correctness},
      {"C2 policy-normalization", c2_policy_normalization},
      {"C3 estimator-unbiasedness", c3_estimator_unbiasedness},
      {"C4 exploration-efficiency", c4_exploration_efficiency},
      {"C5 bound-calculators", c5_bound_calculators},
      {"C6 variance-bounds", c6_variance_bounds},
      {"C7 convergence-vs-reinforce", c7_convergence_vs_reinforce},
      {"C8 threshold-tradeoff", c8_threshold_tradeoff},
      {"C9 loglikelihood-decomposition", c9_loglikelihood_decomposition},
      {"C10 performance-lower-bound", c10_performance_lower_bound},
      {"C11 reproducibility", c11_reproducibility},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    std::string det;
    bool ok = false;
    try {
      ok = c.fn(det);
    } catch (const std::exception& e) {
      det = std::string("exception: ") + e.what();
    }
    if (!ok) ++failures;
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << c.name << " — " << det << "\n";
  }
  std::cout << (failures == 0 ? "ACCEPTANCE: all criteria passed"
                              : "ACCEPTANCE: " + std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
