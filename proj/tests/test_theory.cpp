#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rankgrad/envs.hpp"
#include "rankgrad/model.hpp"
#include "rankgrad/offpolicy.hpp"
#include "rankgrad/policy.hpp"
#include "rankgrad/theory.hpp"

using namespace rankgrad;

namespace {

using Rat = boost::multiprecision::cpp_rational;

// Independent oracle for the distinct-optimal-trajectory tail probability,
// deliberately *not* the inclusion-exclusion formula: a Markov chain over
// the number of distinct optimal trajectories seen so far, advanced k draws
// with exact rational arithmetic. Each uniform draw upgrades j -> j+1 with
// probability (opt - j) / N.
std::vector<Rat> dp_distribution(std::uint64_t N, std::uint64_t opt, std::uint64_t k) {
  std::vector<Rat> dist(opt + 1, Rat(0));
  dist[0] = 1;
  for (std::uint64_t step = 0; step < k; ++step) {
    std::vector<Rat> next(opt + 1, Rat(0));
    for (std::uint64_t j = 0; j <= opt; ++j) {
      if (dist[j] == 0) continue;
      Rat hit(opt - j, N);
      next[j] += dist[j] * (Rat(1) - hit);
      if (j < opt) next[j + 1] += dist[j] * hit;
    }
    dist = std::move(next);
  }
  return dist;
}

double dp_tail(std::uint64_t N, std::uint64_t opt, std::uint64_t k, std::uint64_t i) {
  auto dist = dp_distribution(N, opt, k);
  Rat tail = 0;
  for (std::uint64_t j = i; j <= opt; ++j) tail += dist[j];
  return tail.convert_to<double>();
}

double dp_expectation(std::uint64_t N, std::uint64_t opt, std::uint64_t k) {
  auto dist = dp_distribution(N, opt, k);
  Rat e = 0;
  for (std::uint64_t j = 1; j <= opt; ++j) e += Rat(j) * dist[j];
  return e.convert_to<double>();
}

}  // namespace

TEST_CASE("sl_sample_complexity worked points") {
  // gamma = 1, |H| = 1, delta = 2/e: bound = 0.5 ln(e) = 0.5 -> 1.
  CHECK(sl_sample_complexity(1.0, 2.0 / std::exp(1.0), 1) == 1);
  // 50 ln(320) = 288.416... -> 289.
  CHECK(sl_sample_complexity(0.1, 0.1, 16) == 289);
  CHECK(sl_sample_complexity(0.1, 0.05, 1024) == 532);
  CHECK(sl_sample_complexity(0.05, 0.1, 256) == 1709);
}

TEST_CASE("sl_sample_complexity monotonicities") {
  for (double delta : {0.01, 0.05, 0.1, 0.2, 0.5}) {
    for (std::uint64_t h : {1ull, 4ull, 64ull, 4096ull}) {
      // nonincreasing in delta
      CHECK(sl_sample_complexity(0.1, delta, h) >= sl_sample_complexity(0.1, delta + 0.05, h));
      // nondecreasing in |H|
      CHECK(sl_sample_complexity(0.1, delta, h) <= sl_sample_complexity(0.1, delta, h * 2));
      // nonincreasing in gamma
      CHECK(sl_sample_complexity(0.1, delta, h) >= sl_sample_complexity(0.2, delta, h));
    }
  }
  CHECK_THROWS_AS(sl_sample_complexity(0.0, 0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(sl_sample_complexity(0.1, 1.5, 1), std::invalid_argument);
}

TEST_CASE("generalization_lower_bound closed forms") {
  // eta = 0: exponent vanishes, bound = D.
  CHECK(generalization_lower_bound(0.7, 0.0, 3, 9) == doctest::Approx(0.7).epsilon(1e-15));
  // m = 2, T = 1, eta = 1: D / (1 + e).
  double one_plus_e = 1.0 + std::exp(1.0);
  CHECK(generalization_lower_bound(1.0, 1.0, 2, 1) ==
        doctest::Approx(1.0 / one_plus_e).epsilon(1e-14));
  CHECK(generalization_lower_bound(1.0, 1.0, 2, 1) ==
        doctest::Approx(0.2689414213699951).epsilon(1e-14));
  CHECK(generalization_lower_bound(0.8, 0.1, 3, 4) ==
        doctest::Approx(0.2797796635941472).epsilon(1e-13));
}

TEST_CASE("generalization_lower_bound monotone decreasing in eta, m, T") {
  for (double eta : {0.05, 0.1, 0.3}) {
    for (std::uint32_t m : {2u, 3u, 5u}) {
      for (std::uint32_t T : {1u, 3u, 7u}) {
        double base = generalization_lower_bound(1.0, eta, m, T);
        CHECK(generalization_lower_bound(1.0, eta + 0.01, m, T) < base);
        CHECK(generalization_lower_bound(1.0, eta, m + 1, T) < base);
        CHECK(generalization_lower_bound(1.0, eta, m, T + 1) < base);
      }
    }
  }
}

TEST_CASE("rl_sample_complexity worked points and infeasibility") {
  CHECK(rl_sample_complexity(0.5, 1.0, 2, 5, 16, 0.1) == 1036);
  CHECK(rl_sample_complexity(0.3, 0.9, 3, 4, 64, 0.05) == 27430);
  // D = 1 - epsilon: log of 1, division by zero -> infeasible.
  CHECK_THROWS_AS(rl_sample_complexity(0.5, 0.5, 2, 5, 16, 0.1), InfeasibleError);
  CHECK_THROWS_AS(rl_sample_complexity(0.2, 0.5, 2, 5, 16, 0.1), InfeasibleError);
}

TEST_CASE("rl_sample_complexity round-trips through the supervised bound") {
  // The returned n is the smallest integer whose supervised generalization
  // error eta(n) = 2 sqrt(ln(2|H|/delta) / (2n)) drives the performance
  // lower bound to at least 1 - epsilon.
  struct Point {
    double eps, D, delta;
    std::uint32_t m, T;
    std::uint64_t H;
  };
  const Point points[] = {
      {0.5, 1.0, 0.1, 2, 5, 16},   {0.3, 0.9, 0.05, 3, 4, 64}, {0.4, 0.8, 0.2, 2, 3, 8},
      {0.6, 1.0, 0.01, 4, 2, 128}, {0.25, 0.9, 0.1, 2, 8, 32},
  };
  for (const auto& pt : points) {
    std::uint64_t n = rl_sample_complexity(pt.eps, pt.D, pt.m, pt.T, pt.H, pt.delta);
    auto eta_of = [&](std::uint64_t nn) {
      return 2.0 * std::sqrt(std::log(2.0 * static_cast<double>(pt.H) / pt.delta) /
                             (2.0 * static_cast<double>(nn)));
    };
    double target = 1.0 - pt.eps;
    CHECK(generalization_lower_bound(pt.D, eta_of(n), pt.m, pt.T) >= target - 1e-9);
    REQUIRE(n >= 2);
    CHECK(generalization_lower_bound(pt.D, eta_of(n - 1), pt.m, pt.T) < target);
  }
}

TEST_CASE("exploration_efficiency_random boundary cases") {
  // i = 0: certain.
  CHECK(exploration_efficiency_random(8, 2, 10, 0) == 1.0);
  CHECK(exploration_efficiency_random(8, 2, 0, 0) == 1.0);
  // k = 0 with i >= 1: impossible.
  CHECK(exploration_efficiency_random(8, 2, 0, 1) == 0.0);
  // i beyond the optimal count: impossible.
  CHECK(exploration_efficiency_random(8, 2, 10, 3) == 0.0);
  // all trajectories optimal, i = 1, k = 1: certain hit.
  CHECK(exploration_efficiency_random(4, 4, 1, 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(exploration_efficiency_random(8, 9, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(exploration_efficiency_random(8, 0, 1, 1), std::invalid_argument);
}

TEST_CASE("exploration_efficiency_random i=1 closed form") {
  for (std::uint64_t N : {4ull, 8ull, 16ull, 33ull}) {
    for (std::uint64_t opt : {1ull, 2ull, 3ull}) {
      for (std::uint64_t k : {1ull, 5ull, 10ull, 20ull}) {
        double direct = exploration_efficiency_random(N, opt, k, 1);
        double closed = 1.0 - std::pow(static_cast<double>(N - opt) / static_cast<double>(N),
                                       static_cast<double>(k));
        CHECK(std::abs(direct - closed) < 1e-12);
      }
    }
  }
}

TEST_CASE("exploration_efficiency_random matches the exact Markov-chain oracle") {
  for (std::uint64_t N : {4ull, 8ull, 16ull}) {
    for (std::uint64_t opt : {1ull, 2ull, 3ull}) {
      for (std::uint64_t k : {1ull, 5ull, 10ull, 20ull}) {
        for (std::uint64_t i = 1; i <= opt; ++i) {
          double formula = exploration_efficiency_random(N, opt, k, i);
          double oracle = dp_tail(N, opt, k, i);
          CHECK(std::abs(formula - oracle) < 1e-13);
        }
      }
    }
  }
}

TEST_CASE("exploration_efficiency_random frozen anchors") {
  CHECK(exploration_efficiency_random(8, 2, 10, 1) ==
        doctest::Approx(0.9436864852905273).epsilon(1e-13));
  CHECK(exploration_efficiency_random(8, 2, 10, 2) ==
        doctest::Approx(0.5301623623818159).epsilon(1e-13));
  CHECK(exploration_efficiency_random(16, 3, 10, 2) ==
        doctest::Approx(0.4615364073706587).epsilon(1e-13));
  CHECK(exploration_efficiency_random(16, 3, 10, 3) ==
        doctest::Approx(0.09046373541423236).epsilon(1e-13));
  // Exact dyadic rationals representable in double.
  CHECK(exploration_efficiency_random(4, 3, 5, 2) == 0.908203125);     // 465/512
  CHECK(exploration_efficiency_random(8, 2, 3, 1) == 0.578125);        // 37/64
  CHECK(exploration_efficiency_random(8, 2, 3, 2) == 0.08203125);      // 21/256
}

TEST_CASE("exploration tail is a valid distribution") {
  for (std::uint64_t N : {5ull, 8ull, 16ull}) {
    for (std::uint64_t opt : {1ull, 3ull, 5ull}) {
      for (std::uint64_t k : {0ull, 1ull, 7ull, 20ull}) {
        double prev = 1.0;
        double mass = 0.0;
        CHECK(exploration_efficiency_random(N, opt, k, 0) == 1.0);
        for (std::uint64_t i = 1; i <= opt + 1; ++i) {
          double tail = exploration_efficiency_random(N, opt, k, i);
          CHECK(tail >= -1e-15);
          CHECK(tail <= 1.0 + 1e-15);
          CHECK(tail <= prev + 1e-12);  // nonincreasing in i
          mass += prev - tail;          // p(n = i-1 | k)
          prev = tail;
        }
        CHECK(std::abs(mass - 1.0) < 1e-9);  // total probability
      }
    }
  }
}

TEST_CASE("expected efficiency equals the tail sum and the DP expectation") {
  for (std::uint64_t N : {4ull, 8ull, 16ull}) {
    for (std::uint64_t opt : {1ull, 2ull, 3ull}) {
      for (std::uint64_t k : {1ull, 5ull, 10ull}) {
        double closed = expected_exploration_efficiency_closed_form(N, opt, k);
        CHECK(closed == doctest::Approx(dp_expectation(N, opt, k)).epsilon(1e-12));
        // nondecreasing in k
        CHECK(expected_exploration_efficiency_closed_form(N, opt, k + 1) >= closed - 1e-12);
      }
    }
  }
  CHECK(expected_exploration_efficiency_closed_form(8, 2, 10) ==
        doctest::Approx(1.4738488476723433).epsilon(1e-13));
  // All-optimal case is the expected distinct count of uniform draws
  // (coupon-collector partial progress): for k = 1 it is exactly 1.
  CHECK(expected_exploration_efficiency_closed_form(7, 7, 1) ==
        doctest::Approx(1.0).epsilon(1e-14));
  CHECK(expected_exploration_efficiency_closed_form(6, 6, 10) ==
        doctest::Approx(5.030966502660926).epsilon(1e-13));
}

TEST_CASE("closed form matches Monte Carlo simulation") {
  const std::size_t reps = 200000;
  auto counts = simulate_distinct_optimal_counts(8, 2, 10, reps, 20260816);
  REQUIRE(counts.size() == reps);
  double at_least1 = 0.0, at_least2 = 0.0, sum = 0.0;
  for (auto c : counts) {
    if (c >= 1) at_least1 += 1.0;
    if (c >= 2) at_least2 += 1.0;
    sum += c;
  }
  at_least1 /= static_cast<double>(reps);
  at_least2 /= static_cast<double>(reps);
  CHECK(std::abs(at_least1 - exploration_efficiency_random(8, 2, 10, 1)) < 0.005);
  CHECK(std::abs(at_least2 - exploration_efficiency_random(8, 2, 10, 2)) < 0.005);

  std::vector<double> as_double(counts.begin(), counts.end());
  auto emp = expected_exploration_efficiency_empirical(as_double);
  CHECK(emp.replicates == reps);
  CHECK(std::abs(emp.mean - sum / static_cast<double>(reps)) < 1e-12);
  double closed = expected_exploration_efficiency_closed_form(8, 2, 10);
  CHECK(std::abs(emp.mean - closed) < 0.01);
  CHECK(std::abs(emp.mean - closed) < 4.0 * emp.std_error);
}

TEST_CASE("empirical efficiency helper needs two replicates") {
  std::vector<double> one{1.0};
  CHECK_THROWS_AS(expected_exploration_efficiency_empirical(one), std::invalid_argument);
  std::vector<double> two{1.0, 3.0};
  auto emp = expected_exploration_efficiency_empirical(two);
  CHECK(emp.mean == doctest::Approx(2.0).epsilon(1e-15));
  // sd = sqrt(2), se = sd / sqrt(2) = 1.
  CHECK(emp.std_error == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("hit_probability_decay closed forms") {
  CHECK(hit_probability_decay(0.3, 0) == 1.0);
  CHECK(hit_probability_decay(1.0, 1) == 0.0);
  CHECK(hit_probability_decay(1.0, 9) == 0.0);
  CHECK(hit_probability_decay(0.25, 2) == doctest::Approx(0.5625).epsilon(1e-15));
  // strictly decreasing in n for p in (0,1)
  for (std::uint64_t n = 0; n < 20; ++n) {
    CHECK(hit_probability_decay(0.1, n + 1) < hit_probability_decay(0.1, n));
  }
  CHECK_THROWS_AS(hit_probability_decay(0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(hit_probability_decay(1.5, 1), std::invalid_argument);
}

TEST_CASE("hit_probability_decay matches rollout Monte Carlo on the depth-3 tree") {
  MdpSpec spec = make_env("tree:T=3,roots=1,opt=0,rewards=2,1");
  ModelArch arch;
  arch.kind = ModelKind::tabular;
  arch.input_dim = spec.state_count;
  arch.actions = spec.max_actions;
  LambdaModel model = LambdaModel::random_init(arch, 9, 0.3);
  AnyPolicy pol = ListwisePolicy{&model, 1.0};

  // Enumerate p_theta(tau*) for the all-left trajectory (deterministic
  // dynamics and a single root make the path probability the policy factor).
  auto all_traj = enumerate_trajectories(spec);
  REQUIRE(all_traj.size() == 8);
  const Trajectory* target = nullptr;
  for (const auto& et : all_traj) {
    bool all_left = true;
    for (const auto& st : et.traj.steps) all_left = all_left && (st.action == 0);
    if (all_left) target = &et.traj;
  }
  REQUIRE(target != nullptr);
  double p_tau = policy_path_prob(pol, *target);
  CHECK(p_tau > 0.0);

  const std::uint64_t n = 5;
  double predicted_miss = hit_probability_decay(p_tau, n);

  const int reps = 30000;
  EnvState env(spec, 777);
  std::string key = target->key();
  int misses = 0;
  for (int rep = 0; rep < reps; ++rep) {
    bool hit = false;
    for (std::uint64_t d = 0; d < n; ++d) {
      env.reset();
      Trajectory traj = rollout(spec, pol, SelectMode::sample, env);
      if (traj.key() == key) hit = true;
    }
    if (!hit) ++misses;
  }
  double freq = static_cast<double>(misses) / reps;
  double se = std::sqrt(predicted_miss * (1.0 - predicted_miss) / reps);
  CHECK(std::abs(freq - predicted_miss) < 3.0 * se + 1e-12);
}

TEST_CASE("joint_bound worked point") {
  auto res = joint_bound(0.1, 5, 200, 8, 2, 16, 2, 5, 1.0);
  CHECK(res.trajectories_needed == 1);
  // p = 1 - (3/4)^200, which rounds to 1 in double precision.
  CHECK(res.exploration_prob == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(res.eta == doctest::Approx(1.5189892686643671).epsilon(1e-12));
  CHECK(res.lower_bound == doctest::Approx(4.658872255206457e-05).epsilon(1e-12));
}

TEST_CASE("joint_bound with guaranteed exploration reduces to the plain bound") {
  // N = opt = 1, k = 1: exploration succeeds with probability exactly 1, so
  // eta must equal 2 sqrt((1/2n) ln(2|H| / delta')).
  for (std::uint64_t n : {1ull, 5ull, 40ull}) {
    for (std::uint64_t H : {1ull, 16ull, 1024ull}) {
      for (double dp : {0.05, 0.1, 0.5}) {
        auto res = joint_bound(dp, n, 1, 1, 1, H, 2, n > 1 ? 64 : 1, 1.0);
        double expect =
            2.0 * std::sqrt(std::log(2.0 * static_cast<double>(H) / dp) /
                            (2.0 * static_cast<double>(n)));
        CHECK(res.exploration_prob == 1.0);
        CHECK(res.eta == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("joint_bound infeasibility branches") {
  // Exploration can never produce ceil(n/T) = 3 distinct optima out of 2.
  CHECK_THROWS_AS(joint_bound(0.1, 15, 10, 8, 2, 16, 2, 5, 1.0), InfeasibleError);
  // Success probability too small for the confidence split: p = 1/1000 at
  // k = 1, delta' = 0.5 -> p - 1 + delta' < 0.
  CHECK_THROWS_AS(joint_bound(0.5, 5, 1, 1000, 1, 16, 2, 5, 1.0), InfeasibleError);
  // delta' must be strictly inside (0, 1).
  CHECK_THROWS_AS(joint_bound(0.0, 5, 10, 8, 2, 16, 2, 5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(joint_bound(1.0, 5, 10, 8, 2, 16, 2, 5, 1.0), std::invalid_argument);
}

TEST_CASE("joint_bound eta recomputed independently at a feasible grid point") {
  // Feasible point with nontrivial p: N=8, opt=2, k=20, n=6, T=5 -> needs 2.
  auto res = joint_bound(0.2, 6, 20, 8, 2, 16, 2, 5, 1.0);
  double p = dp_tail(8, 2, 20, 2);
  CHECK(res.exploration_prob == doctest::Approx(p).epsilon(1e-12));
  double arg = 2.0 * 16.0 * p / (p - 1.0 + 0.2);
  double eta = 2.0 * std::sqrt(std::log(arg) / 12.0);
  CHECK(res.eta == doctest::Approx(eta).epsilon(1e-12));
  CHECK(res.lower_bound ==
        doctest::Approx(generalization_lower_bound(1.0, eta, 2, 5)).epsilon(1e-12));
}

TEST_CASE("simulate_distinct_optimal_counts is deterministic per seed") {
  auto a = simulate_distinct_optimal_counts(8, 2, 10, 1000, 5);
  auto b = simulate_distinct_optimal_counts(8, 2, 10, 1000, 5);
  auto c = simulate_distinct_optimal_counts(8, 2, 10, 1000, 6);
  CHECK(a == b);
  CHECK(a != c);
  for (auto v : a) CHECK(v <= 2);
}
