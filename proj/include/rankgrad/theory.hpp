#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace rankgrad {

// Raised when a bound is undefined for the given parameters (e.g. the
// required improvement exceeds what the lower bound can certify, or the
// exploration success probability is too small for the confidence split).
class InfeasibleError : public std::domain_error {
 public:
  explicit InfeasibleError(const std::string& msg) : std::domain_error(msg) {}
};

// Parameter bundle used by the CLI calculators. All logs are natural unless
// a result says otherwise.
struct TheoryParams {
  double gamma = 0.1;          // generalization error tolerance
  double delta = 0.05;         // failure probability
  std::uint64_t hyp_count = 1; // |H|
  std::uint32_t m = 2;         // actions
  std::uint32_t horizon = 1;   // T
  double D = 1.0;              // |T_opt| * geometric mean of dynamics probs
  double epsilon = 0.1;        // performance slack
  std::uint64_t N = 1;         // total trajectories |S_1| * |A|^T
  std::uint64_t opt_count = 1; // |T_opt|
  std::uint64_t k = 1;         // exploration episodes
  std::uint64_t n = 1;         // supervision samples
  double delta_prime = 0.05;   // joint-bound confidence
};

// Supervised sample complexity: ceil((1 / (2 gamma^2)) * ln(2 |H| / delta)).
std::uint64_t sl_sample_complexity(double gamma, double delta, std::uint64_t hyp_count);

// Long-term performance lower bound D * (1 + e)^(eta (1 - m) T) for a
// classifier with generalization error eta (rewards scaled so R_max = 1).
double generalization_lower_bound(double D, double eta, std::uint32_t m, std::uint32_t T);

// Samples sufficient for expected return >= 1 - epsilon:
//   ceil( 2 (m-1)^2 T^2 / log_{1+e}(D / (1-epsilon))^2 * ln(2 |H| / delta) ).
// Infeasible when D <= 1 - epsilon.
std::uint64_t rl_sample_complexity(double epsilon, double D, std::uint32_t m, std::uint32_t T,
                                   std::uint64_t hyp_count, double delta);

// Probability that uniform random exploration of N equiprobable trajectories
// visits at least i distinct members of the opt_count optimal ones within k
// episodes (inclusion-exclusion over the optimal set, exact big-integer
// arithmetic). The tail is total: i = 0 returns 1 and i > opt_count returns 0.
double exploration_efficiency_random(std::uint64_t N, std::uint64_t opt_count, std::uint64_t k,
                                     std::uint64_t i);

// E[distinct optimal trajectories after k episodes], as the tail sum of
// exploration_efficiency_random over i = 1..opt_count.
double expected_exploration_efficiency_closed_form(std::uint64_t N, std::uint64_t opt_count,
                                                   std::uint64_t k);

struct EmpiricalEfficiency {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t replicates = 0;
};

// Mean and standard error of observed distinct-trajectory counts.
EmpiricalEfficiency expected_exploration_efficiency_empirical(std::span<const double> counts);

// Probability a trajectory with sampling probability p is never drawn in n
// independent samples: (1 - p)^n.
double hit_probability_decay(double p, std::uint64_t n);

struct JointBoundResult {
  double eta = 0.0;
  double lower_bound = 0.0;
  double exploration_prob = 0.0;        // p(n' >= needed trajectories | k)
  std::uint64_t trajectories_needed = 0;  // ceil(n / T)
};

// Couples exploration efficiency with the supervised bound: n samples need
// ceil(n/T) distinct near-optimal trajectories; with p the probability
// exploration supplies them within k episodes,
//   eta = 2 sqrt( (1/(2n)) ln( 2 |H| p / (p - 1 + delta') ) )
// and the return bound is generalization_lower_bound(D, eta, m, T), holding
// with probability at least (1 - delta') overall. delta_prime must lie
// strictly inside (0, 1).
JointBoundResult joint_bound(double delta_prime, std::uint64_t n, std::uint64_t k,
                             std::uint64_t N, std::uint64_t opt_count, std::uint64_t hyp_count,
                             std::uint32_t m, std::uint32_t T, double D);

// Monte Carlo mirror of exploration_efficiency_random: per replicate, draws k
// uniform trajectory ids out of N and counts distinct ids < opt_count.
std::vector<std::uint32_t> simulate_distinct_optimal_counts(std::uint64_t N,
                                                            std::uint64_t opt_count,
                                                            std::uint64_t k,
                                                            std::size_t replicates,
                                                            std::uint64_t seed);

}  // namespace rankgrad
