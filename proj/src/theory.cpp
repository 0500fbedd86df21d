#include "rankgrad/theory.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <random>
#include <unordered_set>

namespace rankgrad {

namespace mp = boost::multiprecision;
using BigInt = mp::cpp_int;
using BigRational = mp::cpp_rational;

namespace {

const double kLog1PlusE = std::log(1.0 + std::exp(1.0));

BigInt binomial(std::uint64_t n, std::uint64_t r) {
  if (r > n) return 0;
  r = std::min(r, n - r);
  BigInt num = 1;
  for (std::uint64_t t = 0; t < r; ++t) {
    num *= BigInt(n - t);
    num /= BigInt(t + 1);  // exact: prefix products of C(n, .) are integers
  }
  return num;
}

BigInt ipow(std::uint64_t base, std::uint64_t exp) {
  BigInt b = base;
  BigInt acc = 1;
  while (exp > 0) {
    if (exp & 1) acc *= b;
    b *= b;
    exp >>= 1;
  }
  return acc;
}

}  // namespace

std::uint64_t sl_sample_complexity(double gamma, double delta, std::uint64_t hyp_count) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("sl_sample_complexity: gamma must be in (0, 1]");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("sl_sample_complexity: delta must be in (0, 1)");
  }
  if (hyp_count == 0) throw std::invalid_argument("sl_sample_complexity: |H| must be positive");
  double bound = std::log(2.0 * static_cast<double>(hyp_count) / delta) / (2.0 * gamma * gamma);
  return static_cast<std::uint64_t>(std::ceil(bound));
}

double generalization_lower_bound(double D, double eta, std::uint32_t m, std::uint32_t T) {
  if (!(D > 0.0) || !std::isfinite(D)) {
    throw std::invalid_argument("generalization_lower_bound: D must be positive");
  }
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw std::invalid_argument("generalization_lower_bound: eta must be nonnegative");
  }
  if (m < 2) throw std::invalid_argument("generalization_lower_bound: m must be at least 2");
  if (T == 0) throw std::invalid_argument("generalization_lower_bound: T must be positive");
  // (1 + e)^(eta (1 - m) T)
  double exponent = eta * (1.0 - static_cast<double>(m)) * static_cast<double>(T);
  return D * std::pow(1.0 + std::exp(1.0), exponent);
}

std::uint64_t rl_sample_complexity(double epsilon, double D, std::uint32_t m, std::uint32_t T,
                                   std::uint64_t hyp_count, double delta) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("rl_sample_complexity: epsilon must be in (0, 1)");
  }
  if (!(D > 0.0) || !std::isfinite(D)) {
    throw std::invalid_argument("rl_sample_complexity: D must be positive");
  }
  if (m < 2) throw std::invalid_argument("rl_sample_complexity: m must be at least 2");
  if (T == 0) throw std::invalid_argument("rl_sample_complexity: T must be positive");
  if (hyp_count == 0) throw std::invalid_argument("rl_sample_complexity: |H| must be positive");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("rl_sample_complexity: delta must be in (0, 1)");
  }
  double ratio = D / (1.0 - epsilon);
  if (!(ratio > 1.0)) {
    throw InfeasibleError(
        "rl_sample_complexity: infeasible, D must exceed 1 - epsilon for the bound to certify "
        "the target return");
  }
  double log_ratio = std::log(ratio) / kLog1PlusE;  // log base (1 + e)
  double md = static_cast<double>(m) - 1.0;
  double Td = static_cast<double>(T);
  double bound = 2.0 * md * md * Td * Td / (log_ratio * log_ratio) *
                 std::log(2.0 * static_cast<double>(hyp_count) / delta);
  return static_cast<std::uint64_t>(std::ceil(bound));
}

double exploration_efficiency_random(std::uint64_t N, std::uint64_t opt_count, std::uint64_t k,
                                     std::uint64_t i) {
  if (N == 0) throw std::invalid_argument("exploration_efficiency_random: N must be positive");
  if (opt_count == 0 || opt_count > N) {
    throw std::invalid_argument("exploration_efficiency_random: need 1 <= opt_count <= N");
  }
  if (k > 1000000) throw std::invalid_argument("exploration_efficiency_random: k too large");
  if (i == 0) return 1.0;         // at least zero distinct optima is certain
  if (i > opt_count) return 0.0;  // cannot see more distinct optima than exist

  // p(n >= i | k) = 1 - sum_{i'=0}^{i-1} C(opt, i') *
  //     sum_{j=0}^{i'} (-1)^j C(i', j) (N - opt + i' - j)^k / N^k,
  // evaluated exactly over the integers.
  BigInt miss = 0;
  for (std::uint64_t ip = 0; ip < i; ++ip) {
    BigInt inner = 0;
    for (std::uint64_t j = 0; j <= ip; ++j) {
      BigInt term = binomial(ip, j) * ipow(N - opt_count + ip - j, k);
      if (j % 2 == 0) inner += term;
      else inner -= term;
    }
    miss += binomial(opt_count, ip) * inner;
  }
  BigInt total = ipow(N, k);
  BigRational p(total - miss, total);
  double out = p.convert_to<double>();
  if (out < 0.0) out = 0.0;
  if (out > 1.0) out = 1.0;
  return out;
}

double expected_exploration_efficiency_closed_form(std::uint64_t N, std::uint64_t opt_count,
                                                   std::uint64_t k) {
  double e = 0.0;
  for (std::uint64_t i = 1; i <= opt_count; ++i) {
    e += exploration_efficiency_random(N, opt_count, k, i);
  }
  return e;
}

EmpiricalEfficiency expected_exploration_efficiency_empirical(std::span<const double> counts) {
  if (counts.size() < 2) {
    throw std::invalid_argument("expected_exploration_efficiency_empirical: need >= 2 replicates");
  }
  EmpiricalEfficiency out;
  out.replicates = counts.size();
  for (double c : counts) out.mean += c;
  out.mean /= static_cast<double>(counts.size());
  double ss = 0.0;
  for (double c : counts) ss += (c - out.mean) * (c - out.mean);
  double var = ss / static_cast<double>(counts.size() - 1);
  out.std_error = std::sqrt(var / static_cast<double>(counts.size()));
  return out;
}

double hit_probability_decay(double p, std::uint64_t n) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw std::invalid_argument("hit_probability_decay: p must be in (0, 1]");
  }
  return std::pow(1.0 - p, static_cast<double>(n));
}

JointBoundResult joint_bound(double delta_prime, std::uint64_t n, std::uint64_t k,
                             std::uint64_t N, std::uint64_t opt_count, std::uint64_t hyp_count,
                             std::uint32_t m, std::uint32_t T, double D) {
  if (!(delta_prime > 0.0 && delta_prime < 1.0)) {
    throw std::invalid_argument("joint_bound: delta_prime must be strictly inside (0, 1)");
  }
  if (n == 0) throw std::invalid_argument("joint_bound: n must be positive");
  if (T == 0) throw std::invalid_argument("joint_bound: T must be positive");
  if (m < 2) throw std::invalid_argument("joint_bound: m must be at least 2");
  if (hyp_count == 0) throw std::invalid_argument("joint_bound: |H| must be positive");

  JointBoundResult out;
  out.trajectories_needed = (n + T - 1) / T;  // n samples need ceil(n/T) distinct trajectories
  if (out.trajectories_needed > opt_count) {
    throw InfeasibleError(
        "joint_bound: infeasible, exploration can never supply ceil(n/T) distinct near-optimal "
        "trajectories");
  }
  out.exploration_prob = exploration_efficiency_random(N, opt_count, k, out.trajectories_needed);
  double denom = out.exploration_prob - 1.0 + delta_prime;
  if (!(denom > 0.0)) {
    throw InfeasibleError(
        "joint_bound: infeasible, exploration success probability is too small for the requested "
        "confidence");
  }
  double arg = 2.0 * static_cast<double>(hyp_count) * out.exploration_prob / denom;
  out.eta = 2.0 * std::sqrt(std::log(arg) / (2.0 * static_cast<double>(n)));
  out.lower_bound = generalization_lower_bound(D, out.eta, m, T);
  return out;
}

std::vector<std::uint32_t> simulate_distinct_optimal_counts(std::uint64_t N,
                                                            std::uint64_t opt_count,
                                                            std::uint64_t k,
                                                            std::size_t replicates,
                                                            std::uint64_t seed) {
  if (N == 0 || opt_count == 0 || opt_count > N) {
    throw std::invalid_argument("simulate_distinct_optimal_counts: need 1 <= opt_count <= N");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint64_t> pick(0, N - 1);
  std::vector<std::uint32_t> out;
  out.reserve(replicates);
  std::vector<char> seen(opt_count, 0);
  for (std::size_t rep = 0; rep < replicates; ++rep) {
    std::fill(seen.begin(), seen.end(), 0);
    std::uint32_t distinct = 0;
    for (std::uint64_t d = 0; d < k; ++d) {
      std::uint64_t id = pick(rng);
      if (id < opt_count && !seen[id]) {
        seen[id] = 1;
        ++distinct;
      }
    }
    out.push_back(distinct);
  }
  return out;
}

}  // namespace rankgrad
