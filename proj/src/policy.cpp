#include "rankgrad/policy.hpp"

#include <cmath>

namespace rankgrad {

namespace {
constexpr double kDummyClampTol = 1e-12;
}

double pairwise_prob(double lambda_i, double lambda_j) {
  double x = lambda_i - lambda_j;
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double condition2_threshold(std::uint32_t m) {
  if (m < 2) throw std::invalid_argument("condition2_threshold: m must be at least 2");
  double root = std::pow(static_cast<double>(m), 1.0 / (m - 1.0));
  return std::log(root - 1.0);
}

std::vector<double> pairwise_action_probs(std::span<const double> lambdas, bool with_dummy) {
  const std::size_t m = lambdas.size();
  if (m < 2) throw std::invalid_argument("pairwise_action_probs: need at least 2 actions");
  std::vector<double> probs(m, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      probs[i] *= pairwise_prob(lambdas[i], lambdas[j]);
    }
  }
  if (!with_dummy) return probs;
  double total = 0.0;
  for (double p : probs) total += p;
  double dummy = 1.0 - total;
  if (dummy < 0.0) {
    if (dummy < -kDummyClampTol) {
      throw Condition2Violation("pairwise probabilities sum to " + std::to_string(total) +
                                " > 1; score gaps violate the dummy-completion condition");
    }
    dummy = 0.0;
  }
  probs.push_back(dummy);
  return probs;
}

std::vector<double> listwise_probs(std::span<const double> lambdas, double temperature) {
  const std::size_t m = lambdas.size();
  if (m == 0) throw std::invalid_argument("listwise_probs: empty score vector");
  if (!(temperature > 0.0)) throw std::invalid_argument("listwise_probs: temperature must be > 0");
  double mx = lambdas[0];
  for (double v : lambdas) mx = std::max(mx, v);
  std::vector<double> probs(m);
  double z = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    probs[i] = std::exp((lambdas[i] - mx) / temperature);
    z += probs[i];
  }
  for (auto& p : probs) p /= z;
  return probs;
}

ActionId argmax_action(std::span<const double> lambdas) {
  if (lambdas.empty()) throw std::invalid_argument("argmax_action: empty score vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < lambdas.size(); ++i) {
    if (lambdas[i] > lambdas[best]) best = i;
  }
  return static_cast<ActionId>(best);
}

std::vector<double> PairwisePolicy::action_probs(StateId s) const {
  auto lam = model->forward(s);
  auto probs = pairwise_action_probs(lam, dummy_action);
  if (dummy_action) probs.pop_back();  // validated above; dummy is not executable
  return probs;
}

std::vector<double> ListwisePolicy::action_probs(StateId s) const {
  return listwise_probs(model->forward(s), temperature);
}

namespace {

std::vector<double> real_action_probs(const AnyPolicy& policy, StateId s) {
  return std::visit([&](const auto& p) { return p.action_probs(s); }, policy);
}

}  // namespace

ActionId select_action(const AnyPolicy& policy, StateId s, SelectMode mode, std::mt19937_64& rng) {
  const LambdaModel* model = policy_model(policy);
  if (mode == SelectMode::greedy) {
    return argmax_action(model->forward(s));
  }
  auto probs = real_action_probs(policy, s);
  double total = 0.0;
  for (double p : probs) total += p;
  if (!(total > 0.0)) throw std::runtime_error("select_action: degenerate action distribution");
  for (auto& p : probs) p /= total;
  return static_cast<ActionId>(sample_index(probs, rng));
}

double policy_prob(const AnyPolicy& policy, StateId s, ActionId a) {
  auto probs = real_action_probs(policy, s);
  if (a >= probs.size()) throw std::invalid_argument("policy_prob: action out of range");
  return probs[a];
}

double policy_log_prob(const AnyPolicy& policy, StateId s, ActionId a) {
  return std::log(policy_prob(policy, s, a));
}

double policy_path_prob(const AnyPolicy& policy, const Trajectory& traj) {
  double p = 1.0;
  for (const auto& st : traj.steps) p *= policy_prob(policy, st.state, st.action);
  return p;
}

const LambdaModel* policy_model(const AnyPolicy& policy) {
  return std::visit([](const auto& p) { return p.model; }, policy);
}

}  // namespace rankgrad
