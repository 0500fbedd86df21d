#pragma once

#include <random>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "rankgrad/envs.hpp"
#include "rankgrad/model.hpp"

namespace rankgrad {

// Raised when the pairwise products sum past 1 by more than tolerance, i.e.
// the score range violates the sufficient condition for the dummy-completed
// distribution to be valid.
class Condition2Violation : public std::runtime_error {
 public:
  explicit Condition2Violation(const std::string& msg) : std::runtime_error(msg) {}
};

// p_ij = sigmoid(lambda_i - lambda_j), evaluated on the sign-split form so
// large magnitudes neither overflow nor collapse prematurely.
double pairwise_prob(double lambda_i, double lambda_j);

// Smallest pairwise score gap lambda_m for which m actions are guaranteed to
// satisfy sum_i prod_j p_ij <= 1: ln(m^(1/(m-1)) - 1). Negative for m >= 3
// and increasing toward 0 as m grows.
double condition2_threshold(std::uint32_t m);

// Action probabilities of the pairwise ranking policy:
//   pi(a_i) = prod_{j != i} sigmoid(lambda_i - lambda_j).
// With with_dummy, appends pi(a_d) = 1 - sum_i pi(a_i) as a final
// bookkeeping entry; a dummy within [-1e-12, 0) is clamped to 0, anything
// more negative raises Condition2Violation. The dummy is never executable.
std::vector<double> pairwise_action_probs(std::span<const double> lambdas, bool with_dummy = false);

// Max-subtracted softmax over lambdas / temperature.
std::vector<double> listwise_probs(std::span<const double> lambdas, double temperature = 1.0);

// Lowest index wins ties.
ActionId argmax_action(std::span<const double> lambdas);

struct PairwisePolicy {
  const LambdaModel* model = nullptr;
  bool dummy_action = false;

  std::vector<double> lambdas(StateId s) const { return model->forward(s); }
  // Real-action probabilities only (dummy, when enabled, is checked but not
  // returned; it is bookkeeping, never a sampleable action).
  std::vector<double> action_probs(StateId s) const;
};

struct ListwisePolicy {
  const LambdaModel* model = nullptr;
  double temperature = 1.0;

  std::vector<double> lambdas(StateId s) const { return model->forward(s); }
  std::vector<double> action_probs(StateId s) const;
};

using AnyPolicy = std::variant<PairwisePolicy, ListwisePolicy>;

enum class SelectMode { greedy, sample };

// greedy: argmax over lambdas with lowest-index tie-break. sample: draw from
// the policy's real-action probabilities renormalized to sum to 1.
ActionId select_action(const AnyPolicy& policy, StateId s, SelectMode mode, std::mt19937_64& rng);

// Probability (and log) the policy assigns to a real action.
double policy_prob(const AnyPolicy& policy, StateId s, ActionId a);
double policy_log_prob(const AnyPolicy& policy, StateId s, ActionId a);

// prod_t pi(a_t | s_t) along a trajectory.
double policy_path_prob(const AnyPolicy& policy, const Trajectory& traj);

const LambdaModel* policy_model(const AnyPolicy& policy);

}  // namespace rankgrad
