#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rankgrad/envs.hpp"
#include "rankgrad/model.hpp"
#include "rankgrad/policy.hpp"

namespace rankgrad {

// One scalar objective evaluation with its parameter gradient. Every
// estimator returns the gradient of exactly the scalar in `loss`: trajectory
// surrogates are objectives (callers ascend them), hinge and cross-entropy
// are losses (callers descend them).
struct GradEstimate {
  GradVector grad;
  double loss = 0.0;
  bool at_kink = false;  // hinge only: some margin term sits on the boundary
};

// Ranking surrogate for one trajectory:
//   sum_t sum_{j != taken} (lambda_taken - lambda_j) / 2 * r(tau).
// Per-step upstream is +((m-1)/2) r(tau) at the taken action and -r(tau)/2
// elsewhere. A length-0 trajectory gives a zero estimate.
GradEstimate rpg_trajectory_grad(const LambdaModel& model, const Trajectory& traj);

// The exact pairwise log-likelihood objective the surrogate Taylor-expands:
//   sum_t sum_{j != taken} log sigmoid(lambda_taken - lambda_j) * r(tau).
GradEstimate rpg_exact_trajectory_grad(const LambdaModel& model, const Trajectory& traj);

// REINFORCE term for one trajectory under the listwise (softmax) policy:
//   sum_t log softmax(lambda)[a_t] * r(tau),
// upstream per step r(tau) * (onehot(a_t) - softmax(lambda)).
GradEstimate lpg_trajectory_grad(const LambdaModel& model, const Trajectory& traj);

struct SupervisedExample {
  StateId state = 0;
  ActionId action = 0;  // target
};

// Batch-mean pairwise hinge loss sum_{j != target} max(0, margin + lambda_j -
// lambda_target) with subgradient 0 at the kink. Terms within kink_tol of the
// boundary set at_kink (finite differencing is unreliable there).
GradEstimate hinge_loss_and_grad(const LambdaModel& model,
                                 std::span<const SupervisedExample> batch, double margin = 1.0,
                                 double kink_tol = 1e-7);

// Batch-mean -log softmax(lambda)[target].
GradEstimate cross_entropy_loss_and_grad(const LambdaModel& model,
                                         std::span<const SupervisedExample> batch);

struct DecompositionCheck {
  double per_step_mean = 0.0;   // (1/T) sum_t log pi(a_t | s_t)
  double frequency_form = 0.0;  // sum_{(s,a)} (count / T) log pi(a | s)
  double abs_diff = 0.0;
};

// The trajectory log-likelihood rewritten over state-action visit
// frequencies; the two forms agree to floating round-off for any policy.
DecompositionCheck loglikelihood_decomposition_check(const AnyPolicy& policy,
                                                     const Trajectory& traj);

// Streaming per-dimension mean and M2 (Welford). variance() uses the n-1
// denominator.
class VarianceAccumulator {
 public:
  explicit VarianceAccumulator(std::size_t dim = 0) : mean_(dim, 0.0), m2_(dim, 0.0) {}
  void add(std::span<const double> sample);
  std::size_t count() const { return count_; }
  const std::vector<double>& mean() const { return mean_; }
  std::vector<double> variance() const;

 private:
  std::size_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

enum class GradKind { policy_gradient, supervised };

struct VarianceReport {
  std::size_t samples = 0;
  std::vector<double> per_dim_variance;
  double max_variance = 0.0;
  std::size_t argmax_dim = 0;
  double c_hat = 0.0;
  double bound = 0.0;  // T^2 c_hat^2 R_max^2 (policy gradient) or c_hat^2 (supervised)
  bool pass = false;
};

// Empirical per-dimension variance across estimates, checked against the
// worst-case bound for the given estimator family. c_hat is the max observed
// infinity-norm of the per-step (policy gradient) or per-sample (supervised)
// score gradient, supplied by the caller from the same sample set.
VarianceReport grad_variance_report(std::span<const GradEstimate> estimates, double c_hat,
                                    double horizon, double r_max, GradKind kind);

// Max over the trajectory's steps of ||d log softmax(lambda)[a_t] / d
// theta||_inf; the per-sample constant the policy-gradient variance bound
// uses.
double max_step_log_grad_inf_norm(const LambdaModel& model, const Trajectory& traj);

// Same constant for one supervised example under the pairwise policy:
// ||d log pi_pairwise(a | s) / d theta||_inf.
double pairwise_log_grad_inf_norm(const LambdaModel& model, const SupervisedExample& ex);

enum class LossKind { rpg, rpg_exact, lpg, hinge, xent };

LossKind loss_kind_from_string(const std::string& s);
std::string to_string(LossKind k);

// Closure factories for finite-difference checking: the returned closure
// evaluates the chosen objective on captured data.
LossClosure trajectory_loss_closure(LossKind kind, Trajectory traj);
LossClosure supervised_loss_closure(LossKind kind, std::vector<SupervisedExample> batch,
                                    double margin = 1.0);

}  // namespace rankgrad
