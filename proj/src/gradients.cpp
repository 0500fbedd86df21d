#include "rankgrad/gradients.hpp"

#include "rankgrad/config.hpp"
#include <cmath>
#include <map>
#include <stdexcept>

namespace rankgrad {

namespace {

// log(sigmoid(x)) without overflow on either tail.
double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

std::vector<double> log_softmax(const std::vector<double>& lam) {
  double mx = lam[0];
  for (double v : lam) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : lam) z += std::exp(v - mx);
  double log_z = std::log(z);
  std::vector<double> out(lam.size());
  for (std::size_t i = 0; i < lam.size(); ++i) out[i] = lam[i] - mx - log_z;
  return out;
}

void check_action(const std::vector<double>& lam, ActionId a, const char* who) {
  if (a >= lam.size()) {
    throw std::invalid_argument(std::string(who) + ": action index out of model range");
  }
}

}  // namespace

GradEstimate rpg_trajectory_grad(const LambdaModel& model, const Trajectory& traj) {
  GradEstimate est;
  est.grad = GradVector(model.param_count());
  const double r = traj.trajectory_reward;
  for (const auto& st : traj.steps) {
    auto lam = model.forward(st.state);
    check_action(lam, st.action, "rpg_trajectory_grad");
    const std::size_t m = lam.size();
    std::vector<double> upstream(m, -0.5 * r);
    upstream[st.action] = 0.5 * r * static_cast<double>(m - 1);
    for (std::size_t j = 0; j < m; ++j) {
      if (j == st.action) continue;
      est.loss += 0.5 * (lam[st.action] - lam[j]) * r;
    }
    est.grad.add_scaled(model.backward(st.state, upstream), 1.0);
  }
  est.grad.accumulated = traj.steps.size();
  return est;
}

GradEstimate rpg_exact_trajectory_grad(const LambdaModel& model, const Trajectory& traj) {
  GradEstimate est;
  est.grad = GradVector(model.param_count());
  const double r = traj.trajectory_reward;
  for (const auto& st : traj.steps) {
    auto lam = model.forward(st.state);
    check_action(lam, st.action, "rpg_exact_trajectory_grad");
    const std::size_t m = lam.size();
    std::vector<double> upstream(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      if (j == st.action) continue;
      double gap = lam[st.action] - lam[j];
      est.loss += log_sigmoid(gap) * r;
      // d log sigmoid(gap) / d gap = sigmoid(-gap)
      double s = pairwise_prob(lam[j], lam[st.action]);
      upstream[st.action] += r * s;
      upstream[j] -= r * s;
    }
    est.grad.add_scaled(model.backward(st.state, upstream), 1.0);
  }
  est.grad.accumulated = traj.steps.size();
  return est;
}

GradEstimate lpg_trajectory_grad(const LambdaModel& model, const Trajectory& traj) {
  GradEstimate est;
  est.grad = GradVector(model.param_count());
  const double r = traj.trajectory_reward;
  for (const auto& st : traj.steps) {
    auto lam = model.forward(st.state);
    check_action(lam, st.action, "lpg_trajectory_grad");
    auto logp = log_softmax(lam);
    est.loss += logp[st.action] * r;
    std::vector<double> upstream(lam.size());
    for (std::size_t j = 0; j < lam.size(); ++j) {
      double p = std::exp(logp[j]);
      upstream[j] = r * ((j == st.action ? 1.0 : 0.0) - p);
    }
    est.grad.add_scaled(model.backward(st.state, upstream), 1.0);
  }
  est.grad.accumulated = traj.steps.size();
  return est;
}

GradEstimate hinge_loss_and_grad(const LambdaModel& model,
                                 std::span<const SupervisedExample> batch, double margin,
                                 double kink_tol) {
  if (batch.empty()) throw std::invalid_argument("hinge_loss_and_grad: empty batch");
  GradEstimate est;
  est.grad = GradVector(model.param_count());
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    auto lam = model.forward(ex.state);
    check_action(lam, ex.action, "hinge_loss_and_grad");
    const std::size_t m = lam.size();
    std::vector<double> upstream(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      if (j == ex.action) continue;
      double v = margin + lam[j] - lam[ex.action];
      if (std::abs(v) <= kink_tol) est.at_kink = true;
      if (v > 0.0) {
        est.loss += v * inv_b;
        upstream[j] += inv_b;
        upstream[ex.action] -= inv_b;
      }
    }
    est.grad.add_scaled(model.backward(ex.state, upstream), 1.0);
  }
  est.grad.accumulated = batch.size();
  return est;
}

GradEstimate cross_entropy_loss_and_grad(const LambdaModel& model,
                                         std::span<const SupervisedExample> batch) {
  if (batch.empty()) throw std::invalid_argument("cross_entropy_loss_and_grad: empty batch");
  GradEstimate est;
  est.grad = GradVector(model.param_count());
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    auto lam = model.forward(ex.state);
    check_action(lam, ex.action, "cross_entropy_loss_and_grad");
    auto logp = log_softmax(lam);
    est.loss += -logp[ex.action] * inv_b;
    std::vector<double> upstream(lam.size());
    for (std::size_t j = 0; j < lam.size(); ++j) {
      upstream[j] = (std::exp(logp[j]) - (j == ex.action ? 1.0 : 0.0)) * inv_b;
    }
    est.grad.add_scaled(model.backward(ex.state, upstream), 1.0);
  }
  est.grad.accumulated = batch.size();
  return est;
}

DecompositionCheck loglikelihood_decomposition_check(const AnyPolicy& policy,
                                                     const Trajectory& traj) {
  if (traj.steps.empty()) {
    throw std::invalid_argument("loglikelihood_decomposition_check: empty trajectory");
  }
  const double T = static_cast<double>(traj.steps.size());
  DecompositionCheck out;
  for (const auto& st : traj.steps) {
    out.per_step_mean += policy_log_prob(policy, st.state, st.action);
  }
  out.per_step_mean /= T;
  std::map<std::pair<StateId, ActionId>, std::size_t> counts;
  for (const auto& st : traj.steps) ++counts[{st.state, st.action}];
  for (const auto& [sa, n] : counts) {
    out.frequency_form +=
        (static_cast<double>(n) / T) * policy_log_prob(policy, sa.first, sa.second);
  }
  out.abs_diff = std::abs(out.per_step_mean - out.frequency_form);
  return out;
}

void VarianceAccumulator::add(std::span<const double> sample) {
  if (mean_.empty()) {
    mean_.assign(sample.size(), 0.0);
    m2_.assign(sample.size(), 0.0);
  }
  if (sample.size() != mean_.size()) {
    throw std::invalid_argument("VarianceAccumulator: dimension mismatch");
  }
  ++count_;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    double delta = sample[i] - mean_[i];
    mean_[i] += delta / static_cast<double>(count_);
    m2_[i] += delta * (sample[i] - mean_[i]);
  }
}

std::vector<double> VarianceAccumulator::variance() const {
  if (count_ < 2) throw std::logic_error("VarianceAccumulator: need at least 2 samples");
  std::vector<double> v(mean_.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = m2_[i] / static_cast<double>(count_ - 1);
  return v;
}

VarianceReport grad_variance_report(std::span<const GradEstimate> estimates, double c_hat,
                                    double horizon, double r_max, GradKind kind) {
  if (estimates.size() < 2) {
    throw std::invalid_argument("grad_variance_report: need at least 2 estimates");
  }
  VarianceAccumulator acc(estimates.front().grad.size());
  for (const auto& est : estimates) {
    if (!est.grad.all_finite()) {
      throw std::invalid_argument("grad_variance_report: non-finite gradient sample");
    }
    acc.add(est.grad.values);
  }
  VarianceReport rep;
  rep.samples = estimates.size();
  rep.per_dim_variance = acc.variance();
  for (std::size_t i = 0; i < rep.per_dim_variance.size(); ++i) {
    if (rep.per_dim_variance[i] > rep.max_variance) {
      rep.max_variance = rep.per_dim_variance[i];
      rep.argmax_dim = i;
    }
  }
  rep.c_hat = c_hat;
  rep.bound = kind == GradKind::policy_gradient
                  ? horizon * horizon * c_hat * c_hat * r_max * r_max
                  : c_hat * c_hat;
  rep.pass = rep.max_variance <= rep.bound;
  return rep;
}

double max_step_log_grad_inf_norm(const LambdaModel& model, const Trajectory& traj) {
  double worst = 0.0;
  for (const auto& st : traj.steps) {
    auto lam = model.forward(st.state);
    check_action(lam, st.action, "max_step_log_grad_inf_norm");
    auto logp = log_softmax(lam);
    std::vector<double> upstream(lam.size());
    for (std::size_t j = 0; j < lam.size(); ++j) {
      upstream[j] = (j == st.action ? 1.0 : 0.0) - std::exp(logp[j]);
    }
    worst = std::max(worst, model.backward(st.state, upstream).inf_norm());
  }
  return worst;
}

double pairwise_log_grad_inf_norm(const LambdaModel& model, const SupervisedExample& ex) {
  auto lam = model.forward(ex.state);
  check_action(lam, ex.action, "pairwise_log_grad_inf_norm");
  const std::size_t m = lam.size();
  std::vector<double> upstream(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    if (j == ex.action) continue;
    // d/d lambda of log prod_j sigmoid(lambda_i - lambda_j)
    double s = pairwise_prob(lam[j], lam[ex.action]);
    upstream[ex.action] += s;
    upstream[j] -= s;
  }
  return model.backward(ex.state, upstream).inf_norm();
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "rpg") return LossKind::rpg;
  if (s == "rpg-exact") return LossKind::rpg_exact;
  if (s == "lpg") return LossKind::lpg;
  if (s == "hinge") return LossKind::hinge;
  if (s == "xent") return LossKind::xent;
  throw ConfigError("unknown loss kind: " + s);
}

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::rpg: return "rpg";
    case LossKind::rpg_exact: return "rpg-exact";
    case LossKind::lpg: return "lpg";
    case LossKind::hinge: return "hinge";
    case LossKind::xent: return "xent";
  }
  return "?";
}

LossClosure trajectory_loss_closure(LossKind kind, Trajectory traj) {
  if (kind != LossKind::rpg && kind != LossKind::rpg_exact && kind != LossKind::lpg) {
    throw std::invalid_argument("trajectory_loss_closure: not a trajectory objective");
  }
  return [kind, traj = std::move(traj)](const LambdaModel& model) {
    GradEstimate est;
    switch (kind) {
      case LossKind::rpg: est = rpg_trajectory_grad(model, traj); break;
      case LossKind::rpg_exact: est = rpg_exact_trajectory_grad(model, traj); break;
      default: est = lpg_trajectory_grad(model, traj); break;
    }
    return LossEval{est.loss, std::move(est.grad), est.at_kink};
  };
}

LossClosure supervised_loss_closure(LossKind kind, std::vector<SupervisedExample> batch,
                                    double margin) {
  if (kind != LossKind::hinge && kind != LossKind::xent) {
    throw std::invalid_argument("supervised_loss_closure: not a supervised loss");
  }
  return [kind, batch = std::move(batch), margin](const LambdaModel& model) {
    GradEstimate est = kind == LossKind::hinge ? hinge_loss_and_grad(model, batch, margin)
                                               : cross_entropy_loss_and_grad(model, batch);
    return LossEval{est.loss, std::move(est.grad), est.at_kink};
  };
}

}  // namespace rankgrad
