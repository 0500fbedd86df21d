#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rankgrad/envs.hpp"

namespace rankgrad {

enum class ModelKind : std::uint8_t { tabular = 0, linear = 1, mlp = 2 };

ModelKind model_kind_from_string(const std::string& s);
std::string to_string(ModelKind k);

// Gradient w.r.t. the flat parameter vector, plus the number of single-sample
// contributions accumulated into it.
struct GradVector {
  std::vector<double> values;
  std::size_t accumulated = 0;

  explicit GradVector(std::size_t dim = 0) : values(dim, 0.0) {}
  std::size_t size() const { return values.size(); }
  void add_scaled(const GradVector& other, double scale);
  void scale(double factor);
  double inf_norm() const;
  bool all_finite() const;
};

// Architecture of a score model producing one lambda per action.
//   tabular: theta is a state_count x actions table, looked up by state id.
//   linear:  lambda = W x with W actions x input_dim (no bias).
//   mlp:     tanh hidden layers, linear output.
// one_hot_input: state ids are embedded as one-hot vectors of input_dim.
// squash: lambda = squash_cap * sigmoid(z) elementwise, keeping every score
// inside [0, squash_cap].
struct ModelArch {
  ModelKind kind = ModelKind::tabular;
  std::uint32_t input_dim = 0;  // state_count for tabular / one-hot inputs
  std::uint32_t actions = 0;    // m
  std::vector<std::uint32_t> hidden;
  bool one_hot_input = true;
  bool squash = false;
  double squash_cap = 0.5;

  void validate() const;
  std::size_t param_count() const;
};

class LambdaModel {
 public:
  explicit LambdaModel(const ModelArch& arch);  // zero-initialized parameters

  // Uniform [-half_range, half_range] init drawn from the given seed.
  static LambdaModel random_init(const ModelArch& arch, std::uint64_t seed,
                                 double half_range = 0.05);

  const ModelArch& arch() const { return arch_; }
  std::size_t param_count() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  // Lambda scores for a state id (tabular lookup, or one-hot features).
  std::vector<double> forward(StateId state) const;
  // Lambda scores for an explicit feature vector (linear / mlp only).
  std::vector<double> forward(std::span<const double> features) const;

  // d(upstream . lambda)/d(theta), as a flat gradient.
  GradVector backward(StateId state, std::span<const double> upstream) const;
  GradVector backward(std::span<const double> features, std::span<const double> upstream) const;

 private:
  std::vector<double> forward_impl(const double* features, std::vector<std::vector<double>>* acts) const;
  GradVector backward_impl(const double* features, std::span<const double> upstream) const;
  std::vector<double> one_hot(StateId state) const;

  ModelArch arch_;
  std::vector<double> params_;
};

// Plain SGD step: theta -= lr * grad. With momentum > 0 the optimizer keeps a
// velocity buffer: v = momentum * v + grad; theta -= lr * v.
void sgd_update(LambdaModel& model, const GradVector& grad, double lr);

struct SgdOptimizer {
  double lr = 1e-2;
  double momentum = 0.0;
  std::vector<double> velocity;

  void step(LambdaModel& model, const GradVector& grad);
};

// A differentiable scalar evaluated on the model: value, analytic gradient,
// and whether the evaluation sits on a subgradient kink (finite differencing
// is unreliable there and the checker reports the draw as excluded).
struct LossEval {
  double loss = 0.0;
  GradVector grad;
  bool at_kink = false;
};

using LossClosure = std::function<LossEval(const LambdaModel&)>;

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;
  bool pass = false;
  bool kink_excluded = false;  // comparison skipped, loss not differentiable here
  bool nonfinite = false;
  std::vector<double> analytic;
  std::vector<double> numeric;
  std::vector<double> rel_error;
};

// Central differences over every coordinate: (f(t+h) - f(t-h)) / 2h against
// the closure's analytic gradient. Relative error uses max(|a|, |n|) as the
// denominator; coordinates where both magnitudes are below 1e-6 count as
// exact (finite differencing is pure noise there).
FiniteDiffReport finite_difference_check(const LambdaModel& model, const LossClosure& loss,
                                         double tolerance, double step = 1e-5);

// Binary checkpoint: magic "RPGC", format version u16, kind tag u8,
// architecture dims (u32 count, then u32 each), parameters as little-endian
// IEEE f64 in declaration order. Round-trip is bit-exact. Squashing is run
// configuration, not learned state, so it is reapplied by the caller.
void save_checkpoint(const LambdaModel& model, const std::string& path);
LambdaModel load_checkpoint(const std::string& path, bool squash = false, double squash_cap = 0.5);

}  // namespace rankgrad
