#pragma once

#include <deque>
#include <limits>
#include <memory>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "rankgrad/config.hpp"
#include "rankgrad/envs.hpp"
#include "rankgrad/gradients.hpp"
#include "rankgrad/model.hpp"
#include "rankgrad/policy.hpp"
#include "rankgrad/runlog.hpp"

namespace rankgrad {

// Trajectory reward shaping: w(tau) = 1 iff the trajectory clears the
// near-optimality threshold. In fixed mode the threshold is the constant c
// (chosen as R_max - epsilon when R_max is known). In adaptive mode each
// initial state tracks the best trajectory reward seen so far, starting from
// `adaptive_floor`; a trajectory is accepted when it matches its root's
// running best.
struct ShapingConfig {
  enum class Mode { fixed, adaptive };
  Mode mode = Mode::fixed;
  double threshold = 0.0;  // c
  double adaptive_floor = 0.0;
  std::unordered_map<StateId, double> per_initial_threshold;

  double current_threshold(StateId initial_state) const;
};

// Returns w(tau) in {0, 1}; adaptive mode first raises the root's threshold
// to max(current, r(tau)), then tests r(tau) against it.
int shape(const Trajectory& traj, ShapingConfig& cfg);

struct Transition {
  StateId state = 0;
  ActionId action = 0;
  double reward = 0.0;
  StateId next = 0;
  bool done = false;
};

// FIFO exploration buffer plus the near-optimal supervision buffer of
// (state, target-action) pairs. Duplicate trajectories are stored again by
// default (their pairs are weighted by visitation); with unique_trajectories
// a trajectory key already present contributes no new pairs. A key set
// tracks distinct near-optimal trajectories either way.
class ReplayBuffers {
 public:
  ReplayBuffers(std::size_t regular_capacity, std::size_t near_optimal_capacity,
                bool unique_trajectories = false);

  void insert_regular(const Transition& t);
  // Applies shaping; on acceptance appends every (s, a) of the trajectory to
  // the near-optimal buffer (subject to uniqueness mode) and registers its
  // key. Returns whether the trajectory was accepted.
  bool insert_if_near_optimal(const Trajectory& traj, ShapingConfig& shaping);

  // Uniform with-replacement sample of supervision pairs. Empty buffer is an
  // error; callers use size() to skip.
  std::vector<SupervisedExample> sample_batch(std::size_t batch, std::mt19937_64& rng) const;

  std::size_t regular_size() const { return regular_.size(); }
  std::size_t near_optimal_size() const { return near_optimal_.size(); }
  std::size_t distinct_near_optimal() const { return keys_.size(); }
  std::uint64_t trajectory_inserts() const { return inserts_; }
  const std::deque<Transition>& regular() const { return regular_; }

  // Replays stored near-optimal entries against the spec: recomputes each
  // source trajectory's reward from the spec's reward table and checks it
  // still clears the shaping threshold for its root.
  bool audit_purity(const MdpSpec& spec, const ShapingConfig& shaping) const;

 private:
  struct NearOptEntry {
    SupervisedExample example;
    std::shared_ptr<const Trajectory> source;
  };

  std::size_t regular_capacity_;
  std::size_t near_optimal_capacity_;
  bool unique_trajectories_;
  std::deque<Transition> regular_;
  std::deque<NearOptEntry> near_optimal_;
  std::unordered_set<std::string> keys_;
  std::uint64_t inserts_ = 0;
};

enum class ExplorerKind { random, eps_greedy, epg };

ExplorerKind explorer_kind_from_string(const std::string& s);

// random: uniform over actions. eps_greedy: with probability epsilon a
// uniform action, otherwise argmax of the learner's scores. epg: sample from
// the softmax of a separate exploration model trained by cross-entropy on
// the near-optimal buffer.
struct Explorer {
  ExplorerKind kind = ExplorerKind::random;
  double epsilon = 0.1;
  std::unique_ptr<LambdaModel> epg_model;  // epg only
};

// One exploration transition: choose an action, step the environment, store
// the transition in the regular buffer.
Transition explore_step(Explorer& explorer, EnvState& env, ReplayBuffers& buffers,
                        const LambdaModel& learner, std::mt19937_64& rng);

struct TrainRunConfig {
  std::string env_name;
  std::uint64_t seed = 1;
  LossKind loss = LossKind::hinge;  // hinge or xent
  ExplorerKind explorer = ExplorerKind::random;
  double epsilon = 0.1;
  ModelKind model = ModelKind::tabular;
  std::vector<std::uint32_t> hidden;  // mlp only
  bool squash = false;
  double squash_cap = 0.5;
  double temperature = 1.0;
  double margin = 1.0;
  double lr = 1e-2;
  double init_half_range = 0.05;
  std::uint64_t max_episodes = 1000;
  std::uint64_t max_env_steps = 0;  // 0: no step cap
  std::size_t batch = 32;
  std::uint64_t update_period = 4;
  std::uint64_t evaluation_period = 1000;
  std::uint32_t eval_episodes = 20;
  std::size_t capacity_regular = 100000;
  std::size_t capacity_nearopt = 100000;
  bool unique_trajectories = false;
  // Threshold c; NaN means "use R_max - threshold_epsilon" computed by
  // enumeration ("c = rmax" in config files).
  double threshold = std::numeric_limits<double>::quiet_NaN();
  double threshold_epsilon = 0.0;
  ShapingConfig::Mode shaping_mode = ShapingConfig::Mode::fixed;
  double adaptive_floor = 0.0;
  // Stop once every evaluation episode returns at least this; NaN: use c.
  double stop_target = std::numeric_limits<double>::quiet_NaN();
  std::string out_dir;  // empty: no checkpoint files written

  void validate(const MdpSpec& spec) const;
};

// Reads the flat key=value form (keys documented in the README); unknown
// keys are rejected.
TrainRunConfig train_config_from(const Config& cfg);
Config to_config(const TrainRunConfig& cfg);

struct EvalResult {
  double mean = 0.0;
  double min = 0.0;
  std::vector<double> returns;
};

// Greedy (or sampled) rollouts of the model. Deterministic given the seed.
EvalResult evaluate(const LambdaModel& model, const MdpSpec& spec, std::uint32_t episodes,
                    SelectMode mode, std::uint64_t seed);

// Rolls one episode with the given policy and select mode.
Trajectory rollout(const MdpSpec& spec, const AnyPolicy& policy, SelectMode mode, EnvState& env);

// One supervised step: uniform batch from the near-optimal buffer, hinge or
// cross-entropy gradient, SGD update. Returns nothing when the buffer is
// still empty (the caller simply skips).
std::optional<GradEstimate> supervision_update(LambdaModel& model, ReplayBuffers& buffers,
                                               const TrainRunConfig& cfg, std::mt19937_64& rng);

// Two-stage off-policy loop: explore with the configured explorer, store
// transitions, shape finished episodes into the near-optimal buffer, run a
// supervised update every update_period environment steps, evaluate greedily
// every evaluation_period steps, and stop early once every evaluation
// episode reaches the stop target (no model mutations after that point).
RunLog train(const TrainRunConfig& cfg, const MdpSpec& spec);

}  // namespace rankgrad
