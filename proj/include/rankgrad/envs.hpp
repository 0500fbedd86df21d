#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace rankgrad {

using StateId = std::uint32_t;
using ActionId = std::uint32_t;

struct TransitionEntry {
  StateId next = 0;
  double prob = 0.0;
};

// Finite-horizon tabular MDP. States and actions are dense ids. Per-state
// action masks are supported (dynamics[s].size() may differ across states);
// the algorithm layer requires a uniform action count and checks it at use.
struct MdpSpec {
  std::uint32_t state_count = 0;
  std::uint32_t max_actions = 0;  // m
  std::uint32_t horizon = 0;      // T, episode length cap
  std::vector<StateId> initial_states;
  std::vector<double> initial_probs;
  // dynamics[s][a]: sparse distribution over next states, rows sum to 1.
  std::vector<std::vector<std::vector<TransitionEntry>>> dynamics;
  std::vector<std::vector<double>> rewards;  // rewards[s][a], strictly positive
  std::vector<bool> terminal;
  std::string name;

  std::uint32_t action_count(StateId s) const { return static_cast<std::uint32_t>(dynamics[s].size()); }
  // Throws std::invalid_argument unless every dynamics row sums to 1 within
  // 1e-12, every reward is finite and > 0, and the initial distribution is a
  // nonempty distribution over valid states.
  void validate() const;
};

struct TrajectoryStep {
  StateId state = 0;
  ActionId action = 0;
  double reward = 0.0;
};

// trajectory_reward is accumulated in push order so that rollout sums and
// enumeration sums of the same path are bit-identical.
struct Trajectory {
  std::vector<TrajectoryStep> steps;
  double trajectory_reward = 0.0;

  void push(StateId s, ActionId a, double r) {
    steps.push_back({s, a, r});
    trajectory_reward += r;
  }
  std::size_t length() const { return steps.size(); }
  // Canonical byte key: (state, action) pairs as unsigned 32-bit
  // little-endian integers, concatenated in step order.
  std::string key() const;
};

// Seeded environment instance over an MdpSpec. reset() starts a new episode
// on the same RNG stream; step() draws the next state and reports reward and
// episode termination (terminal state reached or horizon exhausted).
class EnvState {
 public:
  EnvState(const MdpSpec& spec, std::uint64_t seed);

  struct StepResult {
    StateId next = 0;
    double reward = 0.0;
    bool done = false;
  };

  void reset();
  StepResult step(ActionId a);

  StateId state() const { return state_; }
  std::uint32_t steps_taken() const { return steps_; }
  bool done() const { return done_; }
  const MdpSpec& spec() const { return *spec_; }
  std::mt19937_64& rng() { return rng_; }

 private:
  const MdpSpec* spec_;
  std::mt19937_64 rng_;
  StateId state_ = 0;
  std::uint32_t steps_ = 0;
  bool done_ = false;
};

// Convenience alias for the op-style entry point.
EnvState reset(const MdpSpec& spec, std::uint64_t seed);

// Full binary tree (or forest) with breadth-first state numbering: level d
// holds root_count * 2^d states, children of node j at level d are nodes 2j
// and 2j+1 at level d+1. Episodes run exactly `depth` steps, actions are
// {left, right}, and every leaf is terminal, so the environment has exactly
// root_count * 2^depth distinct trajectories.
//
// leaf_rewards is either one value per leaf (global leaf order) or a
// two-element shorthand {optimal reward, other reward} broadcast using
// optimal_leaves. Transitions into internal nodes pay intermediate_reward (a
// tiny positive epsilon so rewards stay strictly positive); the transition
// into leaf l pays leaf_rewards[l].
struct BinaryTreeParams {
  std::uint32_t depth = 1;
  std::uint32_t root_count = 1;
  std::vector<std::uint32_t> optimal_leaves;  // empty: derived as argmax of leaf_rewards
  std::vector<double> leaf_rewards;
  double intermediate_reward = 1e-9;
};

MdpSpec make_binary_tree(const BinaryTreeParams& params);

// Stochastic chain: states 0..length-1, action 0 moves toward length-1 and
// action 1 moves toward 0, each succeeding with probability move_prob and
// staying put otherwise. The final state is terminal. Rewards depend on
// (state, action) only: step_reward everywhere except the forward action
// out of state length-2, which pays goal_reward.
struct ChainParams {
  std::uint32_t length = 5;
  std::uint32_t horizon = 8;
  double move_prob = 0.7;
  double goal_reward = 1.0;
  double step_reward = 1e-9;
};

MdpSpec make_chain(const ChainParams& params);

// Deterministic gridworld with 4 actions (up, down, left, right); moving off
// the grid stays in place. Start is (0,0), the goal cell (width-1, height-1)
// is terminal, and the move that lands on the goal pays goal_reward.
struct GridParams {
  std::uint32_t width = 3;
  std::uint32_t height = 3;
  std::uint32_t horizon = 8;
  double goal_reward = 1.0;
  double step_reward = 1e-9;
};

MdpSpec make_grid(const GridParams& params);

// Parses a suite environment name:
//   tree:T=<int>,roots=<int>,opt=<csv-leaf-ids>,rewards=<csv>[,eps=<real>]
//   chain:len=<int>,T=<int>,p=<real>[,goal=<real>,step=<real>]
//   grid:w=<int>,h=<int>,T=<int>[,goal=<real>,step=<real>]
// Optional suffix ",normalize=on" rescales rewards so R_max = 1.
MdpSpec make_env(const std::string& name);

struct EnumeratedTrajectory {
  Trajectory traj;
  double dynamics_prob = 0.0;  // p(s_1) * prod p(s_{t+1} | s_t, a_t)
};

// Depth-first enumeration of all (action, next-state) branchings up to the
// horizon. Throws std::runtime_error if more than `cap` trajectories exist.
std::vector<EnumeratedTrajectory> enumerate_trajectories(const MdpSpec& spec,
                                                         std::size_t cap = 1000000);

// Exact max over enumerate_trajectories of trajectory_reward.
double max_trajectory_reward(const MdpSpec& spec, std::size_t cap = 1000000);

// Scales every reward by 1 / max_trajectory_reward(spec).
MdpSpec normalize_rewards(const MdpSpec& spec, std::size_t cap = 1000000);

// True when every initial state has at least one trajectory with
// trajectory_reward >= c (the premise behind a single global threshold).
bool covers_all_initial_states(const MdpSpec& spec, double c, std::size_t cap = 1000000);

// Draws an index from an explicit probability vector (linear scan over the
// CDF; deterministic for a fixed RNG stream).
std::size_t sample_index(const std::vector<double>& probs, std::mt19937_64& rng);

}  // namespace rankgrad
