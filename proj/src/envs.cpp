#include "rankgrad/envs.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <stdexcept>

#include "rankgrad/config.hpp"

namespace rankgrad {

namespace {

constexpr double kRowSumTol = 1e-12;

void append_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

}  // namespace

void MdpSpec::validate() const {
  if (state_count == 0) throw std::invalid_argument("MdpSpec: state_count must be positive");
  if (horizon == 0) throw std::invalid_argument("MdpSpec: horizon must be positive");
  if (max_actions < 2) throw std::invalid_argument("MdpSpec: max_actions must be at least 2");
  if (dynamics.size() != state_count || rewards.size() != state_count ||
      terminal.size() != state_count) {
    throw std::invalid_argument("MdpSpec: per-state tables must have state_count entries");
  }
  if (initial_states.empty() || initial_states.size() != initial_probs.size()) {
    throw std::invalid_argument("MdpSpec: initial distribution malformed");
  }
  double p0 = 0.0;
  for (std::size_t i = 0; i < initial_states.size(); ++i) {
    if (initial_states[i] >= state_count) {
      throw std::invalid_argument("MdpSpec: initial state out of range");
    }
    if (!(initial_probs[i] >= 0.0) || !std::isfinite(initial_probs[i])) {
      throw std::invalid_argument("MdpSpec: initial probabilities must be nonnegative");
    }
    p0 += initial_probs[i];
  }
  if (std::abs(p0 - 1.0) > kRowSumTol) {
    throw std::invalid_argument("MdpSpec: initial probabilities must sum to 1");
  }
  for (StateId s = 0; s < state_count; ++s) {
    if (rewards[s].size() != dynamics[s].size()) {
      throw std::invalid_argument("MdpSpec: rewards and dynamics disagree on action count");
    }
    if (dynamics[s].size() > max_actions) {
      throw std::invalid_argument("MdpSpec: state exceeds max_actions");
    }
    if (!terminal[s] && dynamics[s].empty()) {
      throw std::invalid_argument("MdpSpec: nonterminal state with no actions");
    }
    for (std::size_t a = 0; a < dynamics[s].size(); ++a) {
      double row = 0.0;
      for (const auto& e : dynamics[s][a]) {
        if (e.next >= state_count) throw std::invalid_argument("MdpSpec: next state out of range");
        if (!(e.prob >= 0.0) || !std::isfinite(e.prob)) {
          throw std::invalid_argument("MdpSpec: transition probabilities must be nonnegative");
        }
        row += e.prob;
      }
      if (std::abs(row - 1.0) > kRowSumTol) {
        throw std::invalid_argument("MdpSpec: dynamics row must sum to 1 within 1e-12");
      }
      if (!std::isfinite(rewards[s][a]) || rewards[s][a] <= 0.0) {
        throw std::invalid_argument("MdpSpec: rewards must be finite and strictly positive");
      }
    }
  }
}

std::string Trajectory::key() const {
  std::string out;
  out.reserve(steps.size() * 8);
  for (const auto& st : steps) {
    append_u32_le(out, st.state);
    append_u32_le(out, st.action);
  }
  return out;
}

std::size_t sample_index(const std::vector<double>& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;  // guard against rounding at u ~ 1
}

EnvState::EnvState(const MdpSpec& spec, std::uint64_t seed) : spec_(&spec), rng_(seed) {
  spec.validate();
  reset();
}

void EnvState::reset() {
  std::size_t idx = sample_index(spec_->initial_probs, rng_);
  state_ = spec_->initial_states[idx];
  steps_ = 0;
  done_ = spec_->terminal[state_];
}

EnvState::StepResult EnvState::step(ActionId a) {
  if (done_) throw std::logic_error("EnvState::step called on a finished episode");
  if (a >= spec_->action_count(state_)) {
    throw std::invalid_argument("EnvState::step: action out of range for state");
  }
  const auto& row = spec_->dynamics[state_][a];
  std::vector<double> probs;
  probs.reserve(row.size());
  for (const auto& e : row) probs.push_back(e.prob);
  StateId next = row[sample_index(probs, rng_)].next;
  double r = spec_->rewards[state_][a];
  ++steps_;
  state_ = next;
  done_ = spec_->terminal[next] || steps_ >= spec_->horizon;
  return {next, r, done_};
}

EnvState reset(const MdpSpec& spec, std::uint64_t seed) { return EnvState(spec, seed); }

MdpSpec make_binary_tree(const BinaryTreeParams& params) {
  if (params.depth == 0) throw std::invalid_argument("binary tree: depth must be positive");
  if (params.root_count == 0) throw std::invalid_argument("binary tree: root_count must be positive");
  if (params.depth > 20) throw std::invalid_argument("binary tree: depth too large for desk scale");
  if (!(params.intermediate_reward > 0.0)) {
    throw std::invalid_argument("binary tree: intermediate_reward must be strictly positive");
  }
  const std::uint32_t R = params.root_count;
  const std::uint32_t T = params.depth;
  const std::uint64_t leaves64 = static_cast<std::uint64_t>(R) << T;
  if (leaves64 > 1u << 22) throw std::invalid_argument("binary tree: too many leaves");
  const std::uint32_t leaves = static_cast<std::uint32_t>(leaves64);

  std::vector<double> leaf_rewards;
  if (params.leaf_rewards.size() == leaves) {
    leaf_rewards = params.leaf_rewards;
  } else if (params.leaf_rewards.size() == 2 && leaves != 2) {
    if (params.optimal_leaves.empty()) {
      throw std::invalid_argument("binary tree: shorthand rewards need explicit optimal_leaves");
    }
    leaf_rewards.assign(leaves, params.leaf_rewards[1]);
    for (auto l : params.optimal_leaves) {
      if (l >= leaves) throw std::invalid_argument("binary tree: optimal leaf out of range");
      leaf_rewards[l] = params.leaf_rewards[0];
    }
  } else {
    throw std::invalid_argument("binary tree: leaf_rewards must list every leaf (or {opt, other})");
  }
  for (double r : leaf_rewards) {
    if (!std::isfinite(r) || r <= 0.0) {
      throw std::invalid_argument("binary tree: leaf rewards must be strictly positive");
    }
  }
  double rmax_leaf = *std::max_element(leaf_rewards.begin(), leaf_rewards.end());
  std::set<std::uint32_t> argmax_set;
  for (std::uint32_t l = 0; l < leaves; ++l) {
    if (leaf_rewards[l] == rmax_leaf) argmax_set.insert(l);
  }
  if (!params.optimal_leaves.empty()) {
    std::set<std::uint32_t> given(params.optimal_leaves.begin(), params.optimal_leaves.end());
    if (given != argmax_set) {
      throw std::invalid_argument(
          "binary tree: optimal_leaves must be exactly the max-reward leaves");
    }
  }

  // offset(d) = R * (2^d - 1): breadth-first layout, level d has R * 2^d nodes.
  auto offset = [R](std::uint32_t d) -> std::uint32_t {
    return R * ((1u << d) - 1u);
  };
  const std::uint32_t total_states = offset(T) + leaves;

  MdpSpec spec;
  spec.state_count = total_states;
  spec.max_actions = 2;
  spec.horizon = T;
  spec.terminal.assign(total_states, false);
  spec.dynamics.resize(total_states);
  spec.rewards.resize(total_states);
  for (std::uint32_t r = 0; r < R; ++r) {
    spec.initial_states.push_back(r);
    spec.initial_probs.push_back(1.0 / R);
  }
  for (std::uint32_t d = 0; d < T; ++d) {
    const std::uint32_t level_size = R << d;
    for (std::uint32_t j = 0; j < level_size; ++j) {
      StateId s = offset(d) + j;
      spec.dynamics[s].resize(2);
      spec.rewards[s].resize(2);
      for (std::uint32_t a = 0; a < 2; ++a) {
        StateId child = offset(d + 1) + 2 * j + a;
        spec.dynamics[s][a] = {{child, 1.0}};
        if (d + 1 == T) {
          std::uint32_t leaf_index = 2 * j + a;
          spec.rewards[s][a] = leaf_rewards[leaf_index];
        } else {
          spec.rewards[s][a] = params.intermediate_reward;
        }
      }
    }
  }
  for (std::uint32_t l = 0; l < leaves; ++l) spec.terminal[offset(T) + l] = true;
  spec.validate();
  return spec;
}

MdpSpec make_chain(const ChainParams& params) {
  if (params.length < 2) throw std::invalid_argument("chain: length must be at least 2");
  if (params.horizon == 0) throw std::invalid_argument("chain: horizon must be positive");
  if (!(params.move_prob > 0.0 && params.move_prob <= 1.0)) {
    throw std::invalid_argument("chain: move probability must be in (0, 1]");
  }
  MdpSpec spec;
  spec.state_count = params.length;
  spec.max_actions = 2;
  spec.horizon = params.horizon;
  spec.initial_states = {0};
  spec.initial_probs = {1.0};
  spec.terminal.assign(params.length, false);
  spec.terminal[params.length - 1] = true;
  spec.dynamics.resize(params.length);
  spec.rewards.resize(params.length);
  const double p = params.move_prob;
  for (StateId s = 0; s + 1 < params.length; ++s) {
    StateId fwd = s + 1;
    StateId back = s == 0 ? 0 : s - 1;
    spec.dynamics[s].resize(2);
    spec.rewards[s].resize(2);
    auto row = [&](StateId target) {
      std::vector<TransitionEntry> r;
      if (target == s) {
        r.push_back({s, 1.0});
      } else {
        r.push_back({target, p});
        if (p < 1.0) r.push_back({s, 1.0 - p});
      }
      return r;
    };
    spec.dynamics[s][0] = row(fwd);
    spec.dynamics[s][1] = row(back);
    spec.rewards[s][0] = (fwd == params.length - 1) ? params.goal_reward : params.step_reward;
    spec.rewards[s][1] = params.step_reward;
  }
  spec.validate();
  return spec;
}

MdpSpec make_grid(const GridParams& params) {
  if (params.width == 0 || params.height == 0) throw std::invalid_argument("grid: empty grid");
  if (params.width * params.height < 2) throw std::invalid_argument("grid: need at least 2 cells");
  if (params.horizon == 0) throw std::invalid_argument("grid: horizon must be positive");
  MdpSpec spec;
  const std::uint32_t W = params.width, H = params.height;
  spec.state_count = W * H;
  spec.max_actions = 4;
  spec.horizon = params.horizon;
  spec.initial_states = {0};
  spec.initial_probs = {1.0};
  const StateId goal = W * H - 1;
  spec.terminal.assign(spec.state_count, false);
  spec.terminal[goal] = true;
  spec.dynamics.resize(spec.state_count);
  spec.rewards.resize(spec.state_count);
  const int dx[4] = {0, 0, -1, 1};  // up, down, left, right
  const int dy[4] = {-1, 1, 0, 0};
  for (std::uint32_t y = 0; y < H; ++y) {
    for (std::uint32_t x = 0; x < W; ++x) {
      StateId s = y * W + x;
      if (spec.terminal[s]) continue;
      spec.dynamics[s].resize(4);
      spec.rewards[s].resize(4);
      for (std::uint32_t a = 0; a < 4; ++a) {
        int nx = static_cast<int>(x) + dx[a];
        int ny = static_cast<int>(y) + dy[a];
        StateId next = s;
        if (nx >= 0 && ny >= 0 && nx < static_cast<int>(W) && ny < static_cast<int>(H)) {
          next = static_cast<StateId>(ny) * W + static_cast<StateId>(nx);
        }
        spec.dynamics[s][a] = {{next, 1.0}};
        spec.rewards[s][a] = (next == goal) ? params.goal_reward : params.step_reward;
      }
    }
  }
  spec.validate();
  return spec;
}

namespace {

// Splits "k1=v1,k2=v2,..." where a value may itself contain commas (list
// values): a token without '=' extends the previous key's value.
std::vector<std::pair<std::string, std::string>> parse_kv_list(const std::string& body) {
  std::vector<std::pair<std::string, std::string>> kv;
  for (const auto& tok : split_csv(body)) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) {
      if (kv.empty()) throw ConfigError("env name: dangling list value '" + tok + "'");
      kv.back().second += "," + tok;
    } else {
      kv.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
    }
  }
  return kv;
}

}  // namespace

MdpSpec make_env(const std::string& name) {
  auto colon = name.find(':');
  if (colon == std::string::npos) throw ConfigError("env name needs a family prefix: " + name);
  std::string family = name.substr(0, colon);
  auto kv = parse_kv_list(name.substr(colon + 1));
  bool normalize = false;
  MdpSpec spec;
  if (family == "tree") {
    BinaryTreeParams p;
    p.leaf_rewards.clear();
    for (const auto& [k, v] : kv) {
      if (k == "T") p.depth = static_cast<std::uint32_t>(parse_u64(v, "tree T"));
      else if (k == "roots") p.root_count = static_cast<std::uint32_t>(parse_u64(v, "tree roots"));
      else if (k == "opt") {
        for (const auto& id : split_csv(v)) {
          p.optimal_leaves.push_back(static_cast<std::uint32_t>(parse_u64(id, "tree opt")));
        }
      } else if (k == "rewards") {
        for (const auto& r : split_csv(v)) p.leaf_rewards.push_back(parse_double(r, "tree rewards"));
      } else if (k == "eps") {
        p.intermediate_reward = parse_double(v, "tree eps");
      } else if (k == "normalize") {
        normalize = (v == "on");
      } else {
        throw ConfigError("tree env: unknown key '" + k + "'");
      }
    }
    spec = make_binary_tree(p);
  } else if (family == "chain") {
    ChainParams p;
    for (const auto& [k, v] : kv) {
      if (k == "len") p.length = static_cast<std::uint32_t>(parse_u64(v, "chain len"));
      else if (k == "T") p.horizon = static_cast<std::uint32_t>(parse_u64(v, "chain T"));
      else if (k == "p") p.move_prob = parse_double(v, "chain p");
      else if (k == "goal") p.goal_reward = parse_double(v, "chain goal");
      else if (k == "step") p.step_reward = parse_double(v, "chain step");
      else if (k == "normalize") normalize = (v == "on");
      else throw ConfigError("chain env: unknown key '" + k + "'");
    }
    spec = make_chain(p);
  } else if (family == "grid") {
    GridParams p;
    for (const auto& [k, v] : kv) {
      if (k == "w") p.width = static_cast<std::uint32_t>(parse_u64(v, "grid w"));
      else if (k == "h") p.height = static_cast<std::uint32_t>(parse_u64(v, "grid h"));
      else if (k == "T") p.horizon = static_cast<std::uint32_t>(parse_u64(v, "grid T"));
      else if (k == "goal") p.goal_reward = parse_double(v, "grid goal");
      else if (k == "step") p.step_reward = parse_double(v, "grid step");
      else if (k == "normalize") normalize = (v == "on");
      else throw ConfigError("grid env: unknown key '" + k + "'");
    }
    spec = make_grid(p);
  } else {
    throw ConfigError("unknown env family: " + family);
  }
  if (normalize) spec = normalize_rewards(spec);
  spec.name = name;
  return spec;
}

namespace {

void enumerate_rec(const MdpSpec& spec, StateId s, std::uint32_t t, double prob, Trajectory& cur,
                   std::vector<EnumeratedTrajectory>& out, std::size_t cap) {
  if (spec.terminal[s] || t >= spec.horizon) {
    if (out.size() >= cap) throw std::runtime_error("enumerate_trajectories: cap exceeded");
    out.push_back({cur, prob});
    return;
  }
  for (std::uint32_t a = 0; a < spec.action_count(s); ++a) {
    for (const auto& e : spec.dynamics[s][a]) {
      if (e.prob <= 0.0) continue;
      cur.push(s, a, spec.rewards[s][a]);
      enumerate_rec(spec, e.next, t + 1, prob * e.prob, cur, out, cap);
      cur.steps.pop_back();
      cur.trajectory_reward -= spec.rewards[s][a];
    }
  }
}

}  // namespace

std::vector<EnumeratedTrajectory> enumerate_trajectories(const MdpSpec& spec, std::size_t cap) {
  spec.validate();
  std::vector<EnumeratedTrajectory> out;
  for (std::size_t i = 0; i < spec.initial_states.size(); ++i) {
    if (spec.initial_probs[i] <= 0.0) continue;
    Trajectory cur;
    enumerate_rec(spec, spec.initial_states[i], 0, spec.initial_probs[i], cur, out, cap);
  }
  // Rebuild each reward sum in push order: the DFS subtraction above can leave
  // tiny floating residue when backtracking.
  for (auto& et : out) {
    double sum = 0.0;
    for (const auto& st : et.traj.steps) sum += st.reward;
    et.traj.trajectory_reward = sum;
  }
  return out;
}

double max_trajectory_reward(const MdpSpec& spec, std::size_t cap) {
  auto all = enumerate_trajectories(spec, cap);
  if (all.empty()) throw std::runtime_error("max_trajectory_reward: no trajectories");
  double best = all[0].traj.trajectory_reward;
  for (const auto& et : all) best = std::max(best, et.traj.trajectory_reward);
  return best;
}

MdpSpec normalize_rewards(const MdpSpec& spec, std::size_t cap) {
  double rmax = max_trajectory_reward(spec, cap);
  MdpSpec out = spec;
  for (auto& row : out.rewards) {
    for (auto& r : row) r /= rmax;
  }
  out.validate();
  return out;
}

bool covers_all_initial_states(const MdpSpec& spec, double c, std::size_t cap) {
  auto all = enumerate_trajectories(spec, cap);
  std::set<StateId> covered;
  for (const auto& et : all) {
    if (!et.traj.steps.empty() && et.traj.trajectory_reward >= c) {
      covered.insert(et.traj.steps.front().state);
    }
  }
  for (std::size_t i = 0; i < spec.initial_states.size(); ++i) {
    if (spec.initial_probs[i] > 0.0 && covered.count(spec.initial_states[i]) == 0) return false;
  }
  return true;
}

}  // namespace rankgrad
