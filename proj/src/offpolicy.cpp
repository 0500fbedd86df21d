#include "rankgrad/offpolicy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <set>

namespace rankgrad {

double ShapingConfig::current_threshold(StateId initial_state) const {
  if (mode == Mode::fixed) return threshold;
  auto it = per_initial_threshold.find(initial_state);
  return it == per_initial_threshold.end() ? adaptive_floor : it->second;
}

int shape(const Trajectory& traj, ShapingConfig& cfg) {
  if (traj.steps.empty()) return 0;
  if (cfg.mode == ShapingConfig::Mode::fixed) {
    return traj.trajectory_reward >= cfg.threshold ? 1 : 0;
  }
  StateId root = traj.steps.front().state;
  double cur = cfg.current_threshold(root);
  cur = std::max(cur, traj.trajectory_reward);
  cfg.per_initial_threshold[root] = cur;
  return traj.trajectory_reward >= cur ? 1 : 0;
}

ReplayBuffers::ReplayBuffers(std::size_t regular_capacity, std::size_t near_optimal_capacity,
                             bool unique_trajectories)
    : regular_capacity_(regular_capacity),
      near_optimal_capacity_(near_optimal_capacity),
      unique_trajectories_(unique_trajectories) {
  if (regular_capacity_ == 0 || near_optimal_capacity_ == 0) {
    throw std::invalid_argument("ReplayBuffers: capacities must be positive");
  }
}

void ReplayBuffers::insert_regular(const Transition& t) {
  regular_.push_back(t);
  if (regular_.size() > regular_capacity_) regular_.pop_front();
}

bool ReplayBuffers::insert_if_near_optimal(const Trajectory& traj, ShapingConfig& shaping) {
  if (shape(traj, shaping) != 1) return false;
  ++inserts_;
  bool is_new = keys_.insert(traj.key()).second;
  if (unique_trajectories_ && !is_new) return true;
  auto src = std::make_shared<const Trajectory>(traj);
  for (const auto& st : traj.steps) {
    near_optimal_.push_back({{st.state, st.action}, src});
    if (near_optimal_.size() > near_optimal_capacity_) near_optimal_.pop_front();
  }
  return true;
}

std::vector<SupervisedExample> ReplayBuffers::sample_batch(std::size_t batch,
                                                           std::mt19937_64& rng) const {
  if (near_optimal_.empty()) throw std::logic_error("sample_batch: near-optimal buffer empty");
  if (batch == 0) throw std::invalid_argument("sample_batch: batch must be positive");
  std::uniform_int_distribution<std::size_t> pick(0, near_optimal_.size() - 1);
  std::vector<SupervisedExample> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) out.push_back(near_optimal_[pick(rng)].example);
  return out;
}

bool ReplayBuffers::audit_purity(const MdpSpec& spec, const ShapingConfig& shaping) const {
  for (const auto& entry : near_optimal_) {
    const Trajectory& t = *entry.source;
    if (t.steps.empty()) return false;
    double sum = 0.0;
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      const auto& st = t.steps[i];
      if (st.state >= spec.state_count || st.action >= spec.action_count(st.state)) return false;
      if (i + 1 < t.steps.size()) {
        // The recorded successor must be reachable under the spec's dynamics.
        bool reachable = false;
        for (const auto& e : spec.dynamics[st.state][st.action]) {
          if (e.next == t.steps[i + 1].state && e.prob > 0.0) reachable = true;
        }
        if (!reachable) return false;
      }
      sum += spec.rewards[st.state][st.action];
    }
    double floor = shaping.mode == ShapingConfig::Mode::fixed ? shaping.threshold
                                                              : shaping.adaptive_floor;
    if (sum != t.trajectory_reward || sum < floor) return false;
  }
  return true;
}

ExplorerKind explorer_kind_from_string(const std::string& s) {
  if (s == "random") return ExplorerKind::random;
  if (s == "eps_greedy") return ExplorerKind::eps_greedy;
  if (s == "epg") return ExplorerKind::epg;
  throw ConfigError("unknown explorer: " + s);
}

namespace {

std::string to_string(ExplorerKind k) {
  switch (k) {
    case ExplorerKind::random: return "random";
    case ExplorerKind::eps_greedy: return "eps_greedy";
    case ExplorerKind::epg: return "epg";
  }
  return "?";
}

}  // namespace

Transition explore_step(Explorer& explorer, EnvState& env, ReplayBuffers& buffers,
                        const LambdaModel& learner, std::mt19937_64& rng) {
  if (env.done()) throw std::logic_error("explore_step: episode already finished");
  StateId s = env.state();
  std::uint32_t n = env.spec().action_count(s);
  ActionId a = 0;
  switch (explorer.kind) {
    case ExplorerKind::random: {
      std::uniform_int_distribution<std::uint32_t> pick(0, n - 1);
      a = pick(rng);
      break;
    }
    case ExplorerKind::eps_greedy: {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      if (unif(rng) < explorer.epsilon) {
        std::uniform_int_distribution<std::uint32_t> pick(0, n - 1);
        a = pick(rng);
      } else {
        auto lam = learner.forward(s);
        if (lam.size() != n) throw std::logic_error("explore_step: model/action-count mismatch");
        a = argmax_action(lam);
      }
      break;
    }
    case ExplorerKind::epg: {
      auto probs = listwise_probs(explorer.epg_model->forward(s));
      if (probs.size() != n) throw std::logic_error("explore_step: model/action-count mismatch");
      a = static_cast<ActionId>(sample_index(probs, rng));
      break;
    }
  }
  auto res = env.step(a);
  Transition t{s, a, res.reward, res.next, res.done};
  buffers.insert_regular(t);
  return t;
}

void TrainRunConfig::validate(const MdpSpec& spec) const {
  if (loss != LossKind::hinge && loss != LossKind::xent) {
    throw ConfigError("train: loss must be hinge or xent");
  }
  if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("train: epsilon must be in [0, 1]");
  if (!(margin > 0.0)) throw ConfigError("train: margin must be positive");
  if (batch == 0) throw ConfigError("train: batch must be positive");
  if (update_period == 0) throw ConfigError("train: update_period must be positive");
  if (evaluation_period == 0) throw ConfigError("train: evaluation_period must be positive");
  if (eval_episodes == 0) throw ConfigError("train: eval_episodes must be positive");
  if (capacity_regular < spec.horizon) {
    throw ConfigError("train: regular buffer capacity must be at least the horizon");
  }
  if (capacity_nearopt < spec.horizon) {
    throw ConfigError("train: near-optimal buffer capacity must be at least the horizon");
  }
  if (model == ModelKind::mlp && hidden.empty()) {
    throw ConfigError("train: mlp model needs hidden widths");
  }
  if (model != ModelKind::mlp && !hidden.empty()) {
    throw ConfigError("train: hidden widths are mlp-only");
  }
  if (threshold_epsilon < 0.0) throw ConfigError("train: c_epsilon must be nonnegative");
  for (StateId s = 0; s < spec.state_count; ++s) {
    if (!spec.terminal[s] && spec.action_count(s) != spec.max_actions) {
      throw ConfigError("train: the learning loop requires a uniform action count per state");
    }
  }
}

TrainRunConfig train_config_from(const Config& cfg) {
  static const std::set<std::string> known = {
      "env", "seed", "loss", "policy", "explorer", "epsilon", "model", "hidden",
      "squash", "c_q", "temperature", "margin", "lr", "init_half_range", "max_episodes",
      "max_env_steps", "batch", "update_period", "evaluation_period", "eval_episodes",
      "capacity_regular", "capacity_nearopt", "unique_trajectories", "c", "c_epsilon", "shaping",
      "adaptive_floor", "stop_target"};
  for (const auto& [k, v] : cfg) {
    if (known.find(k) == known.end()) throw ConfigError("unknown config key: " + k);
  }
  TrainRunConfig out;
  out.env_name = require_string(cfg, "env");
  out.seed = get_u64(cfg, "seed", 1);
  out.loss = loss_kind_from_string(get_string(cfg, "loss", "hinge"));
  std::string policy = get_string(cfg, "policy", "");
  if (!policy.empty()) {
    if ((policy == "pairwise") != (out.loss == LossKind::hinge)) {
      throw ConfigError("config: policy '" + policy + "' is inconsistent with loss '" +
                        to_string(out.loss) + "' (pairwise trains with hinge, listwise with xent)");
    }
  }
  out.explorer = explorer_kind_from_string(get_string(cfg, "explorer", "random"));
  out.epsilon = get_double(cfg, "epsilon", 0.1);
  out.model = model_kind_from_string(get_string(cfg, "model", "tabular"));
  for (const auto& h : split_csv(get_string(cfg, "hidden", ""))) {
    out.hidden.push_back(static_cast<std::uint32_t>(parse_u64(h, "hidden")));
  }
  out.squash = get_bool(cfg, "squash", false);
  out.squash_cap = get_double(cfg, "c_q", 0.5);
  out.temperature = get_double(cfg, "temperature", 1.0);
  out.margin = get_double(cfg, "margin", 1.0);
  out.lr = get_double(cfg, "lr", out.model == ModelKind::mlp ? 1e-3 : 1e-2);
  out.init_half_range = get_double(cfg, "init_half_range", 0.05);
  out.max_episodes = get_u64(cfg, "max_episodes", 1000);
  out.max_env_steps = get_u64(cfg, "max_env_steps", 0);
  out.batch = static_cast<std::size_t>(get_u64(cfg, "batch", 32));
  out.update_period = get_u64(cfg, "update_period", 4);
  out.evaluation_period = get_u64(cfg, "evaluation_period", 1000);
  out.eval_episodes = static_cast<std::uint32_t>(get_u64(cfg, "eval_episodes", 20));
  out.capacity_regular = static_cast<std::size_t>(get_u64(cfg, "capacity_regular", 100000));
  out.capacity_nearopt = static_cast<std::size_t>(get_u64(cfg, "capacity_nearopt", 100000));
  out.unique_trajectories = get_bool(cfg, "unique_trajectories", false);
  std::string c_text = get_string(cfg, "c", "rmax");
  if (c_text != "rmax") out.threshold = parse_double(c_text, "c");
  out.threshold_epsilon = get_double(cfg, "c_epsilon", 0.0);
  std::string shaping = get_string(cfg, "shaping", "fixed");
  if (shaping == "fixed") out.shaping_mode = ShapingConfig::Mode::fixed;
  else if (shaping == "adaptive") out.shaping_mode = ShapingConfig::Mode::adaptive;
  else throw ConfigError("config: shaping must be fixed or adaptive");
  out.adaptive_floor = get_double(cfg, "adaptive_floor", 0.0);
  std::string stop = get_string(cfg, "stop_target", "c");
  if (stop != "c") out.stop_target = parse_double(stop, "stop_target");
  return out;
}

Config to_config(const TrainRunConfig& cfg) {
  Config c;
  c["env"] = cfg.env_name;
  c["seed"] = std::to_string(cfg.seed);
  c["loss"] = to_string(cfg.loss);
  c["explorer"] = to_string(cfg.explorer);
  c["epsilon"] = format_double(cfg.epsilon);
  c["model"] = to_string(cfg.model);
  if (!cfg.hidden.empty()) {
    std::string h;
    for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
      if (i) h += ",";
      h += std::to_string(cfg.hidden[i]);
    }
    c["hidden"] = h;
  }
  c["squash"] = cfg.squash ? "on" : "off";
  c["c_q"] = format_double(cfg.squash_cap);
  c["temperature"] = format_double(cfg.temperature);
  c["margin"] = format_double(cfg.margin);
  c["lr"] = format_double(cfg.lr);
  c["init_half_range"] = format_double(cfg.init_half_range);
  c["max_episodes"] = std::to_string(cfg.max_episodes);
  c["max_env_steps"] = std::to_string(cfg.max_env_steps);
  c["batch"] = std::to_string(cfg.batch);
  c["update_period"] = std::to_string(cfg.update_period);
  c["evaluation_period"] = std::to_string(cfg.evaluation_period);
  c["eval_episodes"] = std::to_string(cfg.eval_episodes);
  c["capacity_regular"] = std::to_string(cfg.capacity_regular);
  c["capacity_nearopt"] = std::to_string(cfg.capacity_nearopt);
  c["unique_trajectories"] = cfg.unique_trajectories ? "on" : "off";
  c["c"] = std::isnan(cfg.threshold) ? "rmax" : format_double(cfg.threshold);
  c["c_epsilon"] = format_double(cfg.threshold_epsilon);
  c["shaping"] = cfg.shaping_mode == ShapingConfig::Mode::fixed ? "fixed" : "adaptive";
  c["adaptive_floor"] = format_double(cfg.adaptive_floor);
  c["stop_target"] = std::isnan(cfg.stop_target) ? "c" : format_double(cfg.stop_target);
  return c;
}

Trajectory rollout(const MdpSpec& spec, const AnyPolicy& policy, SelectMode mode, EnvState& env) {
  const LambdaModel* model = policy_model(policy);
  Trajectory traj;
  while (!env.done()) {
    StateId s = env.state();
    if (spec.action_count(s) != model->arch().actions) {
      throw std::logic_error("rollout: model/action-count mismatch at state");
    }
    ActionId a = select_action(policy, s, mode, env.rng());
    auto res = env.step(a);
    traj.push(s, a, res.reward);
  }
  return traj;
}

EvalResult evaluate(const LambdaModel& model, const MdpSpec& spec, std::uint32_t episodes,
                    SelectMode mode, std::uint64_t seed) {
  if (episodes == 0) throw std::invalid_argument("evaluate: need at least one episode");
  EnvState env(spec, seed);
  AnyPolicy policy = PairwisePolicy{&model, false};
  EvalResult out;
  out.returns.reserve(episodes);
  for (std::uint32_t e = 0; e < episodes; ++e) {
    if (e > 0) env.reset();
    Trajectory traj = rollout(spec, policy, mode, env);
    out.returns.push_back(traj.trajectory_reward);
  }
  out.mean = 0.0;
  out.min = out.returns.front();
  for (double r : out.returns) {
    out.mean += r;
    out.min = std::min(out.min, r);
  }
  out.mean /= episodes;
  return out;
}

std::optional<GradEstimate> supervision_update(LambdaModel& model, ReplayBuffers& buffers,
                                               const TrainRunConfig& cfg, std::mt19937_64& rng) {
  if (buffers.near_optimal_size() == 0) return std::nullopt;
  auto batch = buffers.sample_batch(cfg.batch, rng);
  GradEstimate est = cfg.loss == LossKind::hinge
                         ? hinge_loss_and_grad(model, batch, cfg.margin)
                         : cross_entropy_loss_and_grad(model, batch);
  sgd_update(model, est.grad, cfg.lr);
  return est;
}

RunLog train(const TrainRunConfig& cfg, const MdpSpec& spec) {
  auto t0 = std::chrono::steady_clock::now();
  cfg.validate(spec);

  // Independent deterministic streams derived from the run seed.
  std::mt19937_64 master(cfg.seed);
  const std::uint64_t env_seed = master();
  const std::uint64_t explore_seed = master();
  const std::uint64_t batch_seed = master();
  const std::uint64_t init_seed = master();
  const std::uint64_t eval_seed_base = master();
  const std::uint64_t epg_seed = master();

  ModelArch arch;
  arch.kind = cfg.model;
  arch.input_dim = spec.state_count;
  arch.actions = spec.max_actions;
  arch.hidden = cfg.hidden;
  arch.squash = cfg.squash;
  arch.squash_cap = cfg.squash_cap;
  LambdaModel model = LambdaModel::random_init(arch, init_seed, cfg.init_half_range);

  double c = cfg.threshold;
  if (std::isnan(c)) c = max_trajectory_reward(spec) - cfg.threshold_epsilon;
  double stop_target = std::isnan(cfg.stop_target) ? c : cfg.stop_target;

  ShapingConfig shaping;
  shaping.mode = cfg.shaping_mode;
  shaping.threshold = c;
  shaping.adaptive_floor = cfg.adaptive_floor;

  ReplayBuffers buffers(cfg.capacity_regular, cfg.capacity_nearopt, cfg.unique_trajectories);
  Explorer explorer;
  explorer.kind = cfg.explorer;
  explorer.epsilon = cfg.epsilon;
  if (explorer.kind == ExplorerKind::epg) {
    explorer.epg_model =
        std::make_unique<LambdaModel>(LambdaModel::random_init(arch, epg_seed, cfg.init_half_range));
  }

  RunLog log;
  log.variant = cfg.loss == LossKind::hinge ? "rpg" : "xent";
  log.seed = cfg.seed;
  log.config_snapshot = serialize_config(to_config(cfg));

  EnvState env(spec, env_seed);
  std::mt19937_64 explore_rng(explore_seed);
  std::mt19937_64 batch_rng(batch_seed);
  std::uint64_t env_steps = 0;
  std::uint64_t updates = 0;
  double last_loss = 0.0;
  double last_gnorm = 0.0;
  bool stop = false;

  std::string checkpoint_path;
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    checkpoint_path = cfg.out_dir + "/checkpoint.rpgc";
  }

  for (std::uint64_t ep = 0; ep < cfg.max_episodes && !stop; ++ep) {
    if (ep > 0) env.reset();
    Trajectory traj;
    while (!env.done() && !stop) {
      Transition tr = explore_step(explorer, env, buffers, model, explore_rng);
      traj.push(tr.state, tr.action, tr.reward);
      ++env_steps;
      if (env_steps % cfg.update_period == 0) {
        auto est = supervision_update(model, buffers, cfg, batch_rng);
        if (est) {
          ++updates;
          last_loss = est->loss;
          last_gnorm = est->grad.inf_norm();
        }
        if (explorer.kind == ExplorerKind::epg && buffers.near_optimal_size() > 0) {
          auto b = buffers.sample_batch(cfg.batch, batch_rng);
          auto epg_est = cross_entropy_loss_and_grad(*explorer.epg_model, b);
          sgd_update(*explorer.epg_model, epg_est.grad, cfg.lr);
        }
      }
      if (env_steps % cfg.evaluation_period == 0) {
        auto ev = evaluate(model, spec, cfg.eval_episodes, SelectMode::greedy,
                           eval_seed_base + log.records.size());
        EvalRecord rec;
        rec.step = updates;
        rec.episode = ep;
        rec.env_steps = env_steps;
        rec.eval_return_mean = ev.mean;
        rec.eval_return_min = ev.min;
        rec.buffer_regular = buffers.regular_size();
        rec.buffer_nearopt = buffers.near_optimal_size();
        rec.distinct_nearopt = buffers.distinct_near_optimal();
        rec.loss = last_loss;
        rec.grad_inf_norm = last_gnorm;
        log.records.push_back(rec);
        log.final_eval_return = ev.mean;
        if (!checkpoint_path.empty()) {
          save_checkpoint(model, checkpoint_path);
          log.final_checkpoint = checkpoint_path;
        }
        if (ev.min >= stop_target) {
          log.reached_target = true;
          stop = true;  // no further model mutations
        }
      }
      if (cfg.max_env_steps != 0 && env_steps >= cfg.max_env_steps) stop = true;
    }
    if (stop) break;
    if (buffers.insert_if_near_optimal(traj, shaping) && log.episodes_to_first_insert == 0) {
      log.episodes_to_first_insert = ep + 1;
    }
  }
  if (!checkpoint_path.empty()) {
    save_checkpoint(model, checkpoint_path);
    log.final_checkpoint = checkpoint_path;
  }
  log.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return log;
}

}  // namespace rankgrad
