// rankgrad: train/evaluate ranking-based policies on small finite MDPs and
// run the exploration/sample-complexity calculators.
//
// Exit codes: 0 success, 1 a requested check failed, 2 configuration error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rankgrad/config.hpp"
#include "rankgrad/envs.hpp"
#include "rankgrad/gradients.hpp"
#include "rankgrad/harness.hpp"
#include "rankgrad/model.hpp"
#include "rankgrad/offpolicy.hpp"
#include "rankgrad/policy.hpp"
#include "rankgrad/theory.hpp"

namespace {

using nlohmann::json;
using namespace rankgrad;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfigError = 2;

std::string default_out_dir() {
  const char* env = std::getenv("RANKGRAD_OUT");
  return env ? std::string(env) : std::string();
}

Config load_config_with_overrides(const std::string& path,
                                  const std::vector<std::string>& overrides) {
  Config cfg = path.empty() ? Config{} : parse_config_file(path);
  for (const auto& ov : overrides) {
    auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set expects key=value, got: " + ov);
    }
    std::string key = ov.substr(0, eq);
    std::string value = ov.substr(eq + 1);
    while (!key.empty() && key.back() == ' ') key.pop_back();
    while (!value.empty() && value.front() == ' ') value.erase(value.begin());
    cfg[key] = value;
  }
  return cfg;
}

void print_run_summary(const RunLog& log) {
  std::cout << "variant=" << log.variant << " seed=" << log.seed
            << " evals=" << log.records.size();
  if (!log.records.empty()) {
    const auto& last = log.records.back();
    std::cout << " env_steps=" << last.env_steps << " updates=" << last.step;
  }
  std::cout << " final_eval_return=" << format_double(log.final_eval_return)
            << " reached_target=" << (log.reached_target ? "yes" : "no")
            << " episodes_to_first_insert=" << log.episodes_to_first_insert
            << " wall_clock_sec=" << format_double(log.wall_clock_sec) << "\n";
  if (!log.final_checkpoint.empty()) {
    std::cout << "checkpoint=" << log.final_checkpoint << "\n";
  }
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              std::string out_dir, bool reinforce, std::int64_t seed_override) {
  Config cfg = load_config_with_overrides(config_path, overrides);
  if (seed_override >= 0) cfg["seed"] = std::to_string(seed_override);
  TrainRunConfig tcfg = train_config_from(cfg);
  if (out_dir.empty()) out_dir = default_out_dir();
  tcfg.out_dir = out_dir;
  MdpSpec spec = make_env(tcfg.env_name);
  RunLog log = reinforce ? onpolicy_reinforce_baseline(tcfg, spec) : train(tcfg, spec);
  if (!out_dir.empty()) {
    write_metrics_csv(log, out_dir + "/metrics.csv");
    write_config_snapshot(log, out_dir + "/run.config");
    std::cout << "metrics=" << out_dir << "/metrics.csv\n";
  }
  print_run_summary(log);
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& env_name, std::uint32_t episodes,
             const std::string& mode_name, const std::string& policy_name, double temperature,
             bool dummy_action, bool squash, double c_q, std::uint64_t seed) {
  if (episodes == 0) throw ConfigError("eval: episodes must be positive");
  SelectMode mode;
  if (mode_name == "greedy") mode = SelectMode::greedy;
  else if (mode_name == "sample") mode = SelectMode::sample;
  else throw ConfigError("eval: mode must be greedy or sample");

  LambdaModel model = load_checkpoint(checkpoint, squash, c_q);
  MdpSpec spec = make_env(env_name);
  AnyPolicy policy;
  if (policy_name == "pairwise") policy = PairwisePolicy{&model, dummy_action};
  else if (policy_name == "listwise") policy = ListwisePolicy{&model, temperature};
  else throw ConfigError("eval: policy must be pairwise or listwise");

  EnvState env(spec, seed);
  double mean = 0.0;
  double min = 0.0;
  for (std::uint32_t e = 0; e < episodes; ++e) {
    if (e > 0) env.reset();
    Trajectory traj = rollout(spec, policy, mode, env);
    mean += traj.trajectory_reward;
    min = e == 0 ? traj.trajectory_reward : std::min(min, traj.trajectory_reward);
  }
  mean /= episodes;
  std::cout << "episodes=" << episodes << " mode=" << mode_name << " policy=" << policy_name
            << " return_mean=" << format_double(mean) << " return_min=" << format_double(min)
            << "\n";
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out_dir, unsigned workers) {
  Config cfg = load_config_with_overrides(config_path, overrides);
  if (!out_dir.empty()) cfg["out_dir"] = out_dir;
  else if (!has_key(cfg, "out_dir") && !default_out_dir().empty()) {
    cfg["out_dir"] = default_out_dir();
  }
  if (workers > 0) cfg["workers"] = std::to_string(workers);
  SweepSpec spec = sweep_spec_from(cfg);
  std::vector<RunLog> logs = run_sweep(spec);

  std::size_t failed = 0;
  for (const auto& log : logs) {
    if (log.variant.size() >= 7 && log.variant.ends_with("/failed")) {
      ++failed;
      std::cerr << "failed: variant=" << log.variant << " seed=" << log.seed << "\n";
    }
  }
  // Per-variant summary in sweep order.
  std::vector<std::string> seen;
  for (const auto& log : logs) {
    if (log.variant.ends_with("/failed")) continue;
    if (std::find(seen.begin(), seen.end(), log.variant) != seen.end()) continue;
    seen.push_back(log.variant);
    std::size_t runs = 0, reached = 0;
    double mean_final = 0.0;
    for (const auto& l : logs) {
      if (l.variant != log.variant) continue;
      ++runs;
      reached += l.reached_target ? 1 : 0;
      mean_final += l.final_eval_return;
    }
    mean_final /= static_cast<double>(runs);
    std::cout << "variant=" << log.variant << " runs=" << runs << " reached_target=" << reached
              << "/" << runs << " mean_final_eval=" << format_double(mean_final) << "\n";
  }
  std::cout << "total_runs=" << logs.size() << " failed_runs=" << failed;
  if (!spec.out_dir.empty()) std::cout << " out_dir=" << spec.out_dir;
  std::cout << "\n";
  return kExitOk;
}

int cmd_gradcheck(const std::string& loss_name, const std::string& env_name, std::uint32_t draws,
                  double tolerance, std::uint64_t seed, const std::string& model_name,
                  const std::string& hidden_csv, double init_half_range, std::uint32_t batch,
                  double margin, const std::string& out_csv) {
  if (draws == 0) throw ConfigError("gradcheck: draws must be positive");
  LossKind kind = loss_kind_from_string(loss_name);
  MdpSpec spec = make_env(env_name);

  ModelArch arch;
  arch.kind = model_kind_from_string(model_name);
  arch.input_dim = spec.state_count;
  arch.actions = spec.max_actions;
  for (const auto& h : split_csv(hidden_csv)) {
    arch.hidden.push_back(static_cast<std::uint32_t>(parse_u64(h, "hidden")));
  }

  std::mt19937_64 master(seed);
  const std::uint64_t env_seed = master();
  const std::uint64_t draw_seed = master();
  std::mt19937_64 draw_rng(draw_seed);
  EnvState env(spec, env_seed);

  const bool supervised = kind == LossKind::hinge || kind == LossKind::xent;
  std::size_t failures = 0;
  std::size_t kink_excluded = 0;
  double worst = 0.0;
  FiniteDiffReport worst_report;
  bool have_worst = false;

  for (std::uint32_t d = 0; d < draws; ++d) {
    LambdaModel model = LambdaModel::random_init(arch, master(), init_half_range);
    LossClosure closure;
    if (supervised) {
      std::vector<SupervisedExample> examples;
      std::uniform_int_distribution<StateId> pick_state(0, spec.state_count - 1);
      while (examples.size() < batch) {
        StateId s = pick_state(draw_rng);
        if (spec.terminal[s] || spec.action_count(s) == 0) continue;
        std::uniform_int_distribution<ActionId> pick_action(0, spec.action_count(s) - 1);
        examples.push_back({s, pick_action(draw_rng)});
      }
      closure = supervised_loss_closure(kind, std::move(examples), margin);
    } else {
      if (d > 0) env.reset();
      Trajectory traj;
      while (!env.done()) {
        StateId s = env.state();
        std::uniform_int_distribution<ActionId> pick(0, spec.action_count(s) - 1);
        ActionId a = pick(draw_rng);
        auto res = env.step(a);
        traj.push(s, a, res.reward);
      }
      closure = trajectory_loss_closure(kind, std::move(traj));
    }
    FiniteDiffReport report = finite_difference_check(model, closure, tolerance);
    if (report.kink_excluded) ++kink_excluded;
    if (!report.pass) ++failures;
    if (!report.kink_excluded && (!have_worst || report.max_rel_error > worst)) {
      worst = report.max_rel_error;
      worst_report = report;
      have_worst = true;
    }
  }

  if (!out_csv.empty() && have_worst) {
    std::ofstream f(out_csv, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + out_csv);
    f << "coordinate,analytic,numeric,rel_error\n";
    for (std::size_t i = 0; i < worst_report.analytic.size(); ++i) {
      f << i << ',' << format_double(worst_report.analytic[i]) << ','
        << format_double(worst_report.numeric[i]) << ','
        << format_double(worst_report.rel_error[i]) << "\n";
    }
    std::cout << "csv=" << out_csv << "\n";
  }

  std::cout << "loss=" << loss_name << " draws=" << draws << " failures=" << failures
            << " kink_excluded=" << kink_excluded
            << " max_rel_error=" << format_double(have_worst ? worst : 0.0)
            << " tolerance=" << format_double(tolerance) << "\n";
  return failures == 0 ? kExitOk : kExitCheckFailed;
}

void emit_theory(const json& inputs, const json& results, const json& metadata, bool as_json) {
  if (as_json) {
    json out;
    out["inputs"] = inputs;
    out["results"] = results;
    out["metadata"] = metadata;
    std::cout << out.dump(2) << "\n";
    return;
  }
  for (auto it = results.begin(); it != results.end(); ++it) {
    std::cout << it.key() << " = " << (it->is_string() ? it->get<std::string>() : it->dump())
              << "\n";
  }
}

int cmd_explore_sim(std::uint64_t trajectories, std::uint64_t optimal, std::uint64_t k_max,
                    std::size_t replicates, std::uint64_t seed, const std::string& out_csv) {
  if (trajectories == 0 || optimal == 0 || optimal > trajectories) {
    throw ConfigError("explore-sim: need 0 < optimal <= trajectories");
  }
  if (k_max == 0) throw ConfigError("explore-sim: k-max must be positive");
  if (replicates < 2) throw ConfigError("explore-sim: need at least 2 replicates");

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_csv.empty()) {
    file.open(out_csv, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open for writing: " + out_csv);
    out = &file;
  }
  *out << "k,closed_form,empirical_mean,empirical_std_error,replicates\n";
  for (std::uint64_t k = 1; k <= k_max; ++k) {
    double closed = expected_exploration_efficiency_closed_form(trajectories, optimal, k);
    auto counts = simulate_distinct_optimal_counts(trajectories, optimal, k, replicates,
                                                   seed + k);
    std::vector<double> as_double(counts.begin(), counts.end());
    EmpiricalEfficiency emp = expected_exploration_efficiency_empirical(as_double);
    *out << k << ',' << format_double(closed) << ',' << format_double(emp.mean) << ','
         << format_double(emp.std_error) << ',' << emp.replicates << "\n";
  }
  if (!out_csv.empty()) std::cout << "csv=" << out_csv << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ranking policy gradients on small MDPs: training, evaluation, and the "
               "exploration / sample-complexity calculators"};
  app.require_subcommand(1);

  // train ---------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Run the two-stage off-policy trainer");
  std::string train_config;
  std::vector<std::string> train_sets;
  std::string train_out;
  bool train_reinforce = false;
  std::int64_t train_seed = -1;
  train_cmd->add_option("--config", train_config, "Config file (key = value lines)")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--set", train_sets, "Override a config key (key=value, repeatable)");
  train_cmd->add_option("--seed", train_seed, "Override the config seed");
  train_cmd->add_option("--out", train_out, "Output directory (default: $RANKGRAD_OUT)");
  train_cmd->add_flag("--reinforce", train_reinforce,
                      "Train the on-policy listwise baseline instead");

  // eval ----------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Roll out a saved checkpoint");
  std::string eval_checkpoint, eval_env, eval_mode = "greedy", eval_policy = "pairwise";
  std::uint32_t eval_episodes = 20;
  double eval_temperature = 1.0, eval_cq = 0.5;
  bool eval_dummy = false, eval_squash = false;
  std::uint64_t eval_seed = 1;
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--env", eval_env, "Environment spec string")->required();
  eval_cmd->add_option("--episodes", eval_episodes, "Evaluation episodes");
  eval_cmd->add_option("--mode", eval_mode, "greedy | sample");
  eval_cmd->add_option("--policy", eval_policy, "pairwise | listwise");
  eval_cmd->add_option("--temperature", eval_temperature, "Listwise softmax temperature");
  eval_cmd->add_flag("--dummy-action", eval_dummy,
                     "Validate the pairwise dummy-action completion while sampling");
  eval_cmd->add_flag("--squash", eval_squash, "Apply the sigmoid squash to scores");
  eval_cmd->add_option("--c-q", eval_cq, "Squash cap");
  eval_cmd->add_option("--seed", eval_seed, "Rollout seed");

  // sweep ---------------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a seed x algorithm x threshold sweep");
  std::string sweep_config, sweep_out;
  std::vector<std::string> sweep_sets;
  unsigned sweep_workers = 0;
  sweep_cmd->add_option("--config", sweep_config, "Sweep config file")
      ->required()
      ->check(CLI::ExistingFile);
  sweep_cmd->add_option("--set", sweep_sets, "Override a config key (key=value, repeatable)");
  sweep_cmd->add_option("--out", sweep_out, "Output directory (default: $RANKGRAD_OUT)");
  sweep_cmd->add_option("--workers", sweep_workers, "Parallel worker threads");

  // gradcheck -----------------------------------------------------------
  auto* grad_cmd = app.add_subcommand("gradcheck",
                                      "Finite-difference check of an objective's gradient");
  std::string gc_loss, gc_env = "tree:T=3,roots=1,opt=0,rewards=2,1";
  std::uint32_t gc_draws = 20, gc_batch = 8;
  double gc_tol = 1e-4, gc_half_range = 0.05, gc_margin = 1.0;
  std::uint64_t gc_seed = 1;
  std::string gc_model = "tabular", gc_hidden, gc_out;
  grad_cmd->add_option("--loss", gc_loss, "rpg | rpg-exact | lpg | hinge | xent")->required();
  grad_cmd->add_option("--env", gc_env, "Environment spec string");
  grad_cmd->add_option("--trials", gc_draws, "Random draws to test");
  grad_cmd->add_option("--tol", gc_tol, "Max relative error allowed");
  grad_cmd->add_option("--seed", gc_seed, "Seed for draws and init");
  grad_cmd->add_option("--model", gc_model, "tabular | linear | mlp");
  grad_cmd->add_option("--hidden", gc_hidden, "MLP hidden sizes, comma-separated");
  grad_cmd->add_option("--init-half-range", gc_half_range, "Uniform init half-range");
  grad_cmd->add_option("--batch", gc_batch, "Batch size for hinge/xent draws");
  grad_cmd->add_option("--margin", gc_margin, "Hinge margin");
  grad_cmd->add_option("--out", gc_out, "Write the worst draw's per-coordinate CSV here");

  // theory --------------------------------------------------------------
  auto* theory_cmd = app.add_subcommand("theory", "Closed-form calculators");
  theory_cmd->require_subcommand(1);
  bool theory_json = false;
  theory_cmd->add_flag("--json", theory_json, "Emit JSON with inputs and metadata");

  TheoryParams tp;
  auto* sl_cmd = theory_cmd->add_subcommand("sl-bound", "Supervised sample complexity");
  sl_cmd->add_option("--gamma", tp.gamma, "Generalization tolerance")->required();
  sl_cmd->add_option("--delta", tp.delta, "Failure probability")->required();
  sl_cmd->add_option("--hyp-count", tp.hyp_count, "Hypothesis class size |H|")->required();

  double gb_eta = 0.0;
  auto* gen_cmd = theory_cmd->add_subcommand("gen-bound", "Performance lower bound");
  gen_cmd->add_option("--d", tp.D, "Optimal trajectory mass D")->required();
  gen_cmd->add_option("--eta", gb_eta, "Generalization error")->required();
  gen_cmd->add_option("--m", tp.m, "Actions per state")->required();
  gen_cmd->add_option("--horizon", tp.horizon, "Horizon T")->required();

  auto* rl_cmd = theory_cmd->add_subcommand("rl-bound", "Near-optimality sample complexity");
  rl_cmd->add_option("--epsilon", tp.epsilon, "Performance slack")->required();
  rl_cmd->add_option("--d", tp.D, "Optimal trajectory mass D")->required();
  rl_cmd->add_option("--m", tp.m, "Actions per state")->required();
  rl_cmd->add_option("--horizon", tp.horizon, "Horizon T")->required();
  rl_cmd->add_option("--hyp-count", tp.hyp_count, "Hypothesis class size |H|")->required();
  rl_cmd->add_option("--delta", tp.delta, "Failure probability")->required();

  std::uint64_t ex_i = 1;
  auto* ex_cmd = theory_cmd->add_subcommand("explore-eff",
                                            "P(at least i distinct optimal in k episodes)");
  ex_cmd->add_option("--trajectories", tp.N, "Total trajectories N")->required();
  ex_cmd->add_option("--optimal", tp.opt_count, "Optimal trajectories")->required();
  ex_cmd->add_option("--k", tp.k, "Exploration episodes")->required();
  ex_cmd->add_option("--i", ex_i, "Distinct optimal trajectories needed")->required();

  auto* exp_cmd = theory_cmd->add_subcommand("expected-eff",
                                             "E[distinct optimal after k episodes]");
  exp_cmd->add_option("--trajectories", tp.N, "Total trajectories N")->required();
  exp_cmd->add_option("--optimal", tp.opt_count, "Optimal trajectories")->required();
  exp_cmd->add_option("--k", tp.k, "Exploration episodes")->required();

  double hd_p = 0.5;
  auto* hd_cmd = theory_cmd->add_subcommand("hit-decay", "P(trajectory never drawn in n samples)");
  hd_cmd->add_option("--p", hd_p, "Per-sample draw probability")->required();
  hd_cmd->add_option("--n", tp.n, "Samples")->required();

  auto* joint_cmd = theory_cmd->add_subcommand("joint-bound",
                                               "Exploration-coupled performance bound");
  joint_cmd->add_option("--delta-prime", tp.delta_prime, "Overall confidence")->required();
  joint_cmd->add_option("--n", tp.n, "Supervision samples")->required();
  joint_cmd->add_option("--k", tp.k, "Exploration episodes")->required();
  joint_cmd->add_option("--trajectories", tp.N, "Total trajectories N")->required();
  joint_cmd->add_option("--optimal", tp.opt_count, "Optimal trajectories")->required();
  joint_cmd->add_option("--hyp-count", tp.hyp_count, "Hypothesis class size |H|")->required();
  joint_cmd->add_option("--m", tp.m, "Actions per state")->required();
  joint_cmd->add_option("--horizon", tp.horizon, "Horizon T")->required();
  joint_cmd->add_option("--d", tp.D, "Optimal trajectory mass D")->required();

  // explore-sim ---------------------------------------------------------
  auto* sim_cmd = app.add_subcommand("explore-sim",
                                     "Closed-form vs Monte Carlo exploration efficiency");
  std::uint64_t sim_N = 8, sim_opt = 1, sim_kmax = 20, sim_seed = 7;
  std::size_t sim_reps = 2000;
  std::string sim_out;
  sim_cmd->add_option("--trajectories", sim_N, "Total trajectories N")->required();
  sim_cmd->add_option("--optimal", sim_opt, "Optimal trajectories")->required();
  sim_cmd->add_option("--k-max", sim_kmax, "Evaluate k = 1..k-max");
  sim_cmd->add_option("--replicates", sim_reps, "Monte Carlo replicates per k");
  sim_cmd->add_option("--seed", sim_seed, "Simulation seed");
  sim_cmd->add_option("--out", sim_out, "Write CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (*train_cmd) {
      return cmd_train(train_config, train_sets, train_out, train_reinforce, train_seed);
    }
    if (*eval_cmd) {
      return cmd_eval(eval_checkpoint, eval_env, eval_episodes, eval_mode, eval_policy,
                      eval_temperature, eval_dummy, eval_squash, eval_cq, eval_seed);
    }
    if (*sweep_cmd) return cmd_sweep(sweep_config, sweep_sets, sweep_out, sweep_workers);
    if (*grad_cmd) {
      return cmd_gradcheck(gc_loss, gc_env, gc_draws, gc_tol, gc_seed, gc_model, gc_hidden,
                           gc_half_range, gc_batch, gc_margin, gc_out);
    }
    if (*theory_cmd) {
      if (*sl_cmd) {
        std::uint64_t n = sl_sample_complexity(tp.gamma, tp.delta, tp.hyp_count);
        emit_theory(json{{"gamma", tp.gamma}, {"delta", tp.delta}, {"hyp_count", tp.hyp_count}},
                    json{{"sl_sample_complexity", n}},
                    json{{"log", "natural"},
                         {"formula", "ceil((1/(2 gamma^2)) ln(2 |H| / delta))"}},
                    theory_json);
      } else if (*gen_cmd) {
        double b = generalization_lower_bound(tp.D, gb_eta, tp.m, tp.horizon);
        emit_theory(
            json{{"d", tp.D}, {"eta", gb_eta}, {"m", tp.m}, {"horizon", tp.horizon}},
            json{{"lower_bound", b}},
            json{{"formula", "D (1 + e)^(eta (1 - m) T)"}, {"reward_scale", "R_max = 1"}},
            theory_json);
      } else if (*rl_cmd) {
        std::uint64_t n =
            rl_sample_complexity(tp.epsilon, tp.D, tp.m, tp.horizon, tp.hyp_count, tp.delta);
        emit_theory(json{{"epsilon", tp.epsilon},
                         {"d", tp.D},
                         {"m", tp.m},
                         {"horizon", tp.horizon},
                         {"hyp_count", tp.hyp_count},
                         {"delta", tp.delta}},
                    json{{"rl_sample_complexity", n}},
                    json{{"log_base_ratio_term", "1 + e"},
                         {"log_confidence_term", "natural"},
                         {"formula",
                          "ceil(2 (m-1)^2 T^2 / log_{1+e}(D/(1-eps))^2 * ln(2 |H| / delta))"}},
                    theory_json);
      } else if (*ex_cmd) {
        double p = exploration_efficiency_random(tp.N, tp.opt_count, tp.k, ex_i);
        emit_theory(json{{"trajectories", tp.N},
                         {"optimal", tp.opt_count},
                         {"k", tp.k},
                         {"i", ex_i}},
                    json{{"probability", p}},
                    json{{"method", "inclusion-exclusion, exact big-integer arithmetic"}},
                    theory_json);
      } else if (*exp_cmd) {
        double v = expected_exploration_efficiency_closed_form(tp.N, tp.opt_count, tp.k);
        emit_theory(json{{"trajectories", tp.N}, {"optimal", tp.opt_count}, {"k", tp.k}},
                    json{{"expected_distinct_optimal", v}},
                    json{{"method", "tail sum of the at-least-i probabilities"}},
                    theory_json);
      } else if (*hd_cmd) {
        double v = hit_probability_decay(hd_p, tp.n);
        emit_theory(json{{"p", hd_p}, {"n", tp.n}}, json{{"miss_probability", v}},
                    json{{"formula", "(1 - p)^n"}}, theory_json);
      } else if (*joint_cmd) {
        JointBoundResult r = joint_bound(tp.delta_prime, tp.n, tp.k, tp.N, tp.opt_count,
                                         tp.hyp_count, tp.m, tp.horizon, tp.D);
        emit_theory(json{{"delta_prime", tp.delta_prime},
                         {"n", tp.n},
                         {"k", tp.k},
                         {"trajectories", tp.N},
                         {"optimal", tp.opt_count},
                         {"hyp_count", tp.hyp_count},
                         {"m", tp.m},
                         {"horizon", tp.horizon},
                         {"d", tp.D}},
                    json{{"eta", r.eta},
                         {"lower_bound", r.lower_bound},
                         {"exploration_prob", r.exploration_prob},
                         {"trajectories_needed", r.trajectories_needed}},
                    json{{"eta_formula", "2 sqrt((1/(2n)) ln(2 |H| p / (p - 1 + delta')))"},
                         {"holds_with_probability", "at least 1 - delta_prime"}},
                    theory_json);
      }
      return kExitOk;
    }
    if (*sim_cmd) {
      return cmd_explore_sim(sim_N, sim_opt, sim_kmax, sim_reps, sim_seed, sim_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    // Parameter validation rejecting a user-supplied value (environment
    // builders, calculator domains) is a configuration error too.
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitOk;
}
