#include "rankgrad/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace rankgrad {

const char* const kMetricsCsvHeader =
    "step,episode,env_steps,eval_return_mean,eval_return_min,"
    "buffer_regular,buffer_nearopt,distinct_nearopt,loss,grad_inf_norm";

void write_metrics_csv(const RunLog& log, std::ostream& out) {
  out << kMetricsCsvHeader << "\n";
  for (const auto& r : log.records) {
    out << r.step << ',' << r.episode << ',' << r.env_steps << ','
        << format_double(r.eval_return_mean) << ',' << format_double(r.eval_return_min) << ','
        << r.buffer_regular << ',' << r.buffer_nearopt << ',' << r.distinct_nearopt << ','
        << format_double(r.loss) << ',' << format_double(r.grad_inf_norm) << "\n";
  }
}

void write_metrics_csv(const RunLog& log, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  write_metrics_csv(log, f);
  if (!f) throw std::runtime_error("write failed: " + path);
}

void write_config_snapshot(const RunLog& log, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << log.config_snapshot;
  if (!f) throw std::runtime_error("write failed: " + path);
}

// Acklam's inverse-normal-CDF rational approximation (relative error below
// 1.2e-9 across (0, 1)).
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("normal_quantile: p must lie strictly in (0, 1)");
  }
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  const double p_high = 1.0 - p_low;
  double q, r;
  if (p < p_low) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= p_high) {
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  q = std::sqrt(-2.0 * std::log(1.0 - p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

namespace {

// Linear interpolation of (xs, ys) at x, clamped to the endpoints.
double interp_clamped(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  std::size_t lo = hi - 1;
  double span = xs[hi] - xs[lo];
  if (span <= 0.0) return ys[lo];
  double t = (x - xs[lo]) / span;
  return ys[lo] + t * (ys[hi] - ys[lo]);
}

}  // namespace

AggregateResult aggregate(std::span<const RunLog> logs, double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw std::invalid_argument("aggregate: confidence must lie strictly in (0, 1)");
  }
  AggregateResult out;
  std::vector<std::vector<double>> grids;   // env_steps per usable log
  std::vector<std::vector<double>> curves;  // eval_return_mean per usable log
  for (const auto& log : logs) {
    if (log.records.empty()) continue;
    std::vector<double> g, c;
    g.reserve(log.records.size());
    c.reserve(log.records.size());
    for (const auto& r : log.records) {
      g.push_back(static_cast<double>(r.env_steps));
      c.push_back(r.eval_return_mean);
    }
    grids.push_back(std::move(g));
    curves.push_back(std::move(c));
  }
  if (grids.empty()) return out;

  bool identical = true;
  for (std::size_t i = 1; i < grids.size() && identical; ++i) identical = grids[i] == grids[0];

  std::size_t coarsest = 0;
  for (std::size_t i = 1; i < grids.size(); ++i) {
    if (grids[i].size() < grids[coarsest].size()) coarsest = i;
  }
  const std::vector<double>& target = grids[coarsest];
  out.interpolated = !identical;

  const double z = normal_quantile(0.5 + confidence / 2.0);
  const std::size_t n = grids.size();
  for (std::size_t p = 0; p < target.size(); ++p) {
    double x = target[p];
    std::vector<double> vals;
    vals.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      vals.push_back(identical ? curves[i][p] : interp_clamped(grids[i], curves[i], x));
    }
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(n);
    double sd = 0.0;
    if (n >= 2) {
      double ss = 0.0;
      for (double v : vals) ss += (v - mean) * (v - mean);
      sd = std::sqrt(ss / static_cast<double>(n - 1));
    }
    out.points.push_back({x, mean, z * sd});
  }
  return out;
}

namespace {

const std::set<std::string>& sweep_algorithm_names() {
  static const std::set<std::string> names = {"rpg", "xent", "epg", "reinforce"};
  return names;
}

// Maps a sweep algorithm tag onto train-config keys. "reinforce" shares the
// listwise settings; run_sweep routes it to the on-policy baseline.
void apply_algorithm(Config& cfg, const std::string& alg) {
  cfg.erase("policy");  // the tag decides the policy class
  if (alg == "rpg") {
    cfg["loss"] = "hinge";
  } else if (alg == "xent" || alg == "reinforce") {
    cfg["loss"] = "xent";
  } else if (alg == "epg") {
    cfg["loss"] = "xent";
    cfg["explorer"] = "epg";
  } else {
    throw ConfigError("unknown sweep algorithm: " + alg);
  }
}

std::string sanitize_for_filename(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char ch : s) {
    bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
              ch == '.' || ch == '-' || ch == '_';
    out.push_back(ok ? ch : '_');
  }
  return out;
}

struct SweepRunPlan {
  std::string variant;
  std::size_t variant_index = 0;
  std::uint64_t seed = 0;
  Config cfg;
  bool reinforce = false;
};

RunLog execute_plan(const SweepRunPlan& plan, const std::string& out_dir) {
  TrainRunConfig tcfg = train_config_from(plan.cfg);
  if (!out_dir.empty()) {
    tcfg.out_dir = out_dir + "/" + sanitize_for_filename(plan.variant) + "_seed" +
                   std::to_string(plan.seed);
  }
  MdpSpec spec = make_env(tcfg.env_name);
  RunLog log = plan.reinforce ? onpolicy_reinforce_baseline(tcfg, spec) : train(tcfg, spec);
  log.variant = plan.variant;
  return log;
}

}  // namespace

SweepSpec sweep_spec_from(const Config& cfg) {
  SweepSpec spec;
  for (const auto& s : split_csv(require_string(cfg, "sweep_seeds"))) {
    spec.seeds.push_back(parse_u64(s, "sweep_seeds"));
  }
  spec.algorithms = split_csv(require_string(cfg, "sweep_algorithms"));
  for (const auto& a : spec.algorithms) {
    if (sweep_algorithm_names().count(a) == 0) {
      throw ConfigError("sweep_algorithms: unknown algorithm '" + a +
                        "' (expected rpg, xent, epg, or reinforce)");
    }
  }
  spec.c_values = split_csv(get_string(cfg, "sweep_c", ""));
  // Environment specs contain commas, so variants are ';'-separated.
  spec.envs = split_csv(get_string(cfg, "sweep_envs", ""), ';');
  spec.out_dir = get_string(cfg, "out_dir", "");
  spec.workers = static_cast<unsigned>(get_u64(cfg, "workers", 1));
  if (spec.seeds.empty()) throw ConfigError("sweep_seeds: need at least one seed");
  if (spec.algorithms.empty()) throw ConfigError("sweep_algorithms: need at least one algorithm");
  if (spec.workers == 0) throw ConfigError("workers: must be at least 1");
  spec.base = cfg;
  for (const char* k : {"sweep_seeds", "sweep_algorithms", "sweep_c", "sweep_envs", "out_dir",
                        "workers"}) {
    spec.base.erase(k);
  }
  return spec;
}

std::vector<RunLog> run_sweep(const SweepSpec& spec) {
  if (spec.seeds.empty() || spec.algorithms.empty()) {
    throw ConfigError("run_sweep: seeds and algorithms must be nonempty");
  }
  std::vector<std::string> envs = spec.envs.empty() ? std::vector<std::string>{""} : spec.envs;
  std::vector<std::string> cs =
      spec.c_values.empty() ? std::vector<std::string>{""} : spec.c_values;

  std::vector<SweepRunPlan> plans;
  std::size_t variant_count = 0;
  for (const auto& env : envs) {
    for (const auto& c : cs) {
      for (const auto& alg : spec.algorithms) {
        std::string variant = alg;
        if (!c.empty()) variant += ",c=" + c;
        if (!env.empty()) variant += "," + env;
        std::size_t vidx = variant_count++;
        for (std::uint64_t seed : spec.seeds) {
          SweepRunPlan plan;
          plan.variant = variant;
          plan.variant_index = vidx;
          plan.seed = seed;
          plan.reinforce = alg == "reinforce";
          plan.cfg = spec.base;
          apply_algorithm(plan.cfg, alg);
          if (!env.empty()) plan.cfg["env"] = env;
          if (!c.empty()) plan.cfg["c"] = c;
          plan.cfg["seed"] = std::to_string(seed);
          plans.push_back(std::move(plan));
        }
      }
    }
  }

  if (!spec.out_dir.empty()) std::filesystem::create_directories(spec.out_dir);

  std::vector<RunLog> logs(plans.size());
  auto run_one = [&](std::size_t i) {
    try {
      logs[i] = execute_plan(plans[i], spec.out_dir);
    } catch (const std::exception& e) {
      // A failed run is recorded and skipped by aggregation; the sweep goes on.
      RunLog failed;
      failed.variant = plans[i].variant + "/failed";
      failed.seed = plans[i].seed;
      failed.config_snapshot = "error = " + std::string(e.what()) + "\n";
      logs[i] = std::move(failed);
    }
  };

  unsigned workers = std::min<unsigned>(spec.workers, static_cast<unsigned>(plans.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < plans.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < plans.size(); i = next.fetch_add(1)) {
          run_one(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  if (!spec.out_dir.empty()) {
    for (std::size_t i = 0; i < plans.size(); ++i) {
      std::string stem = sanitize_for_filename(plans[i].variant) + "_seed" +
                         std::to_string(plans[i].seed);
      write_metrics_csv(logs[i], spec.out_dir + "/" + stem + ".csv");
      write_config_snapshot(logs[i], spec.out_dir + "/" + stem + ".config");
    }
    std::ofstream agg(spec.out_dir + "/aggregate.csv", std::ios::binary);
    if (!agg) throw std::runtime_error("cannot open for writing: " + spec.out_dir + "/aggregate.csv");
    agg << "variant,env_steps,mean,half_width,interpolated\n";
    for (std::size_t v = 0; v < variant_count; ++v) {
      std::vector<RunLog> group;
      for (std::size_t i = 0; i < plans.size(); ++i) {
        if (plans[i].variant_index == v && logs[i].variant == plans[i].variant) {
          group.push_back(logs[i]);
        }
      }
      if (group.empty()) continue;
      AggregateResult res = aggregate(group);
      for (const auto& p : res.points) {
        agg << group.front().variant << ',' << format_double(p.step) << ','
            << format_double(p.mean) << ',' << format_double(p.half_width) << ','
            << (res.interpolated ? "yes" : "no") << "\n";
      }
    }
  }
  return logs;
}

RunLog onpolicy_reinforce_baseline(const TrainRunConfig& cfg, const MdpSpec& spec) {
  auto t0 = std::chrono::steady_clock::now();
  cfg.validate(spec);

  std::mt19937_64 master(cfg.seed);
  const std::uint64_t env_seed = master();
  master();  // keep the stream layout of train(): explore
  master();  // batch
  const std::uint64_t init_seed = master();
  const std::uint64_t eval_seed_base = master();

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

  RunLog log;
  log.variant = "reinforce";
  log.seed = cfg.seed;
  log.config_snapshot = serialize_config(to_config(cfg));

  std::string checkpoint_path;
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    checkpoint_path = cfg.out_dir + "/checkpoint.rpgc";
  }

  EnvState env(spec, env_seed);
  std::uint64_t env_steps = 0;
  std::uint64_t updates = 0;
  std::uint64_t next_eval = cfg.evaluation_period;
  double last_loss = 0.0;
  double last_gnorm = 0.0;
  bool stop = false;

  for (std::uint64_t ep = 0; ep < cfg.max_episodes && !stop; ++ep) {
    if (ep > 0) env.reset();
    AnyPolicy policy = ListwisePolicy{&model, cfg.temperature};
    Trajectory traj = rollout(spec, policy, SelectMode::sample, env);
    env_steps += traj.steps.size();

    // Shared gradient path with the estimator module; ascend the return-
    // weighted log-likelihood.
    GradEstimate est = lpg_trajectory_grad(model, traj);
    last_loss = est.loss;
    last_gnorm = est.grad.inf_norm();
    est.grad.scale(-1.0);
    sgd_update(model, est.grad, cfg.lr);
    ++updates;

    if (env_steps >= next_eval) {
      next_eval = (env_steps / cfg.evaluation_period + 1) * cfg.evaluation_period;
      auto ev = evaluate(model, spec, cfg.eval_episodes, SelectMode::greedy,
                         eval_seed_base + log.records.size());
      EvalRecord rec;
      rec.step = updates;
      rec.episode = ep;
      rec.env_steps = env_steps;
      rec.eval_return_mean = ev.mean;
      rec.eval_return_min = ev.min;
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
        stop = true;
      }
    }
    if (cfg.max_env_steps != 0 && env_steps >= cfg.max_env_steps) stop = true;
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
