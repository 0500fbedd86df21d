#pragma once

#include <iosfwd>
#include <span>

#include "rankgrad/config.hpp"
#include "rankgrad/offpolicy.hpp"
#include "rankgrad/runlog.hpp"

namespace rankgrad {

// Metrics CSV: header plus one row per evaluation record; numbers are
// rendered with shortest-round-trip formatting, so identical logs produce
// byte-identical files.
extern const char* const kMetricsCsvHeader;
void write_metrics_csv(const RunLog& log, std::ostream& out);
void write_metrics_csv(const RunLog& log, const std::string& path);
void write_config_snapshot(const RunLog& log, const std::string& path);

// Two-sided standard normal quantile at probability p (Acklam's rational
// approximation, |relative error| < 1.2e-9).
double normal_quantile(double p);

struct CurvePoint {
  double step = 0.0;  // env_steps coordinate
  double mean = 0.0;
  double half_width = 0.0;
};

struct AggregateResult {
  std::vector<CurvePoint> points;
  bool interpolated = false;  // evaluation grids disagreed; curves were
                              // linearly interpolated onto the coarsest grid
};

// Pointwise normal-approximation interval across runs: mean and
// z * sample-sd half-width per evaluation step (z from `confidence`;
// half-width 0 when all runs agree). Logs whose evaluation grids differ are
// interpolated onto the coarsest grid and flagged.
AggregateResult aggregate(std::span<const RunLog> logs, double confidence = 0.95);

// Cartesian sweep: every algorithm x threshold x environment variant is run
// with every seed. Result logs keep sweep order (variants outer, seeds
// inner). When out_dir is nonempty, writes one metrics CSV per run plus
// aggregate.csv per variant. A run that throws is recorded as a failed
// RunLog (variant suffixed "/failed") and the sweep continues.
struct SweepSpec {
  Config base;                          // train config defaults for every run
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> algorithms;  // rpg | xent | epg | reinforce
  std::vector<std::string> c_values;    // optional; "" means keep base c
  std::vector<std::string> envs;        // optional; "" means keep base env
  std::string out_dir;
  unsigned workers = 1;
};

SweepSpec sweep_spec_from(const Config& cfg);
std::vector<RunLog> run_sweep(const SweepSpec& spec);

// On-policy REINFORCE baseline: samples episodes from the listwise policy
// and ascends lpg_trajectory_grad (the exact same gradient code path the
// off-policy module exposes); evaluates greedily on the same schedule as
// train().
RunLog onpolicy_reinforce_baseline(const TrainRunConfig& cfg, const MdpSpec& spec);

}  // namespace rankgrad
