#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rankgrad {

// One evaluation row; `step` counts supervised updates, `env_steps` counts
// environment transitions.
struct EvalRecord {
  std::uint64_t step = 0;
  std::uint64_t episode = 0;
  std::uint64_t env_steps = 0;
  double eval_return_mean = 0.0;
  double eval_return_min = 0.0;
  std::uint64_t buffer_regular = 0;
  std::uint64_t buffer_nearopt = 0;
  std::uint64_t distinct_nearopt = 0;
  double loss = 0.0;           // most recent supervised loss (0 before any update)
  double grad_inf_norm = 0.0;  // most recent update's gradient infinity norm
};

struct RunLog {
  std::string variant;          // label used by sweeps ("rpg", "reinforce", ...)
  std::uint64_t seed = 0;
  std::string config_snapshot;  // canonical serialized config
  std::vector<EvalRecord> records;
  double wall_clock_sec = 0.0;
  std::string final_checkpoint;
  bool reached_target = false;
  std::uint64_t episodes_to_first_insert = 0;  // 0 when no insert ever happened
  double final_eval_return = 0.0;
};

}  // namespace rankgrad
