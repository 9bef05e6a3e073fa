#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace zorl {

/// One environment step as seen by an agent.
struct StepLog {
  std::uint64_t t = 0;
  std::vector<double> state;   // native
  std::vector<double> action;  // native
  double raw_reward = 0.0;
  double normalized_reward = 0.0;
  std::uint64_t episode = 0;
  std::uint64_t active_cells = 0;
  int max_level = 0;
};

/// A split performed by the activation rule.
struct SplitEvent {
  std::uint64_t t = 0;
  int level = 0;               // level of the cell that split
  std::uint64_t visits = 0;    // its N_t when it split
};

struct RunResult {
  std::vector<StepLog> steps;
  std::vector<SplitEvent> splits;
  std::uint64_t episodes = 0;
  bool failed = false;
  std::string error;
};

/// Row of the harness CSV.
struct RunRecord {
  std::string run_id;
  std::string env;
  std::string algo;
  std::uint64_t seed = 0;
  std::uint64_t t = 0;
  double raw_reward = 0.0;
  double cum_raw_reward = 0.0;
  std::uint64_t episode_index = 0;
  std::uint64_t active_cell_count = 0;
  int max_level = 0;
};

}  // namespace zorl
