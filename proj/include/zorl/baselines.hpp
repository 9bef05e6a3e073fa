#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "zorl/common.hpp"
#include "zorl/environments.hpp"
#include "zorl/extended_solver.hpp"
#include "zorl/rng.hpp"
#include "zorl/run_record.hpp"

namespace zorl {

/// Uniform level-L dyadic grid over the unit state and action cubes. Cell
/// assignment goes through the same dyadic index as the partition tree.
struct GridSpec {
  Dims dims;
  int level = 2;

  GridSpec(Dims d, int l) : dims(d), level(l) {
    if (l < 1) throw ConfigError("grid level must be at least 1");
    if (l * d.state > 40 || l * d.action > 40) {
      throw ConfigError("grid too fine for the dimensions");
    }
  }

  std::size_t num_states() const {
    return std::size_t{1} << (static_cast<std::size_t>(dims.state * level));
  }
  std::size_t num_actions() const {
    return std::size_t{1} << (static_cast<std::size_t>(dims.action * level));
  }
  std::size_t state_index(std::span<const double> unit_state) const {
    return dyadic_flat_index(unit_state, level);
  }
  std::size_t action_index(std::span<const double> unit_action) const {
    return dyadic_flat_index(unit_action, level);
  }

  /// Center of the k-th cell of a dims-dimensional level-L grid.
  static Point center(std::size_t index, int dim, int level) {
    const std::uint64_t side = std::uint64_t{1} << level;
    Point p(static_cast<std::size_t>(dim));
    for (auto& x : p) {
      x = (static_cast<double>(index % side) + 0.5) / static_cast<double>(side);
      index /= side;
    }
    return p;
  }
  Point state_center(std::size_t s) const { return center(s, dims.state, level); }
  Point action_center(std::size_t a) const { return center(a, dims.action, level); }
};

struct BaselineConfig {
  std::uint64_t horizon = 20000;
  double delta = 0.05;
  std::uint64_t seed = 1;
  int grid_level = 2;

  // UCRL2: L1 radius sqrt(c_conf log(T/delta) / N), reward bonus
  // sqrt(c_reward log(T/delta) / N). c_conf < 0 selects 14 |S|.
  double c_conf = -1.0;
  double c_reward = 3.5;

  // RVI-Q: step size 1 / ceil(step_scale * n).
  double step_scale = 0.8;
};

namespace detail {

struct GridLogger {
  const EnvSpec& env;
  const GridSpec& grid;
  RunResult& result;

  void log(std::uint64_t t, const std::vector<double>& state,
           const std::vector<double>& action, double raw, std::uint64_t episode,
           const std::function<void(const StepLog&)>& sink) {
    StepLog row;
    row.t = t;
    row.state = state;
    row.action = action;
    row.raw_reward = raw;
    row.normalized_reward = normalize_reward(env, raw);
    row.episode = episode;
    row.active_cells = grid.num_states() * grid.num_actions();
    row.max_level = grid.level;
    if (sink) sink(row);
    result.steps.push_back(std::move(row));
  }
};

}  // namespace detail

/// UCRL2 on a fixed grid: doubling episodes, optimistic rewards and L1
/// confidence rows, extended value iteration without span truncation.
inline RunResult run_ucrl2(const EnvSpec& env, const GridSpec& grid,
                           const BaselineConfig& config,
                           const std::function<void(const StepLog&)>& sink = {}) {
  const std::size_t n_s = grid.num_states();
  const std::size_t n_a = grid.num_actions();
  const double log_term =
      std::log(static_cast<double>(config.horizon) / config.delta);
  const double c_conf =
      config.c_conf < 0.0 ? 14.0 * static_cast<double>(n_s) : config.c_conf;

  std::vector<std::uint64_t> visits(n_s * n_a, 0);
  std::vector<std::uint64_t> transitions(n_s * n_a * n_s, 0);
  std::vector<double> reward_sum(n_s * n_a, 0.0);

  Rng env_rng = make_stream(config.seed, Stream::kEnvironment);
  RunResult result;
  result.steps.reserve(config.horizon);
  detail::GridLogger logger{env, grid, result};
  std::vector<double> state = env.initial_state;
  std::uint64_t t = 0, k = 0;

  try {
    while (t < config.horizon) {
      ++k;
      const std::vector<std::uint64_t> start_visits = visits;
      std::vector<std::uint64_t> in_episode(n_s * n_a, 0);

      ExtendedModel model;
      model.num_states = n_s;
      model.actions.resize(n_s);
      model.rows.resize(n_s * n_a);
      for (std::size_t s = 0; s < n_s; ++s) {
        for (std::size_t a = 0; a < n_a; ++a) {
          const std::size_t sa = s * n_a + a;
          const double n = static_cast<double>(visits[sa]);
          KernelRow& row = model.rows[sa];
          row.owner = sa;
          row.center.assign(n_s, 0.0);
          double r = 1.0;
          if (visits[sa] > 0) {
            for (std::size_t s2 = 0; s2 < n_s; ++s2) {
              row.center[s2] = static_cast<double>(transitions[sa * n_s + s2]) / n;
            }
            row.radius = std::min(2.0, std::sqrt(c_conf * log_term / n));
            r = std::min(1.0, reward_sum[sa] / n +
                                  std::sqrt(config.c_reward * log_term / n));
          }
          model.actions[s].push_back({sa, r});
        }
      }
      const double eps = 1.0 / std::sqrt(std::max<double>(1.0, static_cast<double>(t)));
      const DiscretePolicy policy =
          scopt_solve(model, eps, 0, {StoppingRule::kIncrement, 0, {}, 0.5});

      while (t < config.horizon) {
        const auto unit_state = to_unit_state(env, state);
        const std::size_t s = grid.state_index(unit_state);
        const std::size_t a = policy.choice[s];
        const std::size_t sa = s * n_a + a;
        if (in_episode[sa] >= std::max<std::uint64_t>(1, start_visits[sa])) break;

        const auto action = from_unit_action(env, grid.action_center(a));
        StepResult out = step(env, state, action, env_rng);
        const std::size_t s2 = grid.state_index(to_unit_state(env, out.next_state));
        ++visits[sa];
        ++in_episode[sa];
        ++transitions[sa * n_s + s2];
        reward_sum[sa] += normalize_reward(env, out.raw_reward);
        logger.log(t, state, action, out.raw_reward, k, sink);
        state = std::move(out.next_state);
        ++t;
      }
    }
  } catch (const ConvergenceError& e) {
    result.failed = true;
    result.error = e.what();
  }
  result.episodes = k;
  return result;
}

/// Greedy action of a Q row; ties go to the lowest index.
inline std::size_t greedy_action(std::span<const double> q) {
  return static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
}

/// Relative value iteration Q-learning on a fixed grid, with the grid cell
/// of the initial state as reference and epsilon-greedy exploration
/// (epsilon = 1 / sqrt(state visits)).
inline RunResult run_rviq(const EnvSpec& env, const GridSpec& grid,
                          const BaselineConfig& config,
                          const std::function<void(const StepLog&)>& sink = {},
                          std::vector<double>* q_out = nullptr) {
  const std::size_t n_s = grid.num_states();
  const std::size_t n_a = grid.num_actions();
  std::vector<double> q(n_s * n_a, 0.0);
  std::vector<std::uint64_t> visits(n_s * n_a, 0);
  std::vector<std::uint64_t> state_visits(n_s, 0);

  Rng env_rng = make_stream(config.seed, Stream::kEnvironment);
  Rng agent_rng = make_stream(config.seed, Stream::kAgent);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any_action(0, n_a - 1);

  RunResult result;
  result.steps.reserve(config.horizon);
  detail::GridLogger logger{env, grid, result};
  std::vector<double> state = env.initial_state;
  const std::size_t s_ref = grid.state_index(to_unit_state(env, state));
  auto row = [&](std::size_t s) {
    return std::span<const double>(q.data() + s * n_a, n_a);
  };

  for (std::uint64_t t = 0; t < config.horizon; ++t) {
    const std::size_t s = grid.state_index(to_unit_state(env, state));
    const double eps = 1.0 / std::sqrt(static_cast<double>(++state_visits[s]));
    std::size_t a = greedy_action(row(s));
    if (coin(agent_rng) < eps) a = any_action(agent_rng);

    const auto action = from_unit_action(env, grid.action_center(a));
    StepResult out = step(env, state, action, env_rng);
    const std::size_t s2 = grid.state_index(to_unit_state(env, out.next_state));
    const double r = normalize_reward(env, out.raw_reward);
    const std::size_t sa = s * n_a + a;
    const double beta =
        1.0 / std::ceil(config.step_scale * static_cast<double>(++visits[sa]));
    const double target = r + max_of(row(s2)) - max_of(row(s_ref));
    q[sa] += beta * (target - q[sa]);

    logger.log(t, state, action, out.raw_reward, 1, sink);
    state = std::move(out.next_state);
  }
  result.episodes = 1;
  if (q_out) *q_out = q;
  return result;
}

}  // namespace zorl
