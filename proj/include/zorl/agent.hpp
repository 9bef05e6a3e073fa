#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "zorl/common.hpp"
#include "zorl/environments.hpp"
#include "zorl/estimator.hpp"
#include "zorl/extended_solver.hpp"
#include "zorl/geometry.hpp"
#include "zorl/rng.hpp"
#include "zorl/run_record.hpp"

namespace zorl {

/// Constant c1 of the concentration bound, solved from its implicit
/// definition D^dS log(2 T N1 / delta) = 4.5 c1 log(T / delta) with D = 1
/// and N1 = 2 (T / (c1 log(T / delta)))^(d / (dS + 2)).
inline double derive_c1(double horizon, double delta, int state_dim, int dim) {
  const double log_t = std::log(horizon / delta);
  double c1 = 1.0;
  for (int i = 0; i < 100; ++i) {
    const double n1 = 2.0 * std::pow(horizon / (c1 * log_t),
                                     static_cast<double>(dim) / (state_dim + 2));
    const double next = std::log(2.0 * horizon * n1 / delta) / (4.5 * log_t);
    if (std::abs(next - c1) < 1e-14) return next;
    c1 = next;
  }
  return c1;
}

struct AgentConfig {
  enum class Mode { kPractical, kTheoretical };
  enum class SpanMode { kFixed, kFormula };

  std::uint64_t horizon = 20000;
  double delta = 0.05;
  double lipschitz_r = 0.01;
  double alpha = 0.5;
  double c_v = 1.0;
  double lipschitz_p = 1.0;

  double c_a = 10.0;
  double c_eta = 10.0;
  double span_bound = 4.0;
  double c_h = 0.1;

  // Theoretical mode: c1 <= 0 means derive it from T, delta and dims.
  double c1 = 0.0;
  double kappa1 = 1.0;

  Mode mode = Mode::kPractical;
  SpanMode span_mode = SpanMode::kFixed;
  StoppingRule stopping = StoppingRule::kIncrement;
  int max_depth = 20;
  std::uint64_t seed = 1;

  void validate() const {
    if (horizon < 1) throw ConfigError("horizon T must be at least 1");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
    if (!(lipschitz_r > 0.0 && c_v > 0.0 && lipschitz_p > 0.0 && c_a > 0.0 &&
          c_eta > 0.0 && span_bound > 0.0 && c_h > 0.0 && kappa1 > 0.0)) {
      throw ConfigError("agent constants must be positive");
    }
    if (span_mode == SpanMode::kFormula && horizon < 2) {
      throw ConfigError("span formula needs T >= 2");
    }
  }

  double c1_value(const Dims& dims) const {
    return c1 > 0.0 ? c1
                    : derive_c1(static_cast<double>(horizon), delta, dims.state,
                                dims.total());
  }

  /// Span bound c used by ScOpt.
  double span() const {
    if (span_mode == SpanMode::kFixed) return span_bound;
    const double t = static_cast<double>(horizon);
    return (1.0 + lipschitz_r) / ((1.0 - alpha) * (1.0 - 1.0 / t));
  }

  ActivationRule activation(const Dims& dims) const {
    ActivationRule rule;
    rule.mode = mode == Mode::kPractical ? ActivationRule::Mode::kPractical
                                         : ActivationRule::Mode::kTheoretical;
    rule.state_dim = dims.state;
    rule.c_a = c_a;
    rule.c1 = c1_value(dims);
    rule.horizon = static_cast<double>(horizon);
    rule.delta = delta;
    return rule;
  }

  RadiusParams radius(const Dims& dims) const {
    RadiusParams p;
    p.mode = mode == Mode::kPractical ? RadiusParams::Mode::kPractical
                                      : RadiusParams::Mode::kTheoretical;
    p.c_eta = c_eta;
    p.c1 = c1_value(dims);
    p.alpha = alpha;
    p.lipschitz_p = lipschitz_p;
    p.c_v = c_v;
    p.horizon = static_cast<double>(horizon);
    p.delta = delta;
    return p;
  }
};

/// Normalized reward at unit-cube coordinates.
using UnitReward =
    std::function<double(std::span<const double>, std::span<const double>)>;

inline UnitReward unit_reward(const EnvSpec& env) {
  return [&env](std::span<const double> s, std::span<const double> a) {
    const auto ns = from_unit_state(env, s);
    const auto na = from_unit_action(env, a);
    return normalize_reward(env, reward(env, ns, na));
  };
}

/// Extended model over the current partition. Row r belongs to the r-th
/// active cell; rewards carry the L_r * diam bonus.
inline ExtendedModel build_extended_model(const PartitionTree& tree,
                                          const DiscreteSpaces& spaces,
                                          const UnitReward& reward_fn,
                                          const AgentConfig& config) {
  const std::size_t n_states = spaces.states.size();
  const double floor = (1.0 - config.alpha) /
                       (static_cast<double>(n_states) *
                        static_cast<double>(config.horizon));
  const RadiusParams radius = config.radius(tree.dims());

  ExtendedModel model;
  model.num_states = n_states;
  model.floor = floor;
  model.gamma = 1.0 - floor;
  model.span_bound = config.span();
  model.actions.resize(n_states);

  std::map<std::size_t, std::size_t> row_of;
  for (std::size_t id : tree.active()) {
    row_of.emplace(id, model.rows.size());
    model.rows.push_back(kernel_row(tree, id, radius, floor));
  }
  std::map<std::size_t, double> reward_of;
  for (std::size_t s = 0; s < n_states; ++s) {
    for (const auto& act : spaces.actions[s]) {
      auto it = reward_of.find(act.cell);
      if (it == reward_of.end()) {
        const Point rep = tree.representative(act.cell);
        const auto ds = static_cast<std::size_t>(tree.dims().state);
        const double r = reward_fn(std::span<const double>(rep.data(), ds),
                                   std::span<const double>(rep.data() + ds,
                                                           rep.size() - ds));
        it = reward_of
                 .emplace(act.cell, r + config.lipschitz_r *
                                            tree.cell(act.cell).diameter())
                 .first;
      }
      model.actions[s].push_back({row_of.at(act.cell), it->second});
    }
  }
  return model;
}

/// A discrete policy frozen on the episode's level-l_max S-cell grid.
struct ContinuousPolicy {
  int level = 0;
  std::vector<Point> action;            // unit action per fine S-cell
  std::vector<std::size_t> cell;        // owning cell at episode start

  std::size_t state_cell(std::span<const double> unit_state) const {
    return dyadic_flat_index(unit_state, level);
  }
  const Point& act(std::span<const double> unit_state) const {
    return action.at(state_cell(unit_state));
  }
};

inline ContinuousPolicy extend_policy(const DiscretePolicy& policy,
                                      const DiscreteSpaces& spaces) {
  ContinuousPolicy out;
  out.level = spaces.level;
  out.action.reserve(spaces.states.size());
  out.cell.reserve(spaces.states.size());
  for (std::size_t s = 0; s < spaces.states.size(); ++s) {
    const auto& chosen = spaces.actions[s].at(policy.choice.at(s));
    out.action.push_back(chosen.representative);
    out.cell.push_back(chosen.cell);
  }
  return out;
}

/// Mean diameter of the cells the policy plays, over S_t.
inline double mean_policy_diameter(const ContinuousPolicy& policy,
                                   const PartitionTree& tree) {
  double sum = 0.0;
  for (std::size_t id : policy.cell) sum += tree.cell(id).diameter();
  return sum / static_cast<double>(policy.cell.size());
}

/// Episode length H_k from the (approximate) policy diameter.
inline std::uint64_t episode_duration(const ContinuousPolicy& policy,
                                      const PartitionTree& tree,
                                      const AgentConfig& config) {
  const int ds = tree.dims().state;
  double diam = mean_policy_diameter(policy, tree);
  double scale = config.c_h;
  if (config.mode == AgentConfig::Mode::kTheoretical) {
    diam *= config.kappa1;
    scale *= std::log(static_cast<double>(config.horizon) / config.delta);
  }
  const double h = std::ceil(scale * std::pow(diam, -2.0 * (ds + 1)));
  if (!(h < 1e18)) return std::uint64_t{1} << 62;
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(h));
}

/// Callback receiving each step as it happens.
using StepSink = std::function<void(const StepLog&)>;

/// Observation points inside the ZoRL loop.
struct ZorlHooks {
  StepSink on_step;
  // Called at each episode start with k, the frozen policy, the tree it
  // was built from and the chosen episode length H_k.
  std::function<void(std::uint64_t, const ContinuousPolicy&,
                     const PartitionTree&, std::uint64_t)>
      on_episode;
  std::function<void(const PartitionTree&)> on_finish;
};

/// Runs ZoRL for exactly T steps on the environment.
inline RunResult run_zorl(const EnvSpec& env, const AgentConfig& config,
                          const ZorlHooks& hooks = {}) {
  config.validate();
  const Dims dims = env.dims;
  const auto ds = static_cast<std::size_t>(dims.state);
  PartitionTree tree(dims, config.max_depth);
  const ActivationRule rule = config.activation(dims);
  const UnitReward reward_fn = unit_reward(env);
  Rng env_rng = make_stream(config.seed, Stream::kEnvironment);
  ScoptOptions scopt;
  scopt.rule = config.stopping;
  const double epsilon = 1.0 / static_cast<double>(config.horizon);

  RunResult result;
  result.steps.reserve(config.horizon);
  std::vector<double> state = env.initial_state;
  ContinuousPolicy policy;
  std::uint64_t h = 0, h_k = 0, k = 0;
  std::vector<double> z(static_cast<std::size_t>(dims.total()));

  try {
    for (std::uint64_t t = 0; t < config.horizon; ++t) {
      if (h >= h_k) {
        ++k;
        h = 0;
        const DiscreteSpaces spaces = tree.discrete_spaces();
        const ExtendedModel model =
            build_extended_model(tree, spaces, reward_fn, config);
        const DiscretePolicy discrete = scopt_solve(model, epsilon, 0, scopt);
        policy = extend_policy(discrete, spaces);
        h_k = episode_duration(policy, tree, config);
        if (hooks.on_episode) hooks.on_episode(k, policy, tree, h_k);
      }
      ++h;
      const auto unit_state = to_unit_state(env, state);
      const Point& unit_action = policy.act(unit_state);
      const auto action = from_unit_action(env, unit_action);
      StepResult out = step(env, state, action, env_rng);
      const auto unit_next = to_unit_state(env, out.next_state);

      std::copy(unit_state.begin(), unit_state.end(), z.begin());
      std::copy(unit_action.begin(), unit_action.end(), z.begin() + ds);
      const TransitionOutcome rec = record_transition(tree, z, unit_next, rule);
      if (rec.split) result.splits.push_back({t, rec.level, rec.visits});

      StepLog log;
      log.t = t;
      log.state = state;
      log.action = action;
      log.raw_reward = out.raw_reward;
      log.normalized_reward = normalize_reward(env, out.raw_reward);
      log.episode = k;
      log.active_cells = tree.active().size();
      log.max_level = tree.max_level();
      if (hooks.on_step) hooks.on_step(log);
      result.steps.push_back(std::move(log));
      state = std::move(out.next_state);
    }
  } catch (const ConvergenceError& e) {
    result.failed = true;
    result.error = e.what();
  }
  result.episodes = k;
  if (hooks.on_finish) hooks.on_finish(tree);
  return result;
}

}  // namespace zorl
