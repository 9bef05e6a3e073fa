#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "zorl/common.hpp"
#include "zorl/estimator.hpp"

namespace zorl {

/// Finite extended MDP: per-state action lists pointing at shared
/// confidence rows, bonus-augmented rewards, span bound c and the
/// contraction factor gamma used by the stopping rule.
struct ExtendedModel {
  struct Action {
    std::size_t row = 0;
    double reward = 0.0;
  };

  std::size_t num_states = 0;
  std::vector<std::vector<Action>> actions;
  std::vector<KernelRow> rows;
  double floor = 0.0;
  double span_bound = std::numeric_limits<double>::infinity();
  double gamma = 0.5;

  void validate() const {
    if (num_states == 0) throw ConfigError("extended model has no states");
    if (actions.size() != num_states) {
      throw ConfigError("action lists do not match the state count");
    }
    if (floor < 0.0 || floor * static_cast<double>(num_states) > 1.0 + 1e-12) {
      throw ConfigError("floor " + std::to_string(floor) +
                        " makes the floored simplex empty");
    }
    if (!(gamma > 0.0 && gamma < 1.0)) {
      throw ConfigError("contraction factor must lie in (0,1)");
    }
    if (!(span_bound > 0.0)) throw ConfigError("span bound must be positive");
    for (std::size_t s = 0; s < num_states; ++s) {
      if (actions[s].empty()) {
        throw ConfigError("state " + std::to_string(s) + " has no actions");
      }
      for (const auto& a : actions[s]) {
        if (a.row >= rows.size()) throw ConfigError("action row out of range");
      }
    }
    for (const auto& row : rows) {
      if (row.center.size() != num_states) {
        throw ConfigError("kernel row size does not match the state count");
      }
    }
  }
};

/// Deterministic policy returned by ScOpt.
struct DiscretePolicy {
  std::vector<std::size_t> choice;  // action index into actions[s]
  double index = 0.0;               // optimistic average reward
  std::vector<double> bias;         // final iterate, zero at s_star
  std::vector<bool> feasible;       // per-state feasibility of the greedy map
  std::size_t iterations = 0;
};

/// Indices of v in ascending order of value (ties by index).
inline std::vector<std::size_t> ascending_order(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  return order;
}

struct InnerMaxResult {
  double value = 0.0;
  std::vector<double> theta;
};

/// max theta.v over {theta >= floor, sum theta = 1, |theta - center|_1 <=
/// radius}. `order` must list the indices of v in ascending value.
///
/// Coordinates below the floor are raised to it first; the remaining
/// transfer budget (radius / 2) goes to the highest-v coordinate. Mass is
/// taken from coordinates in ascending-v order down to the floor. When the
/// ball misses the floored simplex the closest feasible point is used.
inline InnerMaxResult inner_max(std::span<const double> v, const KernelRow& row,
                                std::span<const std::size_t> order) {
  const std::size_t n = v.size();
  const double f = row.floor;
  if (f < 0.0 || f * static_cast<double>(n) > 1.0 + 1e-12) {
    throw ConfigError("infeasible floor for a " + std::to_string(n) +
                      "-state simplex");
  }
  InnerMaxResult out;
  out.theta.assign(row.center.begin(), row.center.end());
  auto& theta = out.theta;
  const std::size_t top = order.back();

  const double mass = std::accumulate(theta.begin(), theta.end(), 0.0);
  if (mass <= 0.0) {
    // Zero-visit row: every simplex point is at L1 distance 1.
    std::fill(theta.begin(), theta.end(), f);
    theta[top] = 1.0 - f * static_cast<double>(n - 1);
  } else {
    if (std::abs(mass - 1.0) > 1e-12) {
      for (double& t : theta) t /= mass;
    }
    double deficit = 0.0;
    for (double& t : theta) {
      if (t < f) {
        deficit += f - t;
        t = f;
      }
    }
    double available_other = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i != top) available_other += theta[i] - f;
    }
    const double budget = std::max(row.radius / 2.0, deficit);
    const double extra =
        std::clamp(std::min(budget - deficit, available_other - deficit), 0.0,
                   std::numeric_limits<double>::infinity());
    theta[top] += extra;
    double to_remove = deficit + extra;
    for (std::size_t k = 0; k < n && to_remove > 0.0; ++k) {
      const std::size_t i = order[k];
      if (i == top) continue;
      const double take = std::min(theta[i] - f, to_remove);
      theta[i] -= take;
      to_remove -= take;
    }
    if (to_remove > 0.0) theta[top] -= to_remove;
  }
  out.value = 0.0;
  for (std::size_t i = 0; i < n; ++i) out.value += theta[i] * v[i];
  return out;
}

inline InnerMaxResult inner_max(std::span<const double> v,
                                const KernelRow& row) {
  const auto order = ascending_order(v);
  return inner_max(v, row, order);
}

/// min theta.v over the same set.
inline InnerMaxResult inner_min(std::span<const double> v,
                                const KernelRow& row) {
  std::vector<double> neg(v.begin(), v.end());
  for (double& x : neg) x = -x;
  auto res = inner_max(neg, row);
  res.value = -res.value;
  return res;
}

struct BellmanResult {
  std::vector<double> value;
  std::vector<std::size_t> argmax;          // action index per state
  std::vector<std::vector<double>> theta;   // filled on request
};

/// Extended Bellman operator: per state, the best action and the best
/// kernel in its confidence row. Ties go to the lowest action index.
inline BellmanResult bellman_T(std::span<const double> v,
                               const ExtendedModel& model,
                               bool record_theta = false) {
  const auto order = ascending_order(v);
  std::vector<double> row_value(model.rows.size());
  std::vector<std::vector<double>> row_theta;
  if (record_theta) row_theta.resize(model.rows.size());
  for (std::size_t r = 0; r < model.rows.size(); ++r) {
    auto res = inner_max(v, model.rows[r], order);
    row_value[r] = res.value;
    if (record_theta) row_theta[r] = std::move(res.theta);
  }
  BellmanResult out;
  out.value.resize(model.num_states);
  out.argmax.resize(model.num_states);
  if (record_theta) out.theta.resize(model.num_states);
  for (std::size_t s = 0; s < model.num_states; ++s) {
    const auto& acts = model.actions[s];
    if (acts.empty()) {
      throw ConfigError("state " + std::to_string(s) + " has no actions");
    }
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_a = 0;
    for (std::size_t a = 0; a < acts.size(); ++a) {
      const double q = acts[a].reward + row_value[acts[a].row];
      if (q > best) {
        best = q;
        best_a = a;
      }
    }
    out.value[s] = best;
    out.argmax[s] = best_a;
    if (record_theta) out.theta[s] = row_theta[acts[best_a].row];
  }
  return out;
}

struct TruncateResult {
  std::vector<double> value;
  std::vector<bool> truncated;
};

/// Gamma_c: clamps every entry to at most min(v_T) + c.
inline TruncateResult truncate(std::span<const double> v_t, double span_bound) {
  TruncateResult out;
  const double cap = min_of(v_t) + span_bound;
  out.value.resize(v_t.size());
  out.truncated.resize(v_t.size());
  for (std::size_t i = 0; i < v_t.size(); ++i) {
    out.truncated[i] = v_t[i] > cap;
    out.value[i] = out.truncated[i] ? cap : v_t[i];
  }
  return out;
}

/// Stopping rule for ScOpt.
enum class StoppingRule {
  // span(v_{n+1} - v_n) + 2 gamma^n / (1 - gamma) span(v_1) <= eps
  kFull,
  // span(v_{n+1} - v_n) <= eps
  kIncrement,
};

struct ScoptOptions {
  StoppingRule rule = StoppingRule::kFull;
  std::size_t max_iterations = 0;  // 0: derived cap
  // Called with (n, v_{n+1}) after every iteration.
  std::function<void(std::size_t, std::span<const double>)> on_iterate;
  // tau in (0, 1]: iterate (1 - tau) v + tau Gamma_c T v. Below 1 this damps
  // oscillation on periodic models; gain and greedy policies are unchanged.
  double damping = 1.0;
};

/// Iteration cap: ten times the iterations the geometric term needs, at
/// least 10^4.
inline std::size_t scopt_iteration_cap(double span_v1, double eps,
                                       double gamma) {
  constexpr double kFloor = 1e4;
  if (span_v1 <= 0.0) return static_cast<std::size_t>(kFloor);
  const double need = std::ceil(std::log(2.0 * span_v1 / (eps * (1.0 - gamma))) /
                                std::log(1.0 / gamma));
  const double cap = std::max(kFloor, 10.0 * need);
  if (cap > 1e15) return static_cast<std::size_t>(1e15);
  return static_cast<std::size_t>(cap);
}

/// Span-truncated extended value iteration. Returns the greedy policy of
/// the final iterate, falling back to the arg-min action at states where
/// truncation broke greedy consistency, and the optimistic index read off
/// the final increment.
inline DiscretePolicy scopt_solve(const ExtendedModel& model, double epsilon,
                                  std::size_t s_star,
                                  const ScoptOptions& options = {}) {
  model.validate();
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (s_star >= model.num_states) throw ConfigError("s_star out of range");
  const double tau = options.damping;
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("damping must lie in (0, 1]");

  const std::size_t n_states = model.num_states;
  std::vector<double> v(n_states, 0.0);
  std::vector<double> next(n_states);
  double span_v1 = 0.0;
  double gamma_pow = 1.0;
  std::size_t cap = options.max_iterations;
  double last_diff = std::numeric_limits<double>::infinity();

  for (std::size_t n = 0;; ++n) {
    BellmanResult tv = bellman_T(v, model);
    TruncateResult gv = truncate(tv.value, model.span_bound);
    for (std::size_t s = 0; s < n_states; ++s) {
      next[s] = tau == 1.0 ? gv.value[s] : (1.0 - tau) * v[s] + tau * gv.value[s];
    }
    const double m = min_of(next);
    for (double& x : next) x -= m;
    if (n == 0) {
      span_v1 = span_of(next);
      if (cap == 0) cap = scopt_iteration_cap(span_v1, epsilon, model.gamma);
    }

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t s = 0; s < n_states; ++s) {
      const double d = next[s] - v[s];
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    last_diff = (hi - lo) / tau;
    if (options.on_iterate) options.on_iterate(n, next);
    const double geometric =
        options.rule == StoppingRule::kFull
            ? 2.0 * gamma_pow / (1.0 - model.gamma) * span_v1
            : 0.0;

    if (last_diff + geometric <= epsilon) {
      DiscretePolicy policy;
      policy.iterations = n + 1;
      policy.choice.resize(n_states);
      policy.feasible.resize(n_states);
      double glo = std::numeric_limits<double>::infinity();
      double ghi = -glo;
      for (std::size_t s = 0; s < n_states; ++s) {
        const double g = gv.value[s] - v[s];
        glo = std::min(glo, g);
        ghi = std::max(ghi, g);
      }
      policy.index = 0.5 * (glo + ghi);
      for (std::size_t s = 0; s < n_states; ++s) {
        policy.feasible[s] = std::abs(tv.value[s] - gv.value[s]) <= 1e-10;
        if (policy.feasible[s]) {
          policy.choice[s] = tv.argmax[s];
          continue;
        }
        const auto& acts = model.actions[s];
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_a = 0;
        for (std::size_t a = 0; a < acts.size(); ++a) {
          const double q =
              acts[a].reward + inner_min(v, model.rows[acts[a].row]).value;
          if (q < best) {
            best = q;
            best_a = a;
          }
        }
        policy.choice[s] = best_a;
      }
      policy.bias = v;
      const double ref = v[s_star];
      for (double& b : policy.bias) b -= ref;
      return policy;
    }
    if (n + 1 >= cap) {
      throw ConvergenceError("ScOpt did not converge within " +
                                 std::to_string(cap) + " iterations (last span "
                                 "increment " + std::to_string(last_diff) + ")",
                             n + 1, last_diff);
    }
    gamma_pow *= model.gamma;
    v.swap(next);
  }
}

}  // namespace zorl
