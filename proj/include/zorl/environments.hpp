#pragma once

#include <array>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "zorl/common.hpp"
#include "zorl/rng.hpp"

namespace zorl {

using Matrix = std::vector<std::vector<double>>;

enum class EnvKind { kLinearQuadratic, kNonlinear, kRiverSwim, kSyntheticFinite };

/// Fully parameterized benchmark environment. Native coordinates are mapped
/// affinely onto the unit cubes the agents work in.
struct EnvSpec {
  std::string name;
  EnvKind kind = EnvKind::kLinearQuadratic;
  Dims dims;
  std::vector<double> state_lo, state_hi;
  std::vector<double> action_lo, action_hi;

  // Linear / feature-mapped dynamics.
  Matrix a_matrix, b_matrix;
  double state_cost = 0.4;   // P = state_cost * I
  double action_cost = 0.6;  // Q = action_cost * I
  double noise_mean = 0.0;
  double noise_std = 0.05;
  double clip_lo = -4.0, clip_hi = 4.0;

  // Finite ground truth: kernel[s][a][s'], rewards[s][a] in [0,1].
  std::vector<std::vector<std::vector<double>>> kernel;
  std::vector<std::vector<double>> rewards;

  // Affine reward normalization onto [0,1].
  double reward_lo = 0.0, reward_hi = 1.0;

  std::vector<double> initial_state;

  Dims unit_dims() const { return dims; }
};

struct StepResult {
  std::vector<double> next_state;
  double raw_reward = 0.0;
};

namespace detail {

inline void check_range(std::span<const double> x, std::span<const double> lo,
                        std::span<const double> hi, const char* what) {
  if (x.size() != lo.size()) {
    throw DomainError(std::string(what) + " has the wrong dimension");
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double tol = 1e-12 * std::max(1.0, hi[i] - lo[i]);
    if (!(x[i] >= lo[i] - tol && x[i] <= hi[i] + tol)) {
      throw DomainError(std::string(what) + " coordinate " + std::to_string(i) +
                        " = " + std::to_string(x[i]) + " outside [" +
                        std::to_string(lo[i]) + ", " + std::to_string(hi[i]) +
                        "]");
    }
  }
}

inline std::vector<double> to_unit(std::span<const double> x,
                                   std::span<const double> lo,
                                   std::span<const double> hi) {
  std::vector<double> u(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    u[i] = std::clamp((x[i] - lo[i]) / (hi[i] - lo[i]), 0.0, 1.0);
  }
  return u;
}

inline std::vector<double> from_unit(std::span<const double> u,
                                     std::span<const double> lo,
                                     std::span<const double> hi) {
  std::vector<double> x(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    x[i] = lo[i] + u[i] * (hi[i] - lo[i]);
  }
  return x;
}

inline std::size_t finite_index(double unit, std::size_t count) {
  const auto i = static_cast<std::size_t>(std::floor(unit * static_cast<double>(count)));
  return std::min(i, count - 1);
}

}  // namespace detail

inline std::vector<double> to_unit_state(const EnvSpec& e, std::span<const double> s) {
  return detail::to_unit(s, e.state_lo, e.state_hi);
}
inline std::vector<double> from_unit_state(const EnvSpec& e, std::span<const double> u) {
  return detail::from_unit(u, e.state_lo, e.state_hi);
}
inline std::vector<double> to_unit_action(const EnvSpec& e, std::span<const double> a) {
  return detail::to_unit(a, e.action_lo, e.action_hi);
}
inline std::vector<double> from_unit_action(const EnvSpec& e, std::span<const double> u) {
  return detail::from_unit(u, e.action_lo, e.action_hi);
}

inline double normalize_reward(const EnvSpec& e, double raw) {
  return (raw - e.reward_lo) / (e.reward_hi - e.reward_lo);
}

/// Left / stay / right probabilities of continuous RiverSwim.
inline std::array<double, 3> riverswim_branch_probabilities(double a) {
  return {2.0 * (1.0 - a) / 5.0, 0.2, 2.0 * (1.0 + a) / 5.0};
}

/// Native reward r(s, a).
inline double reward(const EnvSpec& e, std::span<const double> s,
                     std::span<const double> a) {
  switch (e.kind) {
    case EnvKind::kRiverSwim: {
      const double x = s[0], u = a[0];
      return 0.005 * (std::pow((x - 6.0) / 6.0, 4) + std::pow((u - 1.0) / 2.0, 4)) +
             0.5 * (std::pow(x / 6.0, 4) + std::pow((u + 1.0) / 2.0, 4));
    }
    case EnvKind::kSyntheticFinite: {
      const auto si = detail::finite_index(s[0], e.kernel.size());
      const auto ai = detail::finite_index(a[0], e.rewards[si].size());
      return e.rewards[si][ai];
    }
    case EnvKind::kLinearQuadratic:
    case EnvKind::kNonlinear: {
      double cost = 0.0;
      for (double x : s) cost += e.state_cost * x * x;
      for (double u : a) cost += e.action_cost * u * u;
      return -cost;
    }
  }
  return 0.0;
}

/// One transition in native coordinates.
inline StepResult step(const EnvSpec& e, std::span<const double> s,
                       std::span<const double> a, Rng& rng) {
  detail::check_range(s, e.state_lo, e.state_hi, "state");
  detail::check_range(a, e.action_lo, e.action_hi, "action");
  StepResult out;
  out.raw_reward = reward(e, s, a);

  switch (e.kind) {
    case EnvKind::kRiverSwim: {
      const auto probs = riverswim_branch_probabilities(a[0]);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      std::normal_distribution<double> noise(e.noise_mean, e.noise_std);
      const double u = unif(rng);
      const double w = noise(rng);
      const double jump = 0.5 * (1.0 + w / 2.0);
      double next = s[0];
      if (u < probs[0]) {
        next = s[0] - jump;
      } else if (u >= probs[0] + probs[1]) {
        next = s[0] + jump;
      }
      out.next_state = {std::min(std::max(0.0, next), 6.0)};
      break;
    }
    case EnvKind::kSyntheticFinite: {
      const std::size_t n = e.kernel.size();
      const auto si = detail::finite_index(s[0], n);
      const auto ai = detail::finite_index(a[0], e.kernel[si].size());
      std::discrete_distribution<std::size_t> pick(e.kernel[si][ai].begin(),
                                                   e.kernel[si][ai].end());
      const std::size_t next = pick(rng);
      out.next_state = {(static_cast<double>(next) + 0.5) / static_cast<double>(n)};
      break;
    }
    case EnvKind::kLinearQuadratic:
    case EnvKind::kNonlinear: {
      const bool features = e.kind == EnvKind::kNonlinear;
      const std::size_t ds = s.size(), da = a.size();
      std::vector<double> fs(s.begin(), s.end()), ga(a.begin(), a.end());
      if (features) {
        for (double& x : fs) x = 0.5 * x + 0.5 * x * x;
        for (double& u : ga) u = u * u;
      }
      std::normal_distribution<double> noise(e.noise_mean, e.noise_std);
      out.next_state.resize(ds);
      for (std::size_t i = 0; i < ds; ++i) {
        double x = 0.0;
        for (std::size_t j = 0; j < ds; ++j) x += e.a_matrix[i][j] * fs[j];
        for (std::size_t j = 0; j < da; ++j) x += e.b_matrix[i][j] * ga[j];
        x += noise(rng);
        out.next_state[i] = std::max(std::min(x, e.clip_hi), e.clip_lo);
      }
      break;
    }
  }
  return out;
}

namespace detail {

inline EnvSpec linear_quadratic(const std::string& name, Matrix b) {
  EnvSpec e;
  e.name = name;
  e.kind = EnvKind::kLinearQuadratic;
  e.a_matrix = {{-0.2, -0.07}, {0.6, 0.07}};
  e.b_matrix = std::move(b);
  e.dims = {2, static_cast<int>(e.b_matrix[0].size())};
  e.state_lo.assign(2, e.clip_lo);
  e.state_hi.assign(2, e.clip_hi);
  e.action_lo.assign(static_cast<std::size_t>(e.dims.action), -1.0);
  e.action_hi.assign(static_cast<std::size_t>(e.dims.action), 1.0);
  e.reward_lo = -(e.state_cost * 2.0 * e.clip_hi * e.clip_hi +
                  e.action_cost * e.dims.action);
  e.reward_hi = 0.0;
  e.initial_state.assign(2, 0.0);
  return e;
}

}  // namespace detail

/// Finite MDP embedded in [0,1] x [0,1]: state i sits at (i + 0.5) / n and
/// action j owns [j / m, (j + 1) / m).
inline EnvSpec make_synthetic_finite(
    std::vector<std::vector<std::vector<double>>> kernel,
    std::vector<std::vector<double>> rewards, std::size_t initial_state = 0) {
  if (kernel.empty() || rewards.size() != kernel.size()) {
    throw ConfigError("synthetic-finite needs matching kernel and rewards");
  }
  for (std::size_t s = 0; s < kernel.size(); ++s) {
    if (kernel[s].empty() || kernel[s].size() != rewards[s].size()) {
      throw ConfigError("synthetic-finite action count mismatch");
    }
    for (const auto& row : kernel[s]) {
      if (row.size() != kernel.size()) {
        throw ConfigError("synthetic-finite kernel row has wrong length");
      }
    }
  }
  EnvSpec e;
  e.name = "synthetic-finite";
  e.kind = EnvKind::kSyntheticFinite;
  e.dims = {1, 1};
  e.state_lo = {0.0};
  e.state_hi = {1.0};
  e.action_lo = {0.0};
  e.action_hi = {1.0};
  e.initial_state = {(static_cast<double>(initial_state) + 0.5) /
                     static_cast<double>(kernel.size())};
  e.kernel = std::move(kernel);
  e.rewards = std::move(rewards);
  return e;
}

/// Benchmark by name: lq1, lq2, riverswim, nonlinear, synthetic-finite.
/// synthetic-finite defaults to a two-state chain whose best policy plays
/// action 0 everywhere with average reward 2/3.
inline EnvSpec make_env(const std::string& name) {
  if (name == "lq1") {
    return detail::linear_quadratic("lq1", {{0.07, 0.09}, {-0.03, -0.1}});
  }
  if (name == "lq2") {
    return detail::linear_quadratic(
        "lq2", {{0.1, -0.01, 0.12, 0.08}, {0.02, -0.1, 0.3, 0.001}});
  }
  if (name == "nonlinear") {
    EnvSpec e = detail::linear_quadratic("nonlinear", {{0.07, 0.09}, {-0.03, -0.1}});
    e.kind = EnvKind::kNonlinear;
    return e;
  }
  if (name == "riverswim") {
    EnvSpec e;
    e.name = "riverswim";
    e.kind = EnvKind::kRiverSwim;
    e.dims = {1, 1};
    e.state_lo = {0.0};
    e.state_hi = {6.0};
    e.action_lo = {0.0};
    e.action_hi = {1.0};
    e.noise_mean = 0.0;
    e.noise_std = 1.0;
    e.clip_lo = 0.0;
    e.clip_hi = 6.0;
    e.reward_lo = 0.0;
    e.reward_hi = 1.0;
    e.initial_state = {0.0};
    return e;
  }
  if (name == "synthetic-finite") {
    return make_synthetic_finite(
        {{{0.9, 0.1}, {0.5, 0.5}}, {{0.2, 0.8}, {0.1, 0.9}}},
        {{1.0, 0.4}, {0.0, 0.1}});
  }
  throw ConfigError("unknown environment '" + name + "'");
}

}  // namespace zorl
