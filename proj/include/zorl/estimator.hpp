#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "zorl/common.hpp"
#include "zorl/geometry.hpp"

namespace zorl {

/// Parameters of the L1 confidence radius.
struct RadiusParams {
  enum class Mode { kPractical, kTheoretical };

  Mode mode = Mode::kPractical;
  double c_eta = 10.0;
  // Theoretical form.
  double c1 = 1.0;
  double alpha = 0.5;
  double lipschitz_p = 1.0;
  double c_v = 1.0;
  double horizon = 2.0;
  double delta = 0.05;
};

/// Rediscretized kernel estimate of one active cell over S_t.
struct KernelRow {
  std::vector<double> center;
  double radius = 2.0;
  double floor = 0.0;
  std::size_t owner = kNone;
};

/// Confidence radius for a cell with `visits` = N_t and the given level.
inline double confidence_radius(int level, std::uint64_t visits, int state_dim,
                                const RadiusParams& p) {
  const double diam = std::ldexp(1.0, -level);
  if (p.mode == RadiusParams::Mode::kPractical) {
    return std::min(2.0, p.c_eta * diam);
  }
  if (visits == 0) return 2.0;
  const double stat =
      std::pow(p.c1 * std::log(p.horizon / p.delta) /
                   static_cast<double>(visits),
               1.0 / (state_dim + 2));
  return std::min(2.0, (4.0 - p.alpha) * stat +
                           (3.0 * p.lipschitz_p + p.c_v) * diam);
}

inline double confidence_radius(const Cell& cell, int state_dim,
                                const RadiusParams& p) {
  return confidence_radius(cell.level, cell.visits(), state_dim, p);
}

/// Outcome of one recorded transition.
struct TransitionOutcome {
  std::size_t cell = kNone;
  int level = 0;
  std::uint64_t visits = 0;  // N_t of the cell after the visit
  bool split = false;
};

/// Counts the transition in the active cell containing z = (s, a) and
/// applies the activation rule to that cell.
inline TransitionOutcome record_transition(PartitionTree& tree,
                                           std::span<const double> z,
                                           std::span<const double> next_state,
                                           const ActivationRule& rule) {
  const std::size_t id = tree.locate(z);
  tree.record_visit(id, next_state);
  TransitionOutcome out{id, tree.cell(id).level, tree.cell(id).visits(), false};
  out.split = tree.maybe_split(id, rule);
  return out;
}

/// Raw estimate over the level-l(cell) S-cells: counts / (1 v N_t).
inline std::vector<double> raw_kernel_estimate(const PartitionTree& tree,
                                               std::size_t id) {
  const Cell& c = tree.cell(id);
  const std::size_t n = std::size_t{1}
                        << (static_cast<std::size_t>(tree.dims().state) *
                            static_cast<std::size_t>(c.level));
  std::vector<double> raw(n, 0.0);
  const double denom = static_cast<double>(std::max<std::uint64_t>(1, c.visits()));
  for (const auto& [dest, count] : c.inherited_counts) {
    raw[dest] += static_cast<double>(count);
  }
  for (const auto& [dest, count] : c.transition_counts) {
    raw[dest] += static_cast<double>(count);
  }
  for (double& w : raw) w /= denom;
  return raw;
}

/// Spreads a distribution over level-`from` S-cells onto level-`to` S-cells,
/// giving each descendant an equal share of its ancestor's mass.
inline std::vector<double> rediscretize(std::span<const double> coarse,
                                        int state_dim, int from, int to) {
  if (to < from) throw ConfigError("rediscretization must refine");
  const int shift = to - from;
  const std::uint64_t fine_side = std::uint64_t{1} << to;
  const std::size_t n_fine = std::size_t{1}
                             << (static_cast<std::size_t>(state_dim) *
                                 static_cast<std::size_t>(to));
  const double share = std::ldexp(1.0, -state_dim * shift);
  std::vector<double> fine(n_fine);
  for (std::size_t f = 0; f < n_fine; ++f) {
    std::uint64_t rest = f;
    std::uint64_t coarse_index = 0;
    std::uint64_t stride = 1;
    for (int i = 0; i < state_dim; ++i) {
      const std::uint64_t coord = rest % fine_side;
      rest /= fine_side;
      coarse_index += (coord >> shift) * stride;
      stride <<= from;
    }
    fine[f] = coarse[coarse_index] * share;
  }
  return fine;
}

/// Kernel row of an active cell, rediscretized to the tree's l_max.
inline KernelRow kernel_row(const PartitionTree& tree, std::size_t id,
                            const RadiusParams& params, double floor = 0.0) {
  const Cell& c = tree.cell(id);
  KernelRow row;
  row.owner = id;
  row.floor = floor;
  row.radius = confidence_radius(c, tree.dims().state, params);
  row.center = rediscretize(raw_kernel_estimate(tree, id), tree.dims().state,
                            c.level, tree.max_level());
  return row;
}

}  // namespace zorl
