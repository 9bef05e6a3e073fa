#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "zorl/common.hpp"

namespace zorl {

/// A dyadic cube of side 2^-level in the normalized state-action cube.
///
/// Visit accounting follows the "ancestors while active" rule: a cell's
/// count N_t is the number of visits it received while active plus the
/// visits every ancestor received while that ancestor was the active
/// container. The ancestral part is frozen into `inherited_visits` when the
/// cell is created, since ancestors never become active again.
struct Cell {
  int level = 0;
  std::vector<std::uint32_t> anchor;
  std::size_t parent = kNone;
  std::size_t first_child = kNone;
  bool active = false;

  std::uint64_t own_visits = 0;
  std::uint64_t inherited_visits = 0;

  // Destination S-cell (flat index at this cell's level) -> count, for
  // transitions recorded while this cell was the active container.
  std::map<std::uint64_t, std::uint64_t> transition_counts;
  // Ancestral transitions re-binned at this cell's level.
  std::map<std::uint64_t, std::uint64_t> inherited_counts;
  // Raw next-state coordinates recorded while active, state_dim per entry.
  // Children need them to bin ancestral transitions at a finer level.
  std::vector<double> destinations;

  std::uint64_t visits() const { return own_visits + inherited_visits; }
  double diameter() const { return std::ldexp(1.0, -level); }
};

/// Split thresholds N_max (and the matching N_min) of the activation rule.
struct ActivationRule {
  enum class Mode { kPractical, kTheoretical };

  Mode mode = Mode::kPractical;
  int state_dim = 1;
  double c_a = 10.0;
  // Theoretical form only.
  double c1 = 1.0;
  double horizon = 2.0;
  double delta = 0.05;

  /// Visit count at which a cell of this level splits, rounded up.
  double n_max(int level) const {
    const double inv_diam_pow = std::ldexp(1.0, level * (state_dim + 2));
    if (mode == Mode::kPractical) return std::ceil(c_a * inv_diam_pow);
    return std::ceil(c1 * std::ldexp(1.0, state_dim + 2) *
                     std::log(horizon / delta) * inv_diam_pow);
  }

  /// Activation floor; the root's is 1.
  double n_min(int level) const {
    if (level == 0) return 1.0;
    if (mode == Mode::kPractical) return n_max(level - 1);
    return c1 * std::log(horizon / delta) *
           std::ldexp(1.0, level * (state_dim + 2));
  }
};

/// Active discrete action of one discrete state, with its owning cell.
struct DiscreteAction {
  Point representative;  // action coordinates only
  std::size_t cell = kNone;
};

/// S_t and A_t for the current partition.
struct DiscreteSpaces {
  int level = 0;                  // l_max at construction time
  std::vector<Point> states;      // indexed by flat S-cell index at `level`
  std::vector<std::vector<DiscreteAction>> actions;
};

/// The active cells of a dyadic partition of [0,1]^d together with all of
/// their ancestors. Cells live in an arena and are referred to by index.
class PartitionTree {
 public:
  explicit PartitionTree(Dims dims, int max_depth = 20)
      : dims_(dims), max_depth_(max_depth) {
    if (dims.state < 1 || dims.action < 1) {
      throw ConfigError("partition tree needs positive state and action dims");
    }
    if (max_depth < 0 || max_depth * dims.state > 62 ||
        max_depth > 31) {
      throw ConfigError("max_depth " + std::to_string(max_depth) +
                        " too large for state dimension " +
                        std::to_string(dims.state));
    }
    Cell root;
    root.anchor.assign(static_cast<std::size_t>(dims.total()), 0);
    root.active = true;
    cells_.push_back(std::move(root));
    active_.push_back(0);
    active_pos_.push_back(0);
  }

  const Dims& dims() const { return dims_; }
  int max_depth() const { return max_depth_; }
  int max_level() const { return max_level_; }
  std::size_t size() const { return cells_.size(); }
  const Cell& cell(std::size_t id) const { return cells_.at(id); }
  const std::vector<std::size_t>& active() const { return active_; }
  std::size_t capped_split_attempts() const { return capped_attempts_; }

  /// The unique active cell containing `point`.
  std::size_t locate(std::span<const double> point) const {
    if (point.size() != static_cast<std::size_t>(dims_.total()) ||
        !in_unit_cube(point)) {
      throw DomainError("point outside the unit state-action cube");
    }
    std::size_t id = 0;
    while (!cells_[id].active) {
      const Cell& c = cells_[id];
      const int child_level = c.level + 1;
      std::size_t offset = 0;
      for (std::size_t j = 0; j < point.size(); ++j) {
        const std::uint64_t coord = dyadic_coordinate(point[j], child_level);
        offset |= static_cast<std::size_t>(coord & 1U) << j;
      }
      id = c.first_child + offset;
    }
    return id;
  }

  /// Cube center of a cell.
  Point representative(std::size_t id) const {
    const Cell& c = cells_.at(id);
    Point p(c.anchor.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
      p[j] = std::ldexp(c.anchor[j] + 0.5, -c.level);
    }
    return p;
  }

  bool contains(std::size_t id, std::span<const double> point) const {
    const Cell& c = cells_.at(id);
    for (std::size_t j = 0; j < point.size(); ++j) {
      if (dyadic_coordinate(point[j], c.level) != c.anchor[j]) return false;
    }
    return true;
  }

  /// Flat index of the cell's S-projection among level-`level` S-cells.
  std::uint64_t state_cell_index(std::size_t id) const {
    const Cell& c = cells_.at(id);
    std::uint64_t index = 0;
    for (int i = dims_.state; i-- > 0;) {
      index = (index << c.level) | c.anchor[static_cast<std::size_t>(i)];
    }
    return index;
  }

  /// Adds one visit to an active cell, landing in `next_state`.
  void record_visit(std::size_t id, std::span<const double> next_state) {
    Cell& c = cells_.at(id);
    if (!c.active) throw std::logic_error("visit recorded on inactive cell");
    if (next_state.size() != static_cast<std::size_t>(dims_.state) ||
        !in_unit_cube(next_state)) {
      throw DomainError("next state outside the unit state cube");
    }
    ++c.own_visits;
    ++c.transition_counts[dyadic_flat_index(next_state, c.level)];
    c.destinations.insert(c.destinations.end(), next_state.begin(),
                          next_state.end());
  }

  /// Splits if the cell has reached N_max. Returns true on a split. At the
  /// depth cap the split is skipped and a warning is logged once.
  bool maybe_split(std::size_t id, const ActivationRule& rule) {
    const Cell& c = cells_.at(id);
    if (!c.active) throw std::logic_error("maybe_split on inactive cell");
    if (static_cast<double>(c.visits()) < rule.n_max(c.level)) return false;
    if (c.level >= max_depth_) {
      if (capped_attempts_++ == 0) {
        std::clog << "warning: partition depth cap " << max_depth_
                  << " reached; further splits suppressed\n";
      }
      return false;
    }
    split(id);
    return true;
  }

  /// Deactivates a cell and activates its 2^d children.
  void split(std::size_t id) {
    if (!cells_.at(id).active) throw std::logic_error("split of inactive cell");
    if (cells_[id].level >= max_depth_) {
      throw DepthCapError("cannot split beyond level " +
                          std::to_string(max_depth_));
    }
    const int child_level = cells_[id].level + 1;
    const auto inherited = ancestral_counts(id, child_level);
    const std::uint64_t inherited_visits = cells_[id].visits();
    const std::size_t d = static_cast<std::size_t>(dims_.total());
    const std::size_t n_children = std::size_t{1} << d;
    const std::size_t first = cells_.size();

    for (std::size_t k = 0; k < n_children; ++k) {
      Cell child;
      child.level = child_level;
      child.parent = id;
      child.active = true;
      child.inherited_visits = inherited_visits;
      child.inherited_counts = inherited;
      child.anchor.resize(d);
      for (std::size_t j = 0; j < d; ++j) {
        child.anchor[j] = 2 * cells_[id].anchor[j] +
                          static_cast<std::uint32_t>((k >> j) & 1U);
      }
      cells_.push_back(std::move(child));
    }
    Cell& parent = cells_[id];
    parent.active = false;
    parent.first_child = first;

    // The first child takes over the parent's slot in the active list.
    const std::size_t slot = active_pos_[id];
    active_[slot] = first;
    active_pos_.resize(cells_.size(), kNone);
    active_pos_[first] = slot;
    active_pos_[id] = kNone;
    for (std::size_t k = 1; k < n_children; ++k) {
      active_pos_[first + k] = active_.size();
      active_.push_back(first + k);
    }
    max_level_ = std::max(max_level_, child_level);
  }

  /// S_t: all level-l_max S-cells; A_t(s): action representatives of the
  /// active cells whose S-projection contains s, sorted lexicographically.
  DiscreteSpaces discrete_spaces() const {
    DiscreteSpaces out;
    out.level = max_level_;
    const int ds = dims_.state;
    const std::size_t n_states = std::size_t{1}
                                 << (static_cast<std::size_t>(ds) * max_level_);
    out.states.resize(n_states);
    out.actions.resize(n_states);
    const std::uint64_t side = std::uint64_t{1} << max_level_;
    for (std::size_t s = 0; s < n_states; ++s) {
      Point p(static_cast<std::size_t>(ds));
      std::uint64_t rest = s;
      for (int i = 0; i < ds; ++i) {
        p[static_cast<std::size_t>(i)] =
            (static_cast<double>(rest % side) + 0.5) / static_cast<double>(side);
        rest /= side;
      }
      out.states[s] = std::move(p);
    }

    for (std::size_t id : active_) {
      const Cell& c = cells_[id];
      const int shift = max_level_ - c.level;
      const std::uint64_t sub = std::uint64_t{1} << shift;
      const Point rep = representative(id);
      DiscreteAction action{Point(rep.begin() + ds, rep.end()), id};
      // Enumerate the fine S-cells covered by this cell's S-projection.
      const std::size_t n_sub = std::size_t{1}
                                << (static_cast<std::size_t>(ds) * shift);
      for (std::size_t k = 0; k < n_sub; ++k) {
        std::uint64_t flat = 0;
        std::uint64_t rest = k;
        std::uint64_t stride = 1;
        for (int i = 0; i < ds; ++i) {
          const std::uint64_t fine =
              (static_cast<std::uint64_t>(c.anchor[static_cast<std::size_t>(i)])
               << shift) +
              rest % sub;
          rest /= sub;
          flat += fine * stride;
          stride *= side;
        }
        out.actions[flat].push_back(action);
      }
    }
    for (auto& list : out.actions) {
      std::sort(list.begin(), list.end(),
                [](const DiscreteAction& a, const DiscreteAction& b) {
                  return a.representative < b.representative;
                });
    }
    return out;
  }

  /// One active cell per line: level, anchor coordinates, visits.
  void dump(std::ostream& os) const {
    os << "# level anchor... visits\n";
    for (std::size_t id : active_) {
      const Cell& c = cells_[id];
      os << c.level;
      for (auto a : c.anchor) os << ' ' << a;
      os << ' ' << c.visits() << '\n';
    }
  }

 private:
  // Transitions recorded by `id` and all its ancestors, binned at `level`.
  std::map<std::uint64_t, std::uint64_t> ancestral_counts(std::size_t id,
                                                          int level) const {
    std::map<std::uint64_t, std::uint64_t> counts;
    const std::size_t ds = static_cast<std::size_t>(dims_.state);
    for (std::size_t a = id; a != kNone; a = cells_[a].parent) {
      const auto& dest = cells_[a].destinations;
      for (std::size_t off = 0; off < dest.size(); off += ds) {
        ++counts[dyadic_flat_index(
            std::span<const double>(dest.data() + off, ds), level)];
      }
    }
    return counts;
  }

  Dims dims_;
  int max_depth_;
  int max_level_ = 0;
  std::vector<Cell> cells_;
  std::vector<std::size_t> active_;
  std::vector<std::size_t> active_pos_;
  std::size_t capped_attempts_ = 0;
};

}  // namespace zorl
