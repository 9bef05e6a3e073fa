#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace zorl {

using Point = std::vector<double>;

inline constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

// Input outside the normalized cube or a native range.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Bad configuration or model construction.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Refinement requested past the configured maximum level.
class DepthCapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Value iteration did not meet its stopping rule within the iteration cap.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::size_t iterations,
                   double last_increment_span)
      : std::runtime_error(what),
        iterations_(iterations),
        last_increment_span_(last_increment_span) {}

  std::size_t iterations() const { return iterations_; }
  double last_increment_span() const { return last_increment_span_; }

 private:
  std::size_t iterations_;
  double last_increment_span_;
};

/// Dimensions of the state and action cubes.
struct Dims {
  int state = 1;
  int action = 1;

  int total() const { return state + action; }
};

inline double span_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

inline double min_of(std::span<const double> v) {
  return v.empty() ? 0.0 : *std::min_element(v.begin(), v.end());
}

inline double max_of(std::span<const double> v) {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

/// Lattice coordinate of x in [0,1] at the given dyadic level. Cells are
/// half-open [lo, hi) except the last one, which also owns x == 1.
inline std::uint64_t dyadic_coordinate(double x, int level) {
  const std::uint64_t cells = std::uint64_t{1} << level;
  const double scaled = std::floor(std::ldexp(x, level));
  if (scaled <= 0.0) return 0;
  const auto index = static_cast<std::uint64_t>(scaled);
  return std::min(index, cells - 1);
}

/// Row-major flat index of the level-`level` dyadic cube holding `point`,
/// with the first coordinate varying fastest.
inline std::uint64_t dyadic_flat_index(std::span<const double> point,
                                       int level) {
  std::uint64_t index = 0;
  for (std::size_t i = point.size(); i-- > 0;) {
    index = (index << level) | dyadic_coordinate(point[i], level);
  }
  return index;
}

inline bool in_unit_cube(std::span<const double> point) {
  return std::all_of(point.begin(), point.end(),
                     [](double x) { return x >= 0.0 && x <= 1.0; });
}

}  // namespace zorl
