#pragma once

#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "zorl/common.hpp"
#include "zorl/extended_solver.hpp"

namespace zorl {

/// An extended model plus the solver inputs read alongside it.
struct ModelFile {
  ExtendedModel model;
  double epsilon = 1e-6;
  std::size_t reference = 0;
  StoppingRule rule = StoppingRule::kFull;
};

/// Line-oriented text form of an extended model:
///
///   states 2
///   floor 0
///   span inf
///   gamma 0.5
///   epsilon 1e-6
///   reference 0
///   rule full
///   row 0 radius 0 center 0.9 0.1
///   action 0 row 0 reward 1
///
/// Rows must be declared before the actions that use them. `#` starts a
/// comment.
inline ModelFile parse_model(std::istream& in) {
  ModelFile out;
  ExtendedModel& m = out.model;
  std::map<std::size_t, std::size_t> row_index;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& msg) -> ConfigError {
    return ConfigError("model line " + std::to_string(lineno) + ": " + msg);
  };
  auto number = [&](std::istringstream& ss, const char* what) {
    std::string tok;
    if (!(ss >> tok)) throw fail(std::string("missing ") + what);
    if (tok == "inf") return std::numeric_limits<double>::infinity();
    try {
      std::size_t used = 0;
      const double x = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return x;
    } catch (const std::exception&) {
      throw fail(std::string("bad ") + what + " '" + tok + "'");
    }
  };
  auto keyword = [&](std::istringstream& ss, const char* kw) {
    std::string tok;
    if (!(ss >> tok) || tok != kw) throw fail(std::string("expected '") + kw + "'");
  };
  auto index = [&](std::istringstream& ss, const char* what) {
    const double x = number(ss, what);
    if (!(x >= 0.0) || x != std::floor(x)) {
      throw fail(std::string("bad ") + what);
    }
    return static_cast<std::size_t>(x);
  };

  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key)) continue;
    if (key == "states") {
      m.num_states = index(ss, "state count");
      m.actions.assign(m.num_states, {});
    } else if (key == "floor") {
      m.floor = number(ss, "floor");
    } else if (key == "span") {
      m.span_bound = number(ss, "span");
    } else if (key == "gamma") {
      m.gamma = number(ss, "gamma");
    } else if (key == "epsilon") {
      out.epsilon = number(ss, "epsilon");
    } else if (key == "reference") {
      out.reference = index(ss, "reference");
    } else if (key == "rule") {
      std::string r;
      ss >> r;
      if (r == "full") out.rule = StoppingRule::kFull;
      else if (r == "increment") out.rule = StoppingRule::kIncrement;
      else throw fail("bad rule '" + r + "'");
    } else if (key == "row") {
      if (m.num_states == 0) throw fail("row before states");
      const std::size_t id = index(ss, "row id");
      if (row_index.count(id)) throw fail("duplicate row " + std::to_string(id));
      KernelRow row;
      row.owner = id;
      row.floor = m.floor;
      keyword(ss, "radius");
      row.radius = number(ss, "radius");
      keyword(ss, "center");
      for (std::size_t i = 0; i < m.num_states; ++i) {
        row.center.push_back(number(ss, "center entry"));
      }
      row_index[id] = m.rows.size();
      m.rows.push_back(std::move(row));
    } else if (key == "action") {
      const std::size_t s = index(ss, "state");
      if (s >= m.num_states) throw fail("state out of range");
      keyword(ss, "row");
      const std::size_t id = index(ss, "row id");
      auto it = row_index.find(id);
      if (it == row_index.end()) throw fail("unknown row " + std::to_string(id));
      keyword(ss, "reward");
      m.actions[s].push_back({it->second, number(ss, "reward")});
    } else {
      throw fail("unknown key '" + key + "'");
    }
    std::string extra;
    if (ss >> extra) throw fail("trailing text '" + extra + "'");
  }
  for (auto& row : m.rows) row.floor = m.floor;
  m.validate();
  return out;
}

inline void print_policy(std::ostream& os, const DiscretePolicy& p) {
  os << "index " << p.index << '\n' << "iterations " << p.iterations << '\n';
  os << "state action feasible bias\n";
  for (std::size_t s = 0; s < p.choice.size(); ++s) {
    os << s << ' ' << p.choice[s] << ' ' << (p.feasible[s] ? 1 : 0) << ' '
       << p.bias[s] << '\n';
  }
}

}  // namespace zorl
