#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles/oracles.hpp"
#include "zorl/geometry.hpp"

using zorl::Dims;
using zorl::PartitionTree;

namespace {

zorl::ActivationRule practical(int state_dim, double c_a = 10.0) {
  zorl::ActivationRule rule;
  rule.state_dim = state_dim;
  rule.c_a = c_a;
  return rule;
}

// Splits random active cells `splits` times.
void random_splits(PartitionTree& tree, int splits, std::mt19937_64& rng) {
  for (int i = 0; i < splits; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, tree.active().size() - 1);
    const std::size_t id = tree.active()[pick(rng)];
    if (tree.cell(id).level < tree.max_depth()) tree.split(id);
  }
}

}  // namespace

TEST(Locate, RootOnly) {
  PartitionTree tree(Dims{1, 1});
  EXPECT_EQ(tree.locate(std::vector<double>{0.3, 0.7}), 0u);
}

TEST(Locate, AfterOneSplit) {
  PartitionTree tree(Dims{1, 1});
  tree.split(0);
  const auto id = tree.locate(std::vector<double>{0.3, 0.7});
  EXPECT_EQ(tree.cell(id).level, 1);
  EXPECT_EQ(tree.cell(id).anchor, (std::vector<std::uint32_t>{0, 1}));
}

TEST(Locate, OutsideCubeThrows) {
  PartitionTree tree(Dims{1, 1});
  EXPECT_THROW(tree.locate(std::vector<double>{1.2, 0.5}), zorl::DomainError);
  EXPECT_THROW(tree.locate(std::vector<double>{-0.1, 0.5}), zorl::DomainError);
  EXPECT_THROW(tree.locate(std::vector<double>{0.5}), zorl::DomainError);
}

TEST(Locate, BoundaryConvention) {
  PartitionTree tree(Dims{1, 1});
  tree.split(0);
  // Shared face at 0.5 belongs to the upper cell; the global face 1 is closed.
  EXPECT_EQ(tree.cell(tree.locate(std::vector<double>{0.5, 0.0})).anchor[0], 1u);
  EXPECT_EQ(tree.cell(tree.locate(std::vector<double>{1.0, 1.0})).anchor,
            (std::vector<std::uint32_t>{1, 1}));
}

TEST(Locate, MatchesLinearScan) {
  std::mt19937_64 rng(7);
  PartitionTree tree(Dims{2, 1});
  random_splits(tree, 60, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> x{u(rng), u(rng), u(rng)};
    if (i % 100 == 0) x[i % 3] = 1.0;
    const auto hits = oracle::scan_locate(tree, x);
    ASSERT_EQ(hits.size(), 1u);
    ASSERT_EQ(tree.locate(x), hits[0]);
  }
}

TEST(Representative, Centers) {
  PartitionTree tree(Dims{1, 1});
  EXPECT_EQ(tree.representative(0), (std::vector<double>{0.5, 0.5}));
  tree.split(0);
  std::size_t found = zorl::kNone;
  for (auto id : tree.active()) {
    if (tree.cell(id).anchor == std::vector<std::uint32_t>{1, 0}) found = id;
  }
  ASSERT_NE(found, zorl::kNone);
  EXPECT_EQ(tree.representative(found), (std::vector<double>{0.75, 0.25}));
}

TEST(Representative, RoundTrip) {
  std::mt19937_64 rng(3);
  PartitionTree tree(Dims{1, 2});
  random_splits(tree, 30, rng);
  for (auto id : tree.active()) {
    EXPECT_EQ(tree.locate(tree.representative(id)), id);
  }
}

TEST(Split, RootAtTenthVisit) {
  PartitionTree tree(Dims{1, 1});
  const auto rule = practical(1);
  EXPECT_EQ(rule.n_max(0), 10.0);
  const std::vector<double> next{0.2};
  for (int i = 1; i <= 9; ++i) {
    tree.record_visit(0, next);
    EXPECT_FALSE(tree.maybe_split(0, rule));
  }
  tree.record_visit(0, next);
  EXPECT_TRUE(tree.maybe_split(0, rule));
  EXPECT_EQ(tree.active().size(), 4u);
}

TEST(Split, LevelOneThreshold) {
  EXPECT_EQ(practical(1).n_max(1), 80.0);
  EXPECT_EQ(practical(1).n_min(1), 10.0);
  EXPECT_EQ(practical(1).n_min(0), 1.0);
}

TEST(Split, ActiveSetChangeAndCoverage) {
  PartitionTree tree(Dims{1, 1});
  tree.split(0);
  const auto before = tree.active().size();
  const std::size_t target = tree.active()[2];
  tree.split(target);
  EXPECT_EQ(tree.active().size(), before + 3);
  for (auto id : tree.active()) EXPECT_NE(id, target);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const std::vector<double> x{u(rng), u(rng)};
    ASSERT_EQ(oracle::scan_locate(tree, x).size(), 1u);
  }
}

TEST(Split, DepthCap) {
  PartitionTree tree(Dims{1, 1}, 2);
  tree.split(0);
  const auto id = tree.active()[0];
  tree.split(id);
  const auto deep = tree.locate(tree.representative(tree.active().back()));
  ASSERT_EQ(tree.cell(deep).level, 2);
  EXPECT_THROW(tree.split(deep), zorl::DepthCapError);

  // The activation rule skips the split instead of throwing.
  const auto rule = practical(1, 1e-9);
  tree.record_visit(deep, std::vector<double>{0.1});
  EXPECT_FALSE(tree.maybe_split(deep, rule));
  EXPECT_EQ(tree.capped_split_attempts(), 1u);
}

TEST(Split, ChildrenInheritVisits) {
  PartitionTree tree(Dims{1, 1});
  const auto rule = practical(1);
  for (int i = 0; i < 10; ++i) {
    tree.record_visit(0, std::vector<double>{0.1 * i});
    tree.maybe_split(0, rule);
  }
  for (auto id : tree.active()) {
    EXPECT_EQ(tree.cell(id).visits(), 10u);
    EXPECT_EQ(tree.cell(id).own_visits, 0u);
  }
}

TEST(DiscreteSpaces, StateCount) {
  PartitionTree tree(Dims{1, 1});
  tree.split(0);
  tree.split(tree.active()[0]);
  EXPECT_EQ(tree.max_level(), 2);
  EXPECT_EQ(tree.discrete_spaces().states.size(), 4u);
}

TEST(DiscreteSpaces, RootOnly) {
  PartitionTree tree(Dims{1, 1});
  const auto sp = tree.discrete_spaces();
  ASSERT_EQ(sp.states.size(), 1u);
  EXPECT_EQ(sp.states[0], (std::vector<double>{0.5}));
  ASSERT_EQ(sp.actions[0].size(), 1u);
  EXPECT_EQ(sp.actions[0][0].representative, (std::vector<double>{0.5}));
  EXPECT_EQ(sp.actions[0][0].cell, 0u);
}

TEST(DiscreteSpaces, OneSplitEnumeration) {
  PartitionTree tree(Dims{1, 1});
  tree.split(0);
  const auto sp = tree.discrete_spaces();
  ASSERT_EQ(sp.states.size(), 2u);
  for (std::size_t s = 0; s < 2; ++s) {
    ASSERT_EQ(sp.actions[s].size(), 2u);
    EXPECT_NE(sp.actions[s][0].cell, sp.actions[s][1].cell);
    // Oracle: the active cells whose S-projection contains the state.
    std::set<std::size_t> expected;
    for (auto id : tree.active()) {
      if (tree.cell(id).anchor[0] == s) expected.insert(id);
    }
    const std::set<std::size_t> got{sp.actions[s][0].cell, sp.actions[s][1].cell};
    EXPECT_EQ(got, expected);
    EXPECT_EQ(sp.actions[s][0].representative, (std::vector<double>{0.25}));
    EXPECT_EQ(sp.actions[s][1].representative, (std::vector<double>{0.75}));
  }
}

TEST(DiscreteSpaces, MixedLevelsMatchOracle) {
  std::mt19937_64 rng(5);
  PartitionTree tree(Dims{2, 1});
  random_splits(tree, 20, rng);
  const auto sp = tree.discrete_spaces();
  ASSERT_EQ(sp.states.size(), std::size_t{1} << (2 * tree.max_level()));
  for (std::size_t s = 0; s < sp.states.size(); ++s) {
    std::set<std::size_t> expected;
    for (auto id : tree.active()) {
      const auto& c = tree.cell(id);
      const double side = std::pow(0.5, c.level);
      bool inside = true;
      for (int i = 0; i < 2; ++i) {
        const double x = sp.states[s][static_cast<std::size_t>(i)];
        inside = inside && x >= c.anchor[static_cast<std::size_t>(i)] * side &&
                 x < (c.anchor[static_cast<std::size_t>(i)] + 1) * side;
      }
      if (inside) expected.insert(id);
    }
    std::set<std::size_t> got;
    for (const auto& a : sp.actions[s]) got.insert(a.cell);
    ASSERT_EQ(got, expected) << "state " << s;
  }
}

TEST(Invariants, CounterConservationAndMonotoneRefinement) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PartitionTree tree(Dims{1, 1});
  const auto rule = practical(1, 2.0);
  const std::vector<double> probe{0.83, 0.41};
  double probe_diam = 1.0;
  int max_level = 0;
  for (int t = 0; t < 5000; ++t) {
    const std::vector<double> z{std::pow(u(rng), 0.3), u(rng)};
    const std::vector<double> next{u(rng)};
    const auto id = tree.locate(z);
    tree.record_visit(id, next);
    std::uint64_t sum = 0;
    for (const auto& [k, c] : tree.cell(id).transition_counts) sum += c;
    ASSERT_EQ(sum, tree.cell(id).own_visits);
    if (tree.maybe_split(id, rule)) {
      ASSERT_EQ(static_cast<double>(tree.cell(id).visits()), rule.n_max(tree.cell(id).level));
    }
    ASSERT_GE(tree.max_level(), max_level);
    max_level = tree.max_level();
    const double d = tree.cell(tree.locate(probe)).diameter();
    ASSERT_LE(d, probe_diam);
    probe_diam = d;
    for (auto a : tree.active()) {
      ASSERT_LT(static_cast<double>(tree.cell(a).visits()), rule.n_max(tree.cell(a).level));
      for (auto p = tree.cell(a).parent; p != zorl::kNone; p = tree.cell(p).parent) {
        ASSERT_FALSE(tree.cell(p).active);
      }
    }
  }
  EXPECT_GT(tree.max_level(), 1);
}

TEST(Dump, OneLinePerActiveCell) {
  PartitionTree tree(Dims{1, 1});
  tree.split(0);
  std::ostringstream os;
  tree.dump(os);
  std::istringstream in(os.str());
  std::string line;
  int lines = 0;
  std::getline(in, line);
  EXPECT_EQ(line.front(), '#');
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 4);
}
