#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracles/oracles.hpp"
#include "zorl/estimator.hpp"

using zorl::Dims;
using zorl::PartitionTree;

namespace {

zorl::ActivationRule practical(int state_dim, double c_a = 10.0) {
  zorl::ActivationRule rule;
  rule.state_dim = state_dim;
  rule.c_a = c_a;
  return rule;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST(RecordTransition, FreshRoot) {
  PartitionTree tree(Dims{1, 1});
  const auto out = zorl::record_transition(tree, std::vector<double>{0.2, 0.4},
                                           std::vector<double>{0.9}, practical(1));
  EXPECT_EQ(out.cell, 0u);
  EXPECT_EQ(tree.cell(0).visits(), 1u);
  ASSERT_EQ(tree.cell(0).transition_counts.size(), 1u);
  EXPECT_EQ(tree.cell(0).transition_counts.begin()->second, 1u);
}

TEST(RecordTransition, ThreeQuarters) {
  PartitionTree tree(Dims{1, 1});
  tree.split(0);
  const std::vector<double> z{0.1, 0.1};
  const auto id = tree.locate(z);
  const auto rule = practical(1);
  for (double next : {0.1, 0.2, 0.3, 0.8}) {
    zorl::record_transition(tree, z, std::vector<double>{next}, rule);
  }
  const auto raw = zorl::raw_kernel_estimate(tree, id);
  ASSERT_EQ(raw.size(), 2u);
  EXPECT_DOUBLE_EQ(raw[0], 0.75);
  EXPECT_DOUBLE_EQ(raw[1], 0.25);
}

TEST(RecordTransition, LogReplayOracle) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PartitionTree tree(Dims{1, 1});
  const auto rule = practical(1, 1.0);
  std::vector<oracle::Transition> log;
  for (int t = 0; t < 1000; ++t) {
    oracle::Transition tr{{std::sqrt(u(rng)), u(rng)}, {u(rng) * u(rng)}};
    tr.hit_level = zorl::record_transition(tree, tr.z, tr.next, rule).level;
    log.push_back(tr);
  }
  ASSERT_GT(tree.max_level(), 2);
  for (auto id : tree.active()) {
    const auto& c = tree.cell(id);
    const auto re = oracle::replay(log, c, 1);
    ASSERT_EQ(c.visits(), re.visits) << "cell " << id;
    const auto raw = zorl::raw_kernel_estimate(tree, id);
    ASSERT_EQ(raw.size(), re.counts.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const double expected = re.counts[i] / std::max<double>(1.0, static_cast<double>(re.visits));
      ASSERT_NEAR(raw[i], expected, 1e-15);
    }
  }
}

TEST(Rediscretize, IdentityAtSameLevel) {
  const std::vector<double> row{0.1, 0.2, 0.3, 0.4};
  EXPECT_EQ(zorl::rediscretize(row, 1, 2, 2), row);
}

TEST(Rediscretize, EqualSplit) {
  const std::vector<double> row{0.8, 0.2};
  const auto fine = zorl::rediscretize(row, 1, 1, 2);
  ASSERT_EQ(fine.size(), 4u);
  EXPECT_DOUBLE_EQ(fine[0], 0.4);
  EXPECT_DOUBLE_EQ(fine[1], 0.4);
  EXPECT_DOUBLE_EQ(fine[2], 0.1);
  EXPECT_DOUBLE_EQ(fine[3], 0.1);
}

TEST(Rediscretize, MatchesMeasureIntegration) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> ds_pick(1, 2), lvl(0, 3), extra(0, 2);
  std::uniform_int_distribution<int> count(0, 20);
  for (int rep = 0; rep < 50; ++rep) {
    const int ds = ds_pick(rng);
    const int from = lvl(rng);
    const int to = from + extra(rng);
    const std::size_t n = std::size_t{1} << (ds * from);
    std::vector<double> coarse(n);
    for (auto& x : coarse) x = count(rng);
    if (sum(coarse) == 0.0) coarse[0] = 1.0;
    const double total = sum(coarse);
    for (auto& x : coarse) x /= total;
    const auto fine = zorl::rediscretize(coarse, ds, from, to);
    const auto ref = oracle::integrate_density(coarse, ds, from, to);
    ASSERT_EQ(fine.size(), ref.size());
    EXPECT_NEAR(sum(fine), 1.0, 1e-12);
    for (std::size_t i = 0; i < fine.size(); ++i) ASSERT_NEAR(fine[i], ref[i], 1e-15);
  }
}

TEST(Radius, Practical) {
  zorl::RadiusParams p;
  EXPECT_DOUBLE_EQ(zorl::confidence_radius(1, 5, 1, p), 2.0);
  EXPECT_DOUBLE_EQ(zorl::confidence_radius(3, 5, 1, p), 1.25);
}

TEST(Radius, TheoreticalZeroVisits) {
  zorl::RadiusParams p;
  p.mode = zorl::RadiusParams::Mode::kTheoretical;
  EXPECT_DOUBLE_EQ(zorl::confidence_radius(3, 0, 1, p), 2.0);
}

TEST(Radius, TheoreticalAtNminWithinConstantTimesDiameter) {
  zorl::RadiusParams p;
  p.mode = zorl::RadiusParams::Mode::kTheoretical;
  p.c1 = 0.7;
  p.horizon = 1e5;
  p.delta = 0.05;
  p.alpha = 0.5;
  p.lipschitz_p = 1.0;
  p.c_v = 1.0;
  zorl::ActivationRule rule;
  rule.mode = zorl::ActivationRule::Mode::kTheoretical;
  rule.c1 = p.c1;
  rule.horizon = p.horizon;
  rule.delta = p.delta;
  for (int ds : {1, 2}) {
    rule.state_dim = ds;
    for (int level = 1; level <= 8; ++level) {
      const auto n_min = static_cast<std::uint64_t>(std::ceil(rule.n_min(level)));
      const double diam = std::ldexp(1.0, -level);
      const double bound = (4.0 - p.alpha + 3.0 * p.lipschitz_p + p.c_v) * diam;
      EXPECT_LE(zorl::confidence_radius(level, n_min, ds, p), bound + 1e-12)
          << "ds " << ds << " level " << level;
    }
  }
}

TEST(Radius, TheoreticalMonotoneInVisits) {
  zorl::RadiusParams p;
  p.mode = zorl::RadiusParams::Mode::kTheoretical;
  p.horizon = 1e4;
  for (int level = 0; level < 6; ++level) {
    double prev = 3.0;
    for (std::uint64_t n = 1; n < 100000; n = n * 3 / 2 + 1) {
      const double r = zorl::confidence_radius(level, n, 1, p);
      ASSERT_LE(r, prev);
      ASSERT_LE(r, 2.0);
      prev = r;
    }
  }
}

TEST(KernelRow, StochasticAfterRediscretization) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PartitionTree tree(Dims{1, 1});
  const auto rule = practical(1, 0.5);
  for (int t = 0; t < 3000; ++t) {
    zorl::record_transition(tree, std::vector<double>{u(rng), u(rng)},
                            std::vector<double>{u(rng)}, rule);
  }
  zorl::RadiusParams p;
  for (auto id : tree.active()) {
    const auto row = zorl::kernel_row(tree, id, p, 0.001);
    ASSERT_EQ(row.center.size(), std::size_t{1} << tree.max_level());
    if (tree.cell(id).visits() >= 1) {
      EXPECT_NEAR(sum(row.center), 1.0, 1e-9);
    }
    EXPECT_LE(row.radius, 2.0);
    EXPECT_EQ(row.owner, id);
    EXPECT_EQ(row.floor, 0.001);
  }
}

TEST(KernelRow, ZeroVisitRowIsZero) {
  PartitionTree tree(Dims{1, 1});
  const auto row = zorl::kernel_row(tree, 0, zorl::RadiusParams{});
  EXPECT_EQ(row.center, std::vector<double>{0.0});
}

// Data drawn from a known finite kernel; the L1 error of the estimate at the
// cell's own level must be inside the theoretical radius in at least 1 - delta
// of the replications.
TEST(KernelRow, TrueKernelMembership) {
  const std::vector<double> truth{0.1, 0.3, 0.4, 0.2};  // level-2 S-cells
  zorl::RadiusParams p;
  p.mode = zorl::RadiusParams::Mode::kTheoretical;
  p.horizon = 1e4;
  p.delta = 0.05;
  p.c1 = 1.0;
  p.lipschitz_p = 0.0;
  p.c_v = 0.0;
  std::mt19937_64 rng(99);
  std::discrete_distribution<int> dest(truth.begin(), truth.end());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int inside = 0;
  const int reps = 200;
  for (int rep = 0; rep < reps; ++rep) {
    PartitionTree tree(Dims{1, 1});
    tree.split(0);
    tree.split(tree.locate(std::vector<double>{0.1, 0.1}));
    const std::vector<double> z{0.1, 0.1};
    const auto id = tree.locate(z);
    ASSERT_EQ(tree.cell(id).level, 2);
    for (int t = 0; t < 200; ++t) {
      const double next = (dest(rng) + u(rng)) / 4.0;
      tree.record_visit(id, std::vector<double>{next});
    }
    const auto row = zorl::kernel_row(tree, id, p);
    double l1 = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) l1 += std::abs(row.center[i] - truth[i]);
    if (l1 <= row.radius) ++inside;
  }
  EXPECT_GE(inside, static_cast<int>(std::ceil((1.0 - p.delta) * reps)));
}
