#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "dsr/oracle.hpp"
#include "dsr/rng.hpp"
#include "dsr/verify.hpp"
#include "fixtures.hpp"

namespace dsr {
namespace {

using testing::make_topology;

TEST(Oracle, SingleNode) {
  const Topology t = make_topology(1, {}, {{0, 1.0, 3}});
  const auto res = oracle::solve_exact(t, t.flows[0], {0.6}, {}, 3, Variant::relaxed);
  EXPECT_EQ(res.value, 0.6);
  EXPECT_TRUE(res.usage.empty());
}

TEST(Oracle, TwoNodeHandValue) {
  const Topology t = testing::two_nodes(0.5);
  EXPECT_NEAR(oracle::enumerate_exact(t, t.flows[0], {1.0, 1.0}, {0.3}, 1, Variant::relaxed), 1.2, 1e-12);
  // Two attempts: 1 + (0.5 + 0.25) - 0.3 - 0.5 * 0.3
  EXPECT_NEAR(oracle::enumerate_exact(t, t.flows[0], {1.0, 1.0}, {0.3}, 2, Variant::relaxed), 1.3, 1e-12);
}

TEST(Oracle, RefusesLargeInstances) {
  const Topology t = make_topology(5, {{0, 1, 1, 1.0}}, {{0, 1.0, 2}});
  EXPECT_THROW(oracle::enumerate_exact(t, t.flows[0], RewardVector(5, 1.0), {0.0}, 2, Variant::relaxed),
               oracle::LimitError);
  const Topology small = testing::two_nodes(1.0);
  EXPECT_THROW(oracle::enumerate_exact(small, small.flows[0], {1.0, 1.0}, {0.0}, 4, Variant::relaxed),
               oracle::LimitError);
  EXPECT_NO_THROW(oracle::enumerate_exact(small, small.flows[0], {1.0, 1.0}, {0.0}, 4, Variant::relaxed, {4, 4}));
}

TEST(ExpectedUsage, HugePricesMeanNoTransmissions) {
  const Topology t = testing::parallel_relays(0.9);
  const auto u = oracle::expected_usage(t, t.flows[0], RewardVector(4, 1.0), PriceVector(4, 100.0), 2);
  for (double x : u) EXPECT_EQ(x, 0.0);
}

TEST(ExpectedUsage, SingleReliableLink) {
  const Topology t = testing::two_nodes(1.0);
  const auto u = oracle::expected_usage(t, t.flows[0], {1.0, 1.0}, {0.0}, 1);
  EXPECT_EQ(u, std::vector<double>{1.0});
}

TEST(ExpectedUsage, CheaperRelayCarriesEverything) {
  // Only the destination is worth anything, so exactly one relay is used.
  const Topology t = testing::parallel_relays(1.0);
  const RewardVector r{0.0, 0.0, 0.0, 1.0};
  const auto via1 = oracle::expected_usage(t, t.flows[0], r, {0.2, 0.1, 0.2, 0.1}, 2);
  EXPECT_NEAR(via1[1], 1.0, 1e-12);
  EXPECT_NEAR(via1[3], 1.0, 1e-12);
  EXPECT_EQ(via1[0], 0.0);
  EXPECT_EQ(via1[2], 0.0);
  const auto via0 = oracle::expected_usage(t, t.flows[0], r, {0.1, 0.2, 0.1, 0.2}, 2);
  EXPECT_NEAR(via0[0], 1.0, 1e-12);
  EXPECT_NEAR(via0[2], 1.0, 1e-12);
  EXPECT_EQ(via0[1], 0.0);
}

Topology relabel(const Topology& t, const std::vector<NodeId>& perm) {
  Topology out = t;
  for (auto& l : out.links) {
    l.tx = perm[l.tx];
    l.rx = perm[l.rx];
  }
  for (auto& f : out.flows) f.source = perm[f.source];
  return out;
}

TEST(Oracle, InvariantUnderRelabeling) {
  Rng rng(3);
  for (int i = 0; i < 60; ++i) {
    const Topology t = random_instance(rng, 4, 3);
    const RewardVector r = random_vector(rng, t.n_nodes, 0.0, 1.0);
    const PriceVector p = random_vector(rng, t.links.size(), 0.0, 2.0);
    std::vector<NodeId> perm(t.n_nodes);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t k = perm.size(); k > 1; --k) std::swap(perm[k - 1], perm[rng.below(k)]);
    RewardVector r2(t.n_nodes);
    for (NodeId n = 0; n < t.n_nodes; ++n) r2[perm[n]] = r[n];
    const Topology t2 = relabel(t, perm);
    for (Variant v : {Variant::relaxed, Variant::index}) {
      const int h = t.flows[0].deadline;
      ASSERT_NEAR(oracle::enumerate_exact(t, t.flows[0], r, p, h, v), oracle::enumerate_exact(t2, t2.flows[0], r2, p, h, v),
                  1e-12);
    }
  }
}

// Usage at the optimum is what the optimum pays for: value = delivered reward
// minus sum of price * usage, and with zero prices usage is bounded by the
// number of slots times links touched.
TEST(ExpectedUsage, ConsistentWithPriceDerivative) {
  Rng rng(19);
  for (int i = 0; i < 60; ++i) {
    const Topology t = random_instance(rng, 4, 3);
    if (t.links.empty()) continue;
    const RewardVector r = random_vector(rng, t.n_nodes, 0.0, 1.0);
    const PriceVector p = random_vector(rng, t.links.size(), 0.0, 1.0);
    const int h = t.flows[0].deadline;
    const auto res = oracle::solve_exact(t, t.flows[0], r, p, h, Variant::relaxed);
    // Raising one price by d lowers the value by at most d * usage (the same
    // strategy stays feasible) and by at least zero.
    for (std::size_t l = 0; l < t.links.size(); ++l) {
      PriceVector q = p;
      q[l] += 1e-3;
      const double v2 = oracle::enumerate_exact(t, t.flows[0], r, q, h, Variant::relaxed);
      ASSERT_LE(v2, res.value + 1e-12);
      ASSERT_GE(v2, res.value - 1e-3 * res.usage[l] - 1e-12);
    }
  }
}

}  // namespace
}  // namespace dsr
