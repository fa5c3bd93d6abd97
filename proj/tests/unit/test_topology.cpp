#include <gtest/gtest.h>

#include <algorithm>

#include "numalab/error.hpp"
#include "numalab/topology.hpp"

using namespace numalab;

TEST(Topology, SkxSubNumaRatios) {
  const auto t = build_topology("skx-4s-snc2");
  const auto p = preset_params("skx-4s-snc2");
  // c0 is on node 0 / socket 0; node 1 is the sibling node, node 6 is on socket 3.
  const CoreId sibling = t.cores_per_node();
  const CoreId far = 6 * t.cores_per_node();
  ASSERT_EQ(t.socket_of(sibling), 0u);
  ASSERT_EQ(t.socket_of(far), 3u);
  EXPECT_NEAR(t.core_latency(0, sibling) / p.core_base_ns, 1.1, 1e-9);
  EXPECT_NEAR(t.core_latency(0, far) / p.core_base_ns, 3.0, 1e-9);
  const double local = access_cost(t, 0, {CacheLevel::dram, 0});
  EXPECT_NEAR(access_cost(t, 0, {CacheLevel::dram, 6}) / local, 3.0, 0.01);
}

TEST(Topology, ChipletSpreadOnMilan) {
  const auto t = build_topology("milan-2s-nps4");
  double base = 1e300, worst = 0.0;
  for (CoreId a = 0; a < t.core_count(); ++a) {
    for (CoreId b = 0; b < t.core_count(); ++b) {
      if (a == b || t.socket_of(a) != t.socket_of(b)) continue;
      base = std::min(base, t.core_latency(a, b));
      worst = std::max(worst, t.core_latency(a, b));
    }
  }
  EXPECT_NEAR(worst / base, 4.0, 1e-9);
}

TEST(Topology, GraceHopperMesh) {
  const auto t = build_topology("gh200-1s");
  EXPECT_EQ(t.sockets(), 1u);
  EXPECT_EQ(t.node_count(), 1u);
  const double base = preset_params("gh200-1s").core_base_ns;
  double worst = 0.0;
  for (CoreId a = 0; a < t.core_count(); ++a) {
    for (CoreId b = 0; b < t.core_count(); ++b) worst = std::max(worst, t.core_latency(a, b));
  }
  EXPECT_NEAR(worst / base, 1.5, 1e-9);
}

TEST(Topology, TinyShape) {
  const auto t = build_topology("tiny-2n4c");
  EXPECT_EQ(t.node_count(), 2u);
  EXPECT_EQ(t.cores_per_node(), 3u);
  EXPECT_EQ(t.workers().size(), 4u);
  for (NodeId n = 0; n < 2; ++n) EXPECT_EQ(t.workers_on(n).size(), 2u);
  EXPECT_TRUE(t.folded_roles());
  EXPECT_EQ(t.grid().rows(), 2u);
  EXPECT_EQ(t.grid().cols(), 3u);
  EXPECT_EQ(access_cost(t, 0, {CacheLevel::l1, 0}), 2.0);
  EXPECT_EQ(access_cost(t, 0, {CacheLevel::dram, 0}), 90.0);
}

TEST(Topology, AccessCostOrderingEverywhere) {
  for (const auto& name : topology_preset_names()) {
    const auto t = build_topology(name);
    for (CoreId c = 0; c < t.core_count(); ++c) {
      const double l1 = access_cost(t, c, {CacheLevel::l1, 0});
      const double llc = access_cost(t, c, {CacheLevel::llc, 0});
      const double local = access_cost(t, c, {CacheLevel::dram, t.node_of(c)});
      EXPECT_LT(l1, llc) << name;
      EXPECT_LT(llc, local) << name;
      for (NodeId n = 0; n < t.node_count(); ++n) {
        if (n != t.node_of(c)) EXPECT_GT(access_cost(t, c, {CacheLevel::dram, n}), local) << name << " c" << c;
      }
    }
  }
}

TEST(Topology, GridCoversEveryCore) {
  for (const auto& name : topology_preset_names()) {
    const auto t = build_topology(name);
    const auto& g = t.grid();
    ASSERT_GE(g.tile_count(), t.core_count());
    for (std::uint32_t tile = 0; tile < g.tile_count(); ++tile) {
      const auto core = g.core_at(tile);
      EXPECT_EQ(g.is_worker_tile(tile), core.has_value() && t.is_worker(*core)) << name;
    }
  }
}

TEST(Topology, ConsecutiveCoresAreGridNeighbours) {
  for (const auto& name : topology_preset_names()) {
    const auto t = build_topology(name);
    std::vector<bool> seen(t.grid().tile_count(), false);
    for (CoreId c = 0; c < t.core_count(); ++c) {
      const auto tile = t.grid().tile_index(c);
      ASSERT_FALSE(seen[tile]) << name;
      seen[tile] = true;
      EXPECT_EQ(t.grid().core_at(tile), c) << name;
      if (c > 0) EXPECT_EQ(t.grid().distance(c - 1, c), 1u) << name << " core " << c;
    }
  }
  // tiny: 2x3, second row reversed.
  const auto tiny = build_topology("tiny-2n4c");
  EXPECT_EQ(tiny.grid().tile_index(3), 5u);
  EXPECT_EQ(tiny.grid().tile_index(5), 3u);
}

TEST(Topology, JsonRoundTrip) {
  for (const auto& name : topology_preset_names()) {
    const auto t = build_topology(name);
    const auto back = topology_from_json(to_json(t));
    EXPECT_EQ(to_json(back), to_json(t)) << name;
  }
}

TEST(Topology, UnknownPresetThrows) { EXPECT_THROW(build_topology("pdp-11"), Error); }
