#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <map>

#include "numalab/error.hpp"
#include "numalab/index.hpp"
#include "numalab/policy.hpp"

using namespace numalab;

namespace {

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
  return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

}  // namespace

TEST(Policy, GroupedBlocksOnTiny) {
  const auto t = build_topology("tiny-2n4c");
  const auto p = baseline_schedule("grouped", t, 8);
  const auto& w = t.workers();
  EXPECT_EQ(p.kind, PolicyKind::sn_thread);
  EXPECT_EQ(p.assignment, (std::vector<CoreId>{w[0], w[0], w[1], w[1], w[2], w[2], w[3], w[3]}));
  EXPECT_TRUE(validate_policy(p, t, 8).empty());
}

TEST(Policy, SpreadAlternatesNodes) {
  const auto t = build_topology("tiny-2n4c");
  const auto p = baseline_schedule("spread", t, 8);
  for (SliceId s = 0; s < 8; ++s) EXPECT_EQ(t.node_of(p.assignment[s]), s % 2);
}

TEST(Policy, SpreadCoversEveryNode) {
  for (const auto& name : topology_preset_names()) {
    const auto t = build_topology(name);
    const std::uint32_t T = 256;
    const auto p = baseline_schedule("spread", t, T);
    std::map<NodeId, std::uint32_t> per_node;
    for (auto c : p.assignment) ++per_node[t.node_of(c)];
    for (NodeId n = 0; n < t.node_count(); ++n) EXPECT_GE(per_node[n], T / t.node_count()) << name;
  }
}

TEST(Policy, GroupedConsecutiveSlicesStayClose) {
  const auto t = build_topology("skx-4s-snc2");
  const auto p = baseline_schedule("grouped", t, 256);
  const auto& g = t.grid();
  for (SliceId s = 0; s + 1 < 256; ++s) {
    const CoreId a = p.assignment[s], b = p.assignment[s + 1];
    // Block boundaries inside a node; crossing into the next node is a different question.
    if (a == b || t.node_of(a) != t.node_of(b)) continue;
    // Any core of another node that holds non-adjacent slices is at least as far.
    for (SliceId o = 0; o < 256; ++o) {
      const CoreId c = p.assignment[o];
      if (o + 1 >= s && o <= s + 2) continue;
      if (t.node_of(c) == t.node_of(a)) continue;
      ASSERT_LE(g.distance(a, b), g.distance(a, c)) << "slice " << s << " vs " << o;
    }
  }
}

TEST(Policy, RandomIsSeededAndBalanced) {
  const auto t = build_topology("tiny-2n4c");
  const std::uint32_t T = 64;
  EXPECT_EQ(baseline_schedule("random", t, T, 5), baseline_schedule("random", t, T, 5));
  EXPECT_NE(baseline_schedule("random", t, T, 5).assignment, baseline_schedule("random", t, T, 6).assignment);
  std::map<CoreId, double> count;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    for (auto c : baseline_schedule("random", t, T, seed).assignment) count[c] += 1.0;
  }
  const double expected = static_cast<double>(T) / static_cast<double>(t.workers().size());
  for (auto w : t.workers()) EXPECT_NEAR(count[w] / 1000.0, expected, 0.1 * expected);
}

TEST(Policy, MixedKeepsSocketsContiguous) {
  const auto t = build_topology("skx-4s-snc2");
  const auto p = baseline_schedule("mixed", t, 256);
  for (SliceId s = 1; s < 256; ++s) EXPECT_LE(t.socket_of(p.assignment[s - 1]), t.socket_of(p.assignment[s]));
  EXPECT_NE(t.node_of(p.assignment[0]), t.node_of(p.assignment[1]));
}

TEST(Policy, NodeStrategiesUseContiguousBlocks) {
  const auto t = build_topology("skx-4s-snc2");
  for (const char* name : {"se-n", "sn-n"}) {
    const auto p = baseline_schedule(name, t, 256);
    ASSERT_EQ(p.placement.size(), 256u);
    for (SliceId s = 0; s < 256; ++s) EXPECT_EQ(p.placement[s], s * t.node_count() / 256) << name;
  }
  EXPECT_EQ(baseline_schedule("se-n", t, 16).kind, PolicyKind::se_numa);
  EXPECT_EQ(baseline_schedule("sn-n", t, 16).kind, PolicyKind::sn_numa);
  EXPECT_EQ(baseline_schedule("os-d", t, 16).kind, PolicyKind::os_default);
  EXPECT_EQ(baseline_schedule("os-i", t, 16).kind, PolicyKind::os_interleave);
}

TEST(Policy, EveryBaselineValidates) {
  for (const auto& topo : topology_preset_names()) {
    const auto t = build_topology(topo);
    for (const auto& s : baseline_strategy_names()) {
      EXPECT_TRUE(validate_policy(baseline_schedule(s, t, 256, 3), t, 256).empty()) << topo << " " << s;
    }
  }
}

TEST(Policy, ValidationMessages) {
  const auto t = build_topology("tiny-2n4c");
  auto p = baseline_schedule("grouped", t, 4);
  p.assignment[0] = t.routers().front();
  p.placement[0] = t.node_of(p.assignment[0]);
  EXPECT_TRUE(mentions(validate_policy(p, t, 4), "non-worker target"));

  auto short_p = sn_thread_policy(t, {0, 1, 3});
  EXPECT_TRUE(mentions(validate_policy(short_p, t, 4), "uncovered slice 3"));

  auto unknown = sn_thread_policy(t, {0, 1, 3, 4});
  unknown.assignment[2] = 99;
  EXPECT_TRUE(mentions(validate_policy(unknown, t, 4), "unknown core"));
  EXPECT_THROW(require_valid(unknown, t, 4), Error);
}

TEST(Policy, SnThreadPlacementFollowsCores) {
  const auto t = build_topology("tiny-2n4c");
  const auto p = sn_thread_policy(t, {4, 0, 3, 1});
  EXPECT_EQ(p.placement, (std::vector<NodeId>{1, 0, 1, 0}));
  EXPECT_EQ(slice_homes(p, t), p.placement);
}

TEST(Policy, JsonAndFileRoundTrip) {
  const auto t = build_topology("skx-4s-snc2");
  const auto dir = std::filesystem::temp_directory_path() / "numalab_policy_test";
  std::filesystem::create_directories(dir);
  for (const auto& s : baseline_strategy_names()) {
    const auto p = baseline_schedule(s, t, 64, 9);
    EXPECT_EQ(policy_from_json(to_json(p)), p);
    const auto path = (dir / (s + ".json")).string();
    save_policy_file(path, p);
    EXPECT_EQ(load_policy_file(path), p);
    EXPECT_EQ(resolve_policy("file:" + path, t, 64, 0), p);
    EXPECT_EQ(policy_digest(load_policy_file(path)), policy_digest(p));
  }
  std::filesystem::remove_all(dir);
}

TEST(Policy, KindNames) {
  for (auto k : {PolicyKind::os_default, PolicyKind::os_interleave, PolicyKind::se_numa, PolicyKind::sn_numa,
                 PolicyKind::sn_thread}) {
    EXPECT_EQ(parse_policy_kind(to_string(k)), k);
  }
  EXPECT_EQ(to_string(PolicyKind::sn_thread), "SnThread");
  EXPECT_THROW(parse_policy_kind("Nope"), Error);
  EXPECT_THROW(baseline_schedule("nope", build_topology("tiny-2n4c"), 4), Error);
}
