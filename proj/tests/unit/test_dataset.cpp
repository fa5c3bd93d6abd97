#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "numalab/dataset.hpp"
#include "numalab/error.hpp"
#include "numalab/experiment.hpp"

using namespace numalab;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

CounterRow row_of(std::uint64_t base) {
  CounterRow r{};
  for (std::size_t i = 0; i < kCounterCount; ++i) r[i] = base * (i + 1);
  return r;
}

Trajectory handmade(const NumaTopology& t) {
  Trajectory tr;
  tr.context.topology = t.name();
  tr.context.workload = "rw50";
  tr.context.slices = 3;
  tr.policy = sn_thread_policy(t, {0, 0, 3});
  tr.snapshot.per_slice = {row_of(1), row_of(10), row_of(100)};
  tr.snapshot.offcore = OffcoreStats::zero(t);
  tr.snapshot.offcore.channel_bytes[1][0] = 128;
  tr.snapshot.offcore.link_bytes[1] = 64;
  tr.snapshot.per_slice_throughput = {2000.0, 3000.0, 5000.0};
  tr.snapshot.slice_queries = {2, 3, 5};
  tr.snapshot.throughput = 10000.0;
  tr.throughput = 10000.0;
  tr.id = trajectory_id(tr.context, tr.policy);
  return tr;
}

}  // namespace

TEST(Rtg, Examples) {
  EXPECT_EQ(rtg_sequence({2000.0, 1000.0}, 10000.0), (std::vector<double>{10000.0, 8000.0}));
  EXPECT_EQ(rtg_sequence({0.0, 0.0, 0.0}, 42.0), (std::vector<double>{42.0, 42.0, 42.0}));
  const std::vector<double> r{1.5, 2.25, 3.0};
  const auto rtg = rtg_sequence(r, 6.75);
  EXPECT_EQ(rtg.back() - r.back(), 0.0);
  EXPECT_TRUE(rtg_sequence({}, 1.0).empty());
}

TEST(Tokenize, HandmadeTrajectory) {
  const auto t = build_topology("tiny-2n4c");
  const auto s = tokenize(handmade(t), t);
  ASSERT_EQ(s.steps, 3u);
  EXPECT_EQ(s.rows, 2u);
  EXPECT_EQ(s.cols, 3u);
  EXPECT_EQ(s.token_count(), 10u);

  for (std::uint32_t tile = 0; tile < 6; ++tile) {
    EXPECT_EQ(s.view(0, tile), 0);
    for (std::size_t h = 0; h < kCounterCount; ++h) EXPECT_EQ(s.cell(0, tile, h), 0.0);
  }
  EXPECT_EQ(s.actions, (std::vector<std::uint32_t>{0, 0, 3}));
  // tiny grid rows: cores 0 1 2, then 5 4 3.
  const auto& g = t.grid();
  ASSERT_EQ(g.tile_index(0), 0u);
  ASSERT_EQ(g.tile_index(3), 5u);
  EXPECT_EQ(s.view(1, 0), 1);
  EXPECT_EQ(s.view(1, 5), 0);
  EXPECT_EQ(s.view(2, 0), 1);

  // Two slices on tile 0: element-wise sum.
  for (std::size_t h = 0; h < kCounterCount; ++h) {
    EXPECT_EQ(s.cell(2, 0, h), static_cast<double>(row_of(1)[h] + row_of(10)[h]));
    EXPECT_EQ(s.final_view[0 * kCounterCount + h], static_cast<double>(row_of(11)[h]));
    EXPECT_EQ(s.final_view[5 * kCounterCount + h], static_cast<double>(row_of(100)[h]));
  }
  EXPECT_EQ(s.rtg, (std::vector<double>{10000.0, 8000.0, 5000.0}));

  const std::vector<std::uint8_t> worker_tiles{1, 1, 0, 0, 1, 1};
  for (std::uint32_t step = 0; step < 3; ++step) {
    for (std::uint32_t tile = 0; tile < 6; ++tile) EXPECT_EQ(s.position_mask[step * 6 + tile], worker_tiles[tile]);
  }
  // 2 nodes x 1 channel, 2x2 links, then cores, nodes, sockets.
  EXPECT_EQ(s.meta, (std::vector<double>{0, 128, 0, 64, 0, 0, 6, 2, 2}));
}

TEST(Tokenize, IsPure) {
  const auto t = build_topology("tiny-2n4c");
  const auto tr = handmade(t);
  const auto a = tokenize(tr, t);
  const auto b = tokenize(tr, t);
  EXPECT_EQ(a.machine_view, b.machine_view);
  EXPECT_EQ(a.view_mask, b.view_mask);
  EXPECT_EQ(a.rtg, b.rtg);
  EXPECT_EQ(a.meta, b.meta);
}

TEST(Tokenize, Errors) {
  const auto t = build_topology("tiny-2n4c");
  auto os = handmade(t);
  os.policy = baseline_schedule("os-d", t, 3);
  EXPECT_FALSE(tokenizable(os));
  EXPECT_THROW(tokenize(os, t), Error);

  auto shape = handmade(t);
  shape.snapshot.per_slice.pop_back();
  EXPECT_THROW(tokenize(shape, t), Error);

  auto router = handmade(t);
  router.policy.assignment[1] = 2;
  try {
    tokenize(router, t);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("non-worker action"), std::string::npos);
  }

  EXPECT_THROW(tokenize(handmade(t), build_topology("skx-4s-snc2")), Error);
}

TEST(Store, RoundTripFilterAndOrder) {
  TempDir dir("numalab_store_test");
  TrajectoryStore store(dir.path / "t.jsonl");
  EXPECT_TRUE(store.load().trajectories.empty());

  const auto tiny = build_topology("tiny-2n4c");
  auto a = handmade(tiny);
  store.append(a);
  auto loaded = store.load();
  ASSERT_EQ(loaded.trajectories.size(), 1u);
  EXPECT_EQ(loaded.trajectories[0], a);

  auto b = a;
  b.context.topology = "skx-4s-snc2";
  b.id = "other";
  store.append(b);
  TrajectoryFilter f;
  f.topology = "tiny-2n4c";
  const auto only = store.load(f);
  ASSERT_EQ(only.trajectories.size(), 1u);
  EXPECT_EQ(only.trajectories[0].context.topology, "tiny-2n4c");

  for (int i = 0; i < 1000; ++i) {
    auto c = a;
    c.id = "n" + std::to_string(i);
    store.append(c);
  }
  const auto all = store.load();
  ASSERT_EQ(all.trajectories.size(), 1002u);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(all.trajectories[2 + i].id, "n" + std::to_string(i));
  EXPECT_EQ(store.ids().size(), 1002u);
}

TEST(Store, CorruptLinesSkippedAndCounted) {
  TempDir dir("numalab_store_corrupt");
  TrajectoryStore store(dir.path / "t.jsonl");
  const auto tiny = build_topology("tiny-2n4c");
  store.append(handmade(tiny));
  {
    std::ofstream out(store.path(), std::ios::app);
    out << "{\"id\": \"broken\"\n";
    out << "not json at all\n";
  }
  store.append(handmade(tiny));
  const auto r = store.load();
  EXPECT_EQ(r.trajectories.size(), 2u);
  EXPECT_EQ(r.corrupt, 2u);
}

TEST(Npy, ByteLayout) {
  TempDir dir("numalab_npy_test");
  const auto path = dir.path / "a.npy";
  write_npy(path, {2, 3}, {1.0f, -2.5f, 3.0f, 0.0f, 1e10f, 7.0f});
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ASSERT_EQ(bytes.substr(0, 6), "\x93NUMPY");
  EXPECT_EQ(bytes[6], 1);
  EXPECT_EQ(bytes[7], 0);
  const std::size_t hlen = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
  EXPECT_EQ((10 + hlen) % 64, 0u);
  const std::string header = bytes.substr(10, hlen);
  EXPECT_NE(header.find("'descr': '<f4'"), std::string::npos);
  EXPECT_NE(header.find("'shape': (2, 3)"), std::string::npos);
  EXPECT_EQ(header.back(), '\n');
  ASSERT_EQ(bytes.size(), 10 + hlen + 24);
  // -2.5f is 0xC0200000, little-endian.
  EXPECT_EQ(static_cast<unsigned char>(bytes[10 + hlen + 4]), 0x00);
  EXPECT_EQ(static_cast<unsigned char>(bytes[10 + hlen + 6]), 0x20);
  EXPECT_EQ(static_cast<unsigned char>(bytes[10 + hlen + 7]), 0xC0);

  const auto back = read_npy(path);
  EXPECT_EQ(back.shape, (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(back.data, (std::vector<float>{1.0f, -2.5f, 3.0f, 0.0f, 1e10f, 7.0f}));

  write_npy(dir.path / "v.npy", {4}, {1, 2, 3, 4});
  EXPECT_EQ(read_npy(dir.path / "v.npy").shape, std::vector<std::size_t>{4});
  EXPECT_THROW(write_npy(dir.path / "bad.npy", {3}, {1, 2}), Error);
}

TEST(NormStats, MatchesTwoPassComputation) {
  const auto t = build_topology("tiny-2n4c");
  std::vector<Trajectory> ts;
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    auto tr = handmade(t);
    for (auto& row : tr.snapshot.per_slice) {
      for (auto& v : row) v = uniform_index(rng, 1'000'000);
    }
    ts.push_back(tr);
  }
  auto os = handmade(t);
  os.policy = baseline_schedule("os-i", t, 3);
  os.snapshot.per_slice[0][0] = 1ULL << 40;
  ts.push_back(os);

  const auto s = compute_norm_stats(ts);
  EXPECT_EQ(s.rows, 60u);
  for (std::size_t h = 0; h < kCounterCount; ++h) {
    double sum = 0.0;
    for (int i = 0; i < 20; ++i) {
      for (const auto& row : ts[i].snapshot.per_slice) sum += static_cast<double>(row[h]);
    }
    const double mean = sum / 60.0;
    double var = 0.0;
    for (int i = 0; i < 20; ++i) {
      for (const auto& row : ts[i].snapshot.per_slice) var += std::pow(static_cast<double>(row[h]) - mean, 2);
    }
    EXPECT_NEAR(s.mean[h], mean, 1e-9 * std::abs(mean));
    EXPECT_NEAR(s.stddev[h], std::sqrt(var / 60.0), 1e-9 * std::sqrt(var / 60.0));
  }
  const auto back = norm_stats_from_json(to_json(s));
  EXPECT_EQ(back.mean, s.mean);
  EXPECT_EQ(back.stddev, s.stddev);
  EXPECT_EQ(back.target_multiplier, 1.1);
}

TEST(Export, WritesTokenFilesAndManifest) {
  TempDir dir("numalab_export_test");
  auto sc = make_scenario({"tiny-2n4c", "rw50", std::nullopt, 4, 1, 5'000, 5'000});
  std::vector<Trajectory> ts;
  for (const auto& s : baseline_strategy_names()) {
    ts.push_back(run_simulation(sc.topology, sc.index, baseline_schedule(s, sc.topology, 4, 1), sc.queries, {},
                                sc.context(1)));
  }
  const auto norm = compute_norm_stats(ts);
  const auto summary = export_tokens(ts, sc.topology, norm, dir.path);
  EXPECT_EQ(summary.exported, 4u);  // grouped, spread, mixed, random
  EXPECT_EQ(summary.skipped, 4u);

  std::ifstream mf(dir.path / "manifest.json");
  const auto manifest = nlohmann::json::parse(mf);
  ASSERT_EQ(manifest.at("trajectories").size(), 4u);
  EXPECT_TRUE(std::filesystem::exists(dir.path / "norm.json"));

  for (const auto& e : manifest.at("trajectories")) {
    const auto id = e.at("id").get<std::string>();
    const auto it = std::find_if(ts.begin(), ts.end(), [&](const Trajectory& t) { return t.id == id; });
    ASSERT_NE(it, ts.end());
    const auto d = dir.path / e.at("dir").get<std::string>();
    EXPECT_EQ(read_npy(d / "view_mask.npy").shape, (std::vector<std::size_t>{4, 2, 3}));
    const auto mv = read_npy(d / "machine_view.npy");
    EXPECT_EQ(mv.shape, (std::vector<std::size_t>{4, 2, 3, kCounterCount}));
    const auto actions = read_npy(d / "actions.npy");
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(actions.data[i], static_cast<float>(it->policy.assignment[i]));
    EXPECT_EQ(read_npy(d / "rtg.npy").data[0], static_cast<float>(it->throughput));
    EXPECT_EQ(e.at("tokens").get<std::size_t>(), 13u);

    // Step 3 holds slices 0..2, each z-scored.
    const CoreId core = it->policy.assignment[0];
    const std::size_t tile = sc.topology.grid().tile_index(core);
    for (std::size_t h = 0; h < kCounterCount; ++h) {
      double want = 0.0;
      for (SliceId s = 0; s < 3; ++s) {
        if (it->policy.assignment[s] == core) want += norm.normalize(h, static_cast<double>(it->snapshot.per_slice[s][h]));
      }
      EXPECT_NEAR(mv.data[(3 * 6 + tile) * kCounterCount + h], want, 1e-4 * (1.0 + std::abs(want)));
    }
  }
}
