// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: numalab_acceptance [path-to-numalab-cli]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "numalab/dataset.hpp"
#include "numalab/experiment.hpp"
#include "numalab/index.hpp"
#include "numalab/policy.hpp"
#include "numalab/simulator.hpp"

using namespace numalab;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt_double(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::uint64_t total(const HardwareSnapshot& s, Counter c) { return at(s.totals(), c); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("numalab_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// ---------------------------------------------------------------------------

Verdict determinism(const std::string& cli) {
  const auto dir = scratch("determinism");
  std::vector<std::string> records;
  double first_run = 0.0;
  if (!cli.empty()) {
    for (int i = 0; i < 2; ++i) {
      const auto out = dir / ("run" + std::to_string(i) + ".jsonl");
      const std::string cmd = "\"" + cli + "\" simulate --topology tiny-2n4c --workload rw50 --slices 4 " +
                              "--queries 100000 --policy random --policy-seed 3 --out \"" + out.string() + "\"";
      const auto t0 = std::chrono::steady_clock::now();
      if (std::system(cmd.c_str()) != 0) return {false, "simulate exited nonzero: " + cmd};
      if (i == 0) first_run = seconds_since(t0);
      records.push_back(slurp(out));
    }
  } else {
    auto sc = make_scenario({"tiny-2n4c", "rw50", std::nullopt, 4, std::nullopt, 100'000});
    const auto p = baseline_schedule("random", sc.topology, 4, 3);
    for (int i = 0; i < 2; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      records.push_back(to_json(run_simulation(sc.topology, sc.index, p, sc.queries, {}, sc.context(3))).dump());
      if (i == 0) first_run = seconds_since(t0);
    }
  }
  fs::remove_all(dir);
  const bool nonempty = !records[0].empty() && std::count(records[0].begin(), records[0].end(), '\n') <= 1;
  const bool same = records[0] == records[1];
  return {nonempty && same && first_run < 60.0,
          std::string(cli.empty() ? "in-process" : "cli") + " records " + (same ? "identical" : "DIFFER") + " (" +
              std::to_string(records[0].size()) + " bytes), 100K queries on tiny-2n4c in " +
              fmt_double("%.2f", first_run) + " s (limit 60)"};
}

// The eight baselines on skx-4s-snc2 / rw50 / 256 slices feed criteria 2 and 3.
std::map<std::string, Trajectory> skx_baselines() {
  auto sc = make_scenario({"skx-4s-snc2", "rw50"});
  std::map<std::string, Trajectory> out;
  for (const auto& name : baseline_strategy_names()) {
    out[name] = run_simulation(sc.topology, sc.index, baseline_schedule(name, sc.topology, 256, 1), sc.queries, {},
                               sc.context(1));
  }
  return out;
}

Verdict policy_spread(const std::map<std::string, Trajectory>& runs) {
  const auto spec = load_workload("rw50");
  if (spec.key_distribution != KeyDistribution::zipfian || spec.zipf_theta != 0.99) {
    return {false, "rw50 is not Zipf-0.99"};
  }
  auto lo = runs.begin(), hi = runs.begin();
  for (auto it = runs.begin(); it != runs.end(); ++it) {
    if (it->second.throughput < lo->second.throughput) lo = it;
    if (it->second.throughput > hi->second.throughput) hi = it;
  }
  const double ratio = hi->second.throughput / lo->second.throughput;
  std::string detail = "max " + hi->first + " " + fmt_double("%.0f", hi->second.throughput) + " q/s, min " + lo->first +
                       " " + fmt_double("%.0f", lo->second.throughput) + " q/s, ratio " + fmt_double("%.3f", ratio) +
                       " (need >= 1.5)";
  return {ratio >= 1.5, detail};
}

Verdict locality(const std::map<std::string, Trajectory>& runs) {
  const auto& g = runs.at("grouped");
  const auto& d = runs.at("os-d");
  const double ratio = g.throughput / d.throughput;
  const auto rg = total(g.snapshot, Counter::remote_dram_loads);
  const auto rd = total(d.snapshot, Counter::remote_dram_loads);
  return {ratio >= 1.2 && rg < rd, "grouped/os-d throughput " + fmt_double("%.3f", ratio) + " (need >= 1.2), remote loads " +
                                       std::to_string(rg) + " vs " + std::to_string(rd)};
}

Verdict oracle_optimum() {
  auto sc = make_scenario({"tiny-2n4c", "rw50", std::nullopt, 4});
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = enumerate_scenario(sc);
  const double elapsed = seconds_since(t0);
  const auto& best = r.trajectories[r.best];
  // The maximum must be the maximum of the list, found independently.
  const auto it = std::max_element(r.trajectories.begin(), r.trajectories.end(),
                                   [](const Trajectory& a, const Trajectory& b) { return a.throughput < b.throughput; });
  const auto again = run_simulation(sc.topology, sc.index, sn_thread_policy(sc.topology, best.policy.assignment),
                                    sc.queries, {}, sc.context(0));
  std::string assignment;
  for (auto c : best.policy.assignment) assignment += (assignment.empty() ? "" : ",") + std::to_string(c);
  const bool ok = r.trajectories.size() == 256 && elapsed < 300.0 && it->throughput == best.throughput &&
                  again.throughput == best.throughput && again.snapshot.per_slice == best.snapshot.per_slice;
  return {ok, std::to_string(r.trajectories.size()) + " assignments in " + fmt_double("%.1f", elapsed) +
                  " s (limit 300), argmax {" + assignment + "} " + fmt_double("%.3f", best.throughput) +
                  " q/s, rerun " + fmt_double("%.3f", again.throughput) +
                  (again.throughput == best.throughput ? " (exact)" : " (MISMATCH)")};
}

Verdict conservation() {
  std::vector<std::string> bad;
  std::size_t runs = 0;
  // Every baseline on a multi-node preset: per-slice loads against the unbatched query log.
  for (const auto& topo : {"skx-4s-snc2", "milan-2s-nps4"}) {
    auto sc = make_scenario({topo, "rw50", std::nullopt, 64, 1, 30'000, 30'000});
    SimConfig cfg;
    cfg.keep_query_log = true;
    for (const auto& name : baseline_strategy_names()) {
      const auto out = simulate(sc.topology, sc.index, baseline_schedule(name, sc.topology, 64, 2), sc.queries, cfg);
      std::uint64_t per_slice = 0, logged = 0, llc = 0;
      for (const auto& row : out.snapshot.per_slice) {
        per_slice += at(row, Counter::local_dram_loads) + at(row, Counter::remote_dram_loads);
      }
      for (const auto& d : out.query_log) {
        logged += at(d.counters, Counter::local_dram_loads) + at(d.counters, Counter::remote_dram_loads);
        llc += at(d.counters, Counter::llc_misses);
      }
      const auto& s = out.snapshot;
      if (per_slice != logged || per_slice != llc ||
          s.offcore.total_channel_bytes() != 64 * total(s, Counter::memory_accesses) ||
          s.offcore.total_link_bytes() != 64 * total(s, Counter::memory_misses)) {
        bad.push_back(std::string(topo) + "/" + name);
      }
      ++runs;
    }
  }
  // All-local: every slice served and stored on one node.
  std::size_t local_runs = 0;
  auto check_local = [&](const std::string& topo, const std::string& wl, IndexKind kind,
                         const std::vector<CoreId>& a) {
    auto sc = make_scenario({topo, wl, kind, static_cast<std::uint32_t>(a.size()), 1, 20'000, 20'000});
    const auto out = simulate(sc.topology, sc.index, sn_thread_policy(sc.topology, a), sc.queries);
    const auto& s = out.snapshot;
    if (total(s, Counter::remote_dram_loads) != 0 || s.offcore.total_link_bytes() != 0 ||
        total(s, Counter::local_dram_loads) == 0) {
      bad.push_back("all-local " + topo + "/" + wl);
    }
    ++local_runs;
  };
  for (auto kind : {IndexKind::bplus, IndexKind::rtree2d}) {
    check_local("tiny-2n4c", "rw50", kind, {0, 1, 0, 1});
    check_local("tiny-2n4c", "mixed50", kind, {3, 4, 4, 3});
  }
  {
    const auto skx = build_topology("skx-4s-snc2");
    const auto& w = skx.workers_on(5);
    std::vector<CoreId> a(32);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = w[i % w.size()];
    check_local("skx-4s-snc2", "rw50", IndexKind::bplus, a);
  }
  std::string detail = std::to_string(runs) + " runs: per-slice loads == logged loads == LLC misses, " +
                       "channel/link bytes match counters; " + std::to_string(local_runs) +
                       " all-local runs with 0 remote loads and 0 link bytes";
  if (!bad.empty()) {
    detail = "violations:";
    for (const auto& b : bad) detail += " " + b;
  }
  return {bad.empty(), detail};
}

Verdict token_suite() {
  const std::vector<std::string> topos = {"tiny-2n4c", "skx-4s-snc2", "milan-2s-nps4", "gh200-1s", "sandybridge-4s"};
  const std::vector<std::string> wls = {"rw50", "lookup100", "mixed50"};
  const std::vector<std::string> strategies = {"random", "grouped", "spread", "mixed"};
  Rng rng(20261016);
  std::size_t checked = 0;
  std::vector<std::string> bad;
  for (int n = 0; n < 100; ++n) {
    const auto& topo = topos[uniform_index(rng, topos.size())];
    const auto& wl = wls[uniform_index(rng, wls.size())];
    const auto T = static_cast<std::uint32_t>(1 + uniform_index(rng, 48));
    const auto seed = 1 + uniform_index(rng, 1'000'000);
    const auto& strategy = strategies[n % 4 == 0 ? 0 : uniform_index(rng, strategies.size())];
    auto sc = make_scenario({topo, wl, std::nullopt, T, seed, 3'000, 5'000});
    const auto t = run_simulation(sc.topology, sc.index, baseline_schedule(strategy, sc.topology, T, seed),
                                  sc.queries, {}, sc.context(seed));
    const auto s = tokenize(t, sc.topology);
    const auto& grid = sc.topology.grid();
    const std::uint32_t tiles = grid.tile_count();
    bool ok = s.token_count() == 3 * static_cast<std::size_t>(T) + 1 && s.steps == T && s.tiles() == tiles;

    // View mask: empty at step 0, then exactly the tiles of the actions so far.
    std::vector<std::uint8_t> mask(tiles, 0);
    std::vector<double> sums(static_cast<std::size_t>(tiles) * kCounterCount, 0.0);
    for (std::uint32_t step = 0; ok && step <= T; ++step) {
      const bool last = step == T;
      for (std::uint32_t tile = 0; ok && tile < tiles; ++tile) {
        if (!last && s.view(step, tile) != mask[tile]) ok = false;
        for (std::size_t h = 0; ok && h < kCounterCount; ++h) {
          const double got = last ? s.final_view[tile * kCounterCount + h] : s.cell(step, tile, h);
          if (got != sums[tile * kCounterCount + h]) ok = false;
        }
      }
      if (last) break;
      const CoreId core = t.policy.assignment[step];
      if (s.actions[step] != core) ok = false;
      const auto tile = grid.tile_index(core);
      mask[tile] = 1;
      for (std::size_t h = 0; h < kCounterCount; ++h) {
        sums[tile * kCounterCount + h] += static_cast<double>(t.snapshot.per_slice[step][h]);
      }
    }

    // Return-to-go: starts at the trajectory throughput, drops by each slice's reward, ends at zero.
    double acc = 0.0;
    for (std::uint32_t step = 0; ok && step < T; ++step) {
      if (s.rewards[step] != t.snapshot.per_slice_throughput[step]) ok = false;
      if (s.rtg[step] != t.throughput - acc) ok = false;
      acc += s.rewards[step];
    }
    if (ok && t.throughput - acc != 0.0) ok = false;
    if (!ok) bad.push_back(topo + "/" + wl + "/" + strategy + "/T" + std::to_string(T));
    ++checked;
  }
  std::string detail = std::to_string(checked) +
                       " randomized trajectories: 3T+1 tokens, view-mask recurrence, machine-view sums, "
                       "rtg telescoping to 0, all exact";
  if (!bad.empty()) {
    detail = std::to_string(bad.size()) + " mismatches, first " + bad.front();
  }
  return {bad.empty(), detail};
}

Verdict index_correctness() {
  const std::uint64_t domain = 1ULL << 40;
  Rng rng(424242);
  std::vector<std::uint64_t> oracle;
  for (int i = 0; i < 30'000; ++i) oracle.push_back(uniform_index(rng, domain));
  std::sort(oracle.begin(), oracle.end());
  oracle.erase(std::unique(oracle.begin(), oracle.end()), oracle.end());
  std::vector<Record> init;
  for (auto k : oracle) init.push_back(Record{k, k, {}});
  auto idx = build_index(IndexKind::bplus, init, {0, domain}, 64);

  std::size_t mismatches = 0, ops = 0;
  for (; ops < 100'000; ++ops) {
    Query q;
    const auto op = uniform_index(rng, 10);
    if (op < 4) {
      q.kind = QueryKind::insert;
      q.key = uniform_index(rng, 3) == 0 ? oracle[uniform_index(rng, oracle.size())] : uniform_index(rng, domain);
      idx.execute(q);
      const auto it = std::lower_bound(oracle.begin(), oracle.end(), q.key);
      if (it == oracle.end() || *it != q.key) oracle.insert(it, q.key);
    } else if (op < 8) {
      q.key = uniform_index(rng, 2) == 0 ? oracle[uniform_index(rng, oracle.size())] : uniform_index(rng, domain);
      const std::uint64_t want = std::binary_search(oracle.begin(), oracle.end(), q.key) ? 1 : 0;
      if (idx.execute(q).result_size != want) ++mismatches;
    } else {
      q.kind = QueryKind::scan;
      q.key = uniform_index(rng, domain);
      q.scan_length = 1 + uniform_index(rng, domain / 500);
      const auto hi = std::min(q.key + q.scan_length, domain);
      const auto want = std::lower_bound(oracle.begin(), oracle.end(), hi) -
                        std::lower_bound(oracle.begin(), oracle.end(), q.key);
      if (idx.execute(q).result_size != static_cast<std::uint64_t>(want)) ++mismatches;
    }
  }
  const bool structure_ok = !idx.check_structure().has_value() && idx.record_count() == oracle.size();

  // Aggressive and lazy migration from the same placement towards the same targets.
  std::size_t fixed_points = 0, fp_bad = 0;
  for (auto kind : {IndexKind::bplus, IndexKind::rtree2d}) {
    for (std::uint64_t trial = 0; trial < 3; ++trial) {
      const auto keys = make_key_space(kind, DataDistribution::dense, 40'000, 10 + trial);
      auto a = build_index(keys, 32);
      std::vector<NodeId> homes(32), dest(32);
      for (auto& h : homes) h = static_cast<NodeId>(uniform_index(rng, 8));
      for (auto& d : dest) d = static_cast<NodeId>(uniform_index(rng, 8));
      a.apply_placement(PlacementMode::slice_home, 8, 0, homes);
      auto b = a;
      a.begin_migration_epoch();
      b.begin_migration_epoch();
      std::vector<std::vector<MigrationStep>> lazy;
      for (SliceId s = 0; s < 32; ++s) {
        for (const auto& st : a.plan_migration(s, dest[s], MigrationMode::aggressive)) a.apply_migration_step(st);
        lazy.push_back(b.plan_migration(s, dest[s], MigrationMode::lazy, 4));
      }
      for (std::size_t round = 0; round < 4; ++round) {
        for (auto& steps : lazy) {
          if (round < steps.size()) b.apply_migration_step(steps[round]);
        }
      }
      bool ok = a.home_vector() == b.home_vector();
      for (SliceId s = 0; ok && s < 32; ++s) {
        for (auto leaf : a.leaves_of_slice(s)) ok = ok && a.node(leaf).home == dest[s];
      }
      fp_bad += ok ? 0 : 1;
      ++fixed_points;
    }
  }
  // The same through the simulator's enforcement path.
  {
    auto sc = make_scenario({"skx-4s-snc2", "rw50", std::nullopt, 64, 1, 20'000, 20'000});
    const auto from = baseline_schedule("spread", sc.topology, 64);
    const auto to = baseline_schedule("random", sc.topology, 64, 9);
    System x(sc.topology, sc.index), y(sc.topology, sc.index);
    x.install(from);
    y.install(from);
    x.enforce(to, MigrationMode::aggressive);
    y.enforce(to, MigrationMode::lazy, 4);
    x.drain_migrations();
    y.drain_migrations();
    fp_bad += x.index().home_vector() == y.index().home_vector() ? 0 : 1;
    ++fixed_points;
  }
  return {mismatches == 0 && structure_ok && fp_bad == 0,
          std::to_string(ops) + " mixed ops, " + std::to_string(mismatches) + " oracle mismatches, structure " +
              (structure_ok ? "valid" : "INVALID") + "; " + std::to_string(fixed_points - fp_bad) + "/" +
              std::to_string(fixed_points) + " aggressive/lazy fixed points equal"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  int failed = 0;
  auto report = [&](int n, const std::string& name, const std::function<Verdict()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = f();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::printf("%s [%d] %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", n, name.c_str(), v.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  };

  report(1, "determinism", [&] { return determinism(cli); });
  std::map<std::string, Trajectory> skx;
  std::string skx_error;
  try {
    skx = skx_baselines();
  } catch (const std::exception& e) {
    skx_error = e.what();
  }
  auto need_skx = [&](const std::function<Verdict()>& f) {
    return [&, f] { return skx_error.empty() ? f() : Verdict{false, "baseline runs failed: " + skx_error}; };
  };
  report(2, "policy spread", need_skx([&] { return policy_spread(skx); }));
  report(3, "locality direction", need_skx([&] { return locality(skx); }));
  report(4, "oracle optimum", oracle_optimum);
  report(5, "counter conservation", conservation);
  report(6, "token suite", token_suite);
  report(7, "index correctness", index_correctness);
  std::printf("%d of 7 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
