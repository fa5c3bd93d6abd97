#include "numalab/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "numalab/error.hpp"

namespace numalab {

TrajectoryContext Scenario::context(std::uint64_t policy_seed, bool learned) const {
  TrajectoryContext c;
  c.topology = topology.name();
  c.workload = workload.name;
  c.index = std::string(to_string(index.kind()));
  c.slices = index.slice_count();
  c.record_seed = workload.record_seed;
  c.workload_seed = workload.seed;
  c.policy_seed = policy_seed;
  c.queries = queries.size();
  c.learned = learned;
  return c;
}

Scenario make_scenario(const ScenarioOptions& opts) {
  if (opts.slices == 0) throw Error("slice count must be at least 1");
  WorkloadSpec spec = load_workload(opts.workload);
  if (opts.index) spec.index_kind = *opts.index;
  if (opts.seed) spec.seed = *opts.seed;
  if (opts.queries) spec.query_count = *opts.queries;
  if (opts.records) spec.record_count = *opts.records;
  spec.validate();
  const KeySpace keys = key_space_for(spec);
  if (keys.size() < opts.slices) throw Error("fewer records than slices");
  auto queries = generate_workload(spec, keys);
  auto index = build_index(keys, opts.slices);
  return Scenario{load_topology(opts.topology), std::move(spec), std::move(index), std::move(queries)};
}

// ---------------------------------------------------------------------------

void ExperimentPlan::validate() const {
  if (topologies.empty() || workloads.empty() || (policies.empty() && random_policies == 0) || repetitions == 0) {
    throw Error("experiment plan has an empty cross-product");
  }
  const auto& names = baseline_strategy_names();
  for (const auto& p : policies) {
    if (std::find(names.begin(), names.end(), p) == names.end()) throw Error("unknown baseline strategy '" + p + "'");
  }
  if (slices == 0) throw Error("slice count must be at least 1");
  sim.validate();
}

namespace {

struct Cell {
  std::string label;
  SchedulePolicy policy;
  std::uint64_t policy_seed;
};

}  // namespace

CollectSummary collect(const ExperimentPlan& plan, TrajectoryStore& store, const Progress& progress) {
  plan.validate();
  CollectSummary summary;
  const auto existing_ids = store.ids();
  std::unordered_set<std::string> done(existing_ids.begin(), existing_ids.end());

  const std::size_t total = plan.topologies.size() * plan.workloads.size() *
                            (plan.policies.size() * plan.repetitions + plan.random_policies);
  std::size_t finished = 0;
  auto run_cells = [&](const Scenario& sc, const std::vector<Cell>& cells) {
    for (const auto& cell : cells) {
      ++summary.cells;
      try {
        const TrajectoryContext ctx = sc.context(cell.policy_seed);
        const std::string id = trajectory_id(ctx, cell.policy);
        if (done.count(id)) {
          ++summary.skipped;
        } else {
          Trajectory t = run_simulation(sc.topology, sc.index, cell.policy, sc.queries, plan.sim, ctx);
          store.append(t);
          done.insert(t.id);
          ++summary.ran;
        }
      } catch (const std::exception& e) {
        summary.failures.push_back(cell.label + ": " + e.what());
        spdlog::error("cell {} failed: {}", cell.label, e.what());
      }
      if (progress) progress(++finished, total, cell.label);
    }
  };

  for (const auto& topo : plan.topologies) {
    for (const auto& wl : plan.workloads) {
      const std::string where = topo + "/" + wl;
      for (std::uint32_t rep = 0; rep < plan.repetitions; ++rep) {
        const std::uint64_t seed = plan.repetition_seed(rep);
        std::optional<Scenario> sc;
        try {
          sc = make_scenario({topo, wl, plan.index, plan.slices, seed, plan.queries, plan.records});
        } catch (const std::exception& e) {
          summary.cells += plan.policies.size();
          finished += plan.policies.size();
          summary.failures.push_back(where + " rep " + std::to_string(rep) + ": " + e.what());
          continue;
        }
        std::vector<Cell> cells;
        for (const auto& p : plan.policies) {
          cells.push_back({where + "/" + p + "/seed" + std::to_string(seed),
                           baseline_schedule(p, sc->topology, plan.slices, seed), seed});
        }
        run_cells(*sc, cells);
      }
      if (plan.random_policies == 0) continue;

      std::optional<Scenario> sc;
      try {
        sc = make_scenario({topo, wl, plan.index, plan.slices, plan.repetition_seed(0), plan.queries, plan.records});
      } catch (const std::exception& e) {
        summary.cells += plan.random_policies;
        finished += plan.random_policies;
        summary.failures.push_back(where + " random expansion: " + e.what());
        continue;
      }
      // Distinct assignments: redraw on a repeated digest.
      std::vector<Cell> cells;
      std::set<std::uint64_t> digests;
      const std::uint64_t attempts = 64ULL * plan.random_policies;
      for (std::uint64_t k = 0; k < attempts && cells.size() < plan.random_policies; ++k) {
        const std::uint64_t pseed = mix_seed(plan.seed, 0x7A4D00 + k);
        auto policy = baseline_schedule("random", sc->topology, plan.slices, pseed);
        if (!digests.insert(policy_digest(policy)).second) continue;
        cells.push_back({where + "/random/" + std::to_string(pseed), std::move(policy), pseed});
      }
      if (cells.size() < plan.random_policies) {
        spdlog::warn("{}: only {} distinct random assignments exist", where, cells.size());
        finished += plan.random_policies - cells.size();
      }
      run_cells(*sc, cells);
    }
  }
  return summary;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<CoreId>> enumerate_assignments(const NumaTopology& topology, std::uint32_t slices,
                                                       std::size_t limit) {
  const auto& workers = topology.workers();
  if (workers.empty()) throw Error("topology has no workers");
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < slices; ++i) {
    if (count > limit / workers.size()) throw Error("enumeration exceeds " + std::to_string(limit) + " assignments");
    count *= workers.size();
  }
  std::vector<std::vector<CoreId>> out;
  out.reserve(count);
  std::vector<std::size_t> digit(slices, 0);
  for (std::size_t n = 0; n < count; ++n) {
    std::vector<CoreId> a(slices);
    for (std::uint32_t s = 0; s < slices; ++s) a[s] = workers[digit[s]];
    out.push_back(std::move(a));
    // Odometer with the last slice fastest.
    for (std::uint32_t s = slices; s-- > 0;) {
      if (++digit[s] < workers.size()) break;
      digit[s] = 0;
    }
  }
  return out;
}

EnumerationResult enumerate_scenario(const Scenario& scenario, const SimConfig& config, const Progress& progress) {
  const auto all = enumerate_assignments(scenario.topology, scenario.index.slice_count());
  EnumerationResult r;
  r.trajectories.reserve(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto policy = sn_thread_policy(scenario.topology, all[i], "enum", i);
    r.trajectories.push_back(
        run_simulation(scenario.topology, scenario.index, policy, scenario.queries, config, scenario.context(i)));
    if (r.trajectories[i].throughput > r.trajectories[r.best].throughput) r.best = i;
    if (progress) progress(i + 1, all.size(), policy.strategy);
  }
  return r;
}

// ---------------------------------------------------------------------------

std::vector<ReportRow> build_report(const std::vector<Trajectory>& trajectories) {
  struct Acc {
    double sum = 0.0;
    std::size_t runs = 0;
  };
  // (context, learned, label) keeps baselines ahead of learned rows.
  std::map<std::string, std::map<std::pair<bool, std::string>, Acc>> groups;
  for (const auto& t : trajectories) {
    auto& a = groups[context_key(t.context)][{t.context.learned, t.policy.strategy}];
    a.sum += t.throughput;
    ++a.runs;
  }
  const auto& order = baseline_strategy_names();
  auto rank = [&](const std::string& label) {
    return static_cast<std::size_t>(std::find(order.begin(), order.end(), label) - order.begin());
  };

  std::vector<ReportRow> rows;
  for (const auto& [ctx, policies] : groups) {
    double best = 0.0;
    for (const auto& [key, acc] : policies) {
      if (!key.first) best = std::max(best, acc.sum / static_cast<double>(acc.runs));
    }
    if (best <= 0.0) {
      spdlog::warn("context {} has no baseline; omitted from the report", ctx);
      continue;
    }
    std::vector<ReportRow> ctx_rows;
    for (const auto& [key, acc] : policies) {
      ReportRow r;
      r.context = ctx;
      r.learned = key.first;
      r.policy = key.second;
      r.runs = acc.runs;
      r.throughput = acc.sum / static_cast<double>(acc.runs);
      r.normalized = r.throughput / best;
      r.learned_wins = r.learned && r.throughput >= best;
      ctx_rows.push_back(std::move(r));
    }
    std::stable_sort(ctx_rows.begin(), ctx_rows.end(), [&](const ReportRow& a, const ReportRow& b) {
      if (a.learned != b.learned) return !a.learned;
      const auto ra = rank(a.policy), rb = rank(b.policy);
      if (ra != rb) return ra < rb;
      return a.policy < b.policy;
    });
    rows.insert(rows.end(), ctx_rows.begin(), ctx_rows.end());
  }
  return rows;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::string out = "context,policy,learned,runs,throughput,normalized,flag\n";
  char buf[64];
  for (const auto& r : rows) {
    out += r.context + "," + r.policy + "," + (r.learned ? "1" : "0") + "," + std::to_string(r.runs) + ",";
    std::snprintf(buf, sizeof buf, "%.1f,%.4f,", r.throughput, r.normalized);
    out += buf;
    out += r.learned ? (r.learned_wins ? "learned wins" : "baseline wins") : "";
    out += "\n";
  }
  return out;
}

Evaluation evaluate_policy(const Scenario& scenario, const SchedulePolicy& policy, const TrajectoryStore& store,
                           const SimConfig& config) {
  require_valid(policy, scenario.topology, scenario.index.slice_count());
  const TrajectoryContext ctx = scenario.context(policy.seed, true);
  const std::string key = context_key(ctx);

  std::map<std::string, std::pair<double, std::size_t>> baselines;
  for (const auto& t : store.load().trajectories) {
    if (t.context.learned || context_key(t.context) != key) continue;
    auto& b = baselines[t.policy.strategy];
    b.first += t.throughput;
    ++b.second;
  }
  if (baselines.empty()) throw Error("missing baseline context " + key + " in " + store.path().string());

  Evaluation e;
  for (const auto& [name, acc] : baselines) {
    const double mean = acc.first / static_cast<double>(acc.second);
    if (mean > e.best_baseline) {
      e.best_baseline = mean;
      e.best_policy = name;
    }
  }
  e.trajectory = run_simulation(scenario.topology, scenario.index, policy, scenario.queries, config, ctx);
  e.ratio = e.trajectory.throughput / e.best_baseline;
  e.learned_wins = e.trajectory.throughput >= e.best_baseline;
  return e;
}

std::filesystem::path output_root() {
  if (const char* env = std::getenv("NUMALAB_OUT"); env != nullptr && *env != '\0') return env;
  return "numalab-out";
}

}  // namespace numalab
