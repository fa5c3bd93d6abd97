#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "numalab/dataset.hpp"
#include "numalab/error.hpp"
#include "numalab/experiment.hpp"
#include "numalab/simulator.hpp"

using namespace numalab;

namespace {

struct Common {
  std::string topology = "tiny-2n4c";
  std::string workload = "rw50";
  std::string index;
  std::uint32_t slices = 256;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> queries;
  std::optional<std::uint64_t> records;
  std::string sim_config;

  void add(CLI::App* app) {
    app->add_option("--topology", topology, "preset name or topology JSON file")->capture_default_str();
    app->add_option("--workload", workload, "canned workload or workload JSON file")->capture_default_str();
    app->add_option("--index", index, "bplus | rtree2d (default: the workload's)");
    app->add_option("--slices", slices, "index slices T")->capture_default_str();
    app->add_option("--seed", seed, "query-stream seed");
    app->add_option("--queries", queries, "query count");
    app->add_option("--records", records, "record count");
    app->add_option("--sim-config", sim_config, "simulator settings JSON");
  }

  ScenarioOptions scenario() const {
    ScenarioOptions o;
    o.topology = topology;
    o.workload = workload;
    if (!index.empty()) o.index = parse_index_kind(index);
    o.slices = slices;
    o.seed = seed;
    o.queries = queries;
    o.records = records;
    return o;
  }

  SimConfig config() const {
    if (sim_config.empty()) return {};
    std::ifstream in(sim_config);
    if (!in) throw Error("cannot read " + sim_config);
    return sim_config_from_json(nlohmann::json::parse(in));
  }
};

std::string default_store() { return (output_root() / "trajectories.jsonl").string(); }

void print_summary(const Trajectory& t) {
  const auto tot = t.snapshot.totals();
  std::printf("%s throughput=%.1f q/s wall=%.6fs remote_dram=%llu local_dram=%llu link_bytes=%llu\n", t.id.c_str(),
              t.throughput, t.snapshot.wall_time, static_cast<unsigned long long>(at(tot, Counter::remote_dram_loads)),
              static_cast<unsigned long long>(at(tot, Counter::local_dram_loads)),
              static_cast<unsigned long long>(t.snapshot.offcore.total_link_bytes()));
}

Progress bar(bool quiet) {
  if (quiet) return {};
  return [](std::size_t done, std::size_t total, const std::string& label) {
    std::fprintf(stderr, "[%zu/%zu] %s\n", done, total, label.c_str());
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NUMA-aware index scheduling simulator"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace | debug | info | warn | error | off")->capture_default_str();

  // simulate
  Common sim;
  std::string sim_policy = "grouped";
  std::uint64_t sim_policy_seed = 1;
  std::string sim_out;
  std::string sim_save_policy;
  auto* simulate = app.add_subcommand("simulate", "run one policy and append its trajectory");
  sim.add(simulate);
  simulate->add_option("--policy", sim_policy, "strategy name or file:<path>")->capture_default_str();
  simulate->add_option("--policy-seed", sim_policy_seed, "seed for seeded strategies")->capture_default_str();
  simulate->add_option("--out", sim_out, "trajectory store (JSONL)");
  simulate->add_option("--save-policy", sim_save_policy, "also write the policy JSON here");

  // collect
  ExperimentPlan plan;
  plan.topologies = {"tiny-2n4c"};
  plan.workloads = {"rw50"};
  plan.policies = baseline_strategy_names();
  std::string plan_index;
  std::string collect_store;
  std::string collect_sim;
  bool quiet = false;
  auto* col = app.add_subcommand("collect", "run an experiment plan into a trajectory store");
  col->add_option("--topologies", plan.topologies)->delimiter(',')->capture_default_str();
  col->add_option("--workloads", plan.workloads)->delimiter(',')->capture_default_str();
  col->add_option("--policies", plan.policies, "baseline strategies")->delimiter(',')->capture_default_str();
  col->add_option("--index", plan_index, "bplus | rtree2d");
  col->add_option("--repetitions", plan.repetitions)->capture_default_str();
  col->add_option("--seed", plan.seed, "base seed; repetition r uses seed + r")->capture_default_str();
  col->add_option("--slices", plan.slices)->capture_default_str();
  col->add_option("--queries", plan.queries);
  col->add_option("--records", plan.records);
  col->add_option("--random", plan.random_policies, "extra distinct SN:T-Random assignments per context")
      ->capture_default_str();
  col->add_option("--sim-config", collect_sim, "simulator settings JSON");
  col->add_option("--store", collect_store, "trajectory store (JSONL)");
  col->add_flag("--quiet", quiet);

  // dataset tokenize
  auto* dataset = app.add_subcommand("dataset", "dataset operations");
  dataset->require_subcommand(1);
  std::string tok_in, tok_topology = "tiny-2n4c", tok_out;
  double target_mult = 1.1;
  auto* tokenize_cmd = dataset->add_subcommand("tokenize", "export SN:T trajectories as NPY token files");
  tokenize_cmd->add_option("--in", tok_in, "trajectory store (JSONL)")->required();
  tokenize_cmd->add_option("--topology", tok_topology, "topology the trajectories ran on")->capture_default_str();
  tokenize_cmd->add_option("--out", tok_out, "output directory");
  tokenize_cmd->add_option("--target-mult", target_mult, "inference target as a multiple of the best throughput")
      ->capture_default_str();

  // enumerate
  Common en;
  en.slices = 4;
  std::string enum_store;
  auto* enumerate = app.add_subcommand("enumerate", "simulate every SN:T assignment and report the best");
  en.add(enumerate);
  enumerate->add_option("--store", enum_store, "also append every trajectory here");
  enumerate->add_flag("--quiet", quiet);

  // evaluate
  Common ev;
  std::string eval_policy, eval_store;
  double min_ratio = 1.0;
  bool do_assert = false, no_append = false;
  auto* evaluate = app.add_subcommand("evaluate", "simulate a learned policy against stored baselines");
  ev.add(evaluate);
  evaluate->add_option("--policy", eval_policy, "policy JSON (or file:<path> / strategy name)")->required();
  evaluate->add_option("--store", eval_store, "trajectory store with the baselines");
  evaluate->add_option("--min-ratio", min_ratio, "required throughput / best baseline")->capture_default_str();
  evaluate->add_flag("--assert", do_assert, "exit nonzero when the ratio falls short");
  evaluate->add_flag("--no-append", no_append, "do not store the learned trajectory");

  // report
  std::string rep_store, rep_out;
  auto* report = app.add_subcommand("report", "throughput per policy, normalized to the best baseline");
  report->add_option("--store", rep_store, "trajectory store (JSONL)");
  report->add_option("--out", rep_out, "CSV path");

  // policy
  std::string pol_strategy = "grouped", pol_topology = "tiny-2n4c", pol_out;
  std::uint32_t pol_slices = 256;
  std::uint64_t pol_seed = 1;
  auto* policy_cmd = app.add_subcommand("policy", "write a baseline policy file");
  policy_cmd->add_option("--strategy", pol_strategy)->capture_default_str();
  policy_cmd->add_option("--topology", pol_topology)->capture_default_str();
  policy_cmd->add_option("--slices", pol_slices)->capture_default_str();
  policy_cmd->add_option("--seed", pol_seed)->capture_default_str();
  policy_cmd->add_option("--out", pol_out)->required();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*simulate) {
      const Scenario sc = make_scenario(sim.scenario());
      const auto policy = resolve_policy(sim_policy, sc.topology, sim.slices, sim_policy_seed);
      const Trajectory t = run_simulation(sc.topology, sc.index, policy, sc.queries, sim.config(),
                                          sc.context(sim_policy_seed));
      TrajectoryStore store(sim_out.empty() ? default_store() : sim_out);
      store.append(t);
      if (!sim_save_policy.empty()) save_policy_file(sim_save_policy, policy);
      print_summary(t);
      return 0;
    }
    if (*col) {
      if (!plan_index.empty()) plan.index = parse_index_kind(plan_index);
      if (!collect_sim.empty()) {
        Common c;
        c.sim_config = collect_sim;
        plan.sim = c.config();
      }
      TrajectoryStore store(collect_store.empty() ? default_store() : collect_store);
      const auto s = collect(plan, store, bar(quiet));
      std::printf("cells=%zu ran=%zu skipped=%zu failed=%zu store=%s\n", s.cells, s.ran, s.skipped,
                  s.failures.size(), store.path().c_str());
      for (const auto& f : s.failures) std::fprintf(stderr, "failed: %s\n", f.c_str());
      return s.failures.empty() ? 0 : 3;
    }
    if (*tokenize_cmd) {
      const auto topo = load_topology(tok_topology);
      TrajectoryStore store(tok_in);
      TrajectoryFilter filter;
      filter.topology = topo.name();
      const auto loaded = store.load(filter);
      NormStats norm = compute_norm_stats(loaded.trajectories);
      norm.target_multiplier = target_mult;
      save_norm_stats(store.norm_path(), norm);
      const auto out = tok_out.empty() ? output_root() / "tokens" : std::filesystem::path(tok_out);
      const auto s = export_tokens(loaded.trajectories, topo, norm, out);
      std::printf("exported=%zu skipped=%zu corrupt=%zu out=%s norm=%s\n", s.exported, s.skipped, loaded.corrupt,
                  out.c_str(), store.norm_path().c_str());
      return 0;
    }
    if (*enumerate) {
      const Scenario sc = make_scenario(en.scenario());
      const auto r = enumerate_scenario(sc, en.config(), bar(quiet));
      if (!enum_store.empty()) TrajectoryStore(enum_store).append(r.trajectories);
      const auto& best = r.trajectories[r.best];
      std::printf("assignments=%zu best=%zu assignment=", r.trajectories.size(), r.best);
      for (std::size_t i = 0; i < best.policy.assignment.size(); ++i) {
        std::printf("%s%u", i ? "," : "", best.policy.assignment[i]);
      }
      std::printf(" throughput=%.1f\n", best.throughput);
      return 0;
    }
    if (*evaluate) {
      const Scenario sc = make_scenario(ev.scenario());
      const std::string arg = eval_policy.rfind("file:", 0) == 0 || baseline_strategy_names().end() !=
                                                                         std::find(baseline_strategy_names().begin(),
                                                                                   baseline_strategy_names().end(),
                                                                                   eval_policy)
                                  ? eval_policy
                                  : "file:" + eval_policy;
      const auto policy = resolve_policy(arg, sc.topology, ev.slices, 1);
      TrajectoryStore store(eval_store.empty() ? default_store() : eval_store);
      const auto e = evaluate_policy(sc, policy, store, ev.config());
      if (!no_append) store.append(e.trajectory);
      std::printf("learned=%.1f best_baseline=%.1f (%s) ratio=%.4f %s\n", e.trajectory.throughput, e.best_baseline,
                  e.best_policy.c_str(), e.ratio, e.learned_wins ? "learned wins" : "baseline wins");
      if (do_assert && !(e.ratio >= min_ratio)) {
        std::fprintf(stderr, "FAIL: ratio %.4f < required %.4f\n", e.ratio, min_ratio);
        return 2;
      }
      return 0;
    }
    if (*report) {
      TrajectoryStore store(rep_store.empty() ? default_store() : rep_store);
      const auto loaded = store.load();
      const std::string csv = report_csv(build_report(loaded.trajectories));
      const auto out = rep_out.empty() ? output_root() / "report.csv" : std::filesystem::path(rep_out);
      if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
      std::ofstream f(out, std::ios::binary);
      if (!f) throw Error("cannot write " + out.string());
      f << csv;
      std::fputs(csv.c_str(), stdout);
      return 0;
    }
    if (*policy_cmd) {
      const auto topo = load_topology(pol_topology);
      save_policy_file(pol_out, resolve_policy(pol_strategy, topo, pol_slices, pol_seed));
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
