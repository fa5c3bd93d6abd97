#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "numalab/dataset.hpp"
#include "numalab/index.hpp"
#include "numalab/policy.hpp"
#include "numalab/simulator.hpp"
#include "numalab/topology.hpp"
#include "numalab/workload.hpp"

namespace numalab {

/// Everything one simulation needs, built from CLI-level names.
struct Scenario {
  NumaTopology topology;
  WorkloadSpec workload;
  SlicedIndex index;
  std::vector<Query> queries;

  TrajectoryContext context(std::uint64_t policy_seed, bool learned = false) const;
};

struct ScenarioOptions {
  std::string topology = "tiny-2n4c";
  std::string workload = "rw50";
  std::optional<IndexKind> index;           // overrides the workload's index kind
  std::uint32_t slices = 256;
  std::optional<std::uint64_t> seed;        // overrides the query-stream seed
  std::optional<std::uint64_t> queries;     // overrides the query count
  std::optional<std::uint64_t> records;     // overrides the record count
};

Scenario make_scenario(const ScenarioOptions& opts);

struct ExperimentPlan {
  std::vector<std::string> topologies;
  std::vector<std::string> workloads;
  std::optional<IndexKind> index;
  std::vector<std::string> policies;  // baseline strategy names
  std::uint32_t repetitions = 1;
  std::uint64_t seed = 1;
  std::uint32_t slices = 256;
  std::optional<std::uint64_t> queries;
  std::optional<std::uint64_t> records;
  std::uint32_t random_policies = 0;  // extra distinct SN:T-Random assignments per (topology, workload)
  SimConfig sim;

  /// Throws numalab::Error on an empty cross-product or unknown names.
  void validate() const;

  /// Query-stream and policy seed of repetition `rep`; distinct per repetition.
  std::uint64_t repetition_seed(std::uint32_t rep) const { return seed + rep; }
};

struct CollectSummary {
  std::size_t cells = 0;
  std::size_t ran = 0;
  std::size_t skipped = 0;  // already in the store
  std::vector<std::string> failures;
};

using Progress = std::function<void(std::size_t done, std::size_t total, const std::string& label)>;

/// Runs every (topology, workload, policy, repetition) cell missing from
/// `store`, appending each trajectory as it completes. Cell failures are
/// recorded and the run continues.
CollectSummary collect(const ExperimentPlan& plan, TrajectoryStore& store, const Progress& progress = {});

/// All W^T SN:T assignments over the workers of `topology`; throws when
/// there are more than `limit`.
std::vector<std::vector<CoreId>> enumerate_assignments(const NumaTopology& topology, std::uint32_t slices,
                                                       std::size_t limit = 1'000'000);

struct EnumerationResult {
  std::vector<Trajectory> trajectories;  // in enumeration order
  std::size_t best = 0;                  // first index of the maximum throughput
};

EnumerationResult enumerate_scenario(const Scenario& scenario, const SimConfig& config = {},
                                     const Progress& progress = {});

struct ReportRow {
  std::string context;
  std::string policy;
  bool learned = false;
  std::size_t runs = 0;
  double throughput = 0.0;  // mean over runs
  double normalized = 0.0;  // throughput / best non-learned throughput of the context
  bool learned_wins = false;
};

/// One row per (context, policy label), normalized to the best non-learned
/// policy of the context. Contexts without a baseline are omitted.
std::vector<ReportRow> build_report(const std::vector<Trajectory>& trajectories);
std::string report_csv(const std::vector<ReportRow>& rows);

struct Evaluation {
  Trajectory trajectory;
  double best_baseline = 0.0;
  std::string best_policy;
  double ratio = 0.0;
  bool learned_wins = false;
};

/// Simulates `policy` as a learned schedule in the scenario's context and
/// compares it with the stored baselines of that context. Throws when the
/// store has no baseline for the context.
Evaluation evaluate_policy(const Scenario& scenario, const SchedulePolicy& policy, const TrajectoryStore& store,
                           const SimConfig& config = {});

/// Output root: $NUMALAB_OUT, or `numalab-out` in the working directory.
std::filesystem::path output_root();

}  // namespace numalab
