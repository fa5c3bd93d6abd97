#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "numalab/index.hpp"
#include "numalab/lru.hpp"
#include "numalab/policy.hpp"
#include "numalab/rng.hpp"
#include "numalab/snapshot.hpp"
#include "numalab/topology.hpp"
#include "numalab/trajectory.hpp"
#include "numalab/workload.hpp"

namespace numalab {

struct SimConfig {
  std::uint32_t profiling_granularity = 100;  // queries per profiled batch
  std::uint64_t sweep_interval = 10'000;      // queries per sweeping round

  // Cache model, in index nodes (L1, LLC) and pages (TLB).
  std::uint32_t l1_nodes = 12;
  std::uint32_t llc_nodes = 96;
  std::uint32_t tlb_entries = 24;
  std::uint32_t nodes_per_page = 1;
  std::uint32_t line_bytes = 64;
  double stream_line_factor = 0.25;  // cost of each further line of one node relative to the first

  // Instruction-cost constants.
  double query_overhead_ns = 60.0;
  double comparison_ns = 0.5;
  double tlb_miss_ns = 25.0;
  std::uint32_t inst_per_query = 120;
  std::uint32_t inst_per_node_visit = 40;
  std::uint32_t inst_per_comparison = 6;
  double branch_miss_fraction = 0.05;
  double l1i_miss_fraction = 0.01;  // of 16-instruction batches

  // Bandwidth contention: extra latency per DRAM line, linear in utilisation
  // above the threshold, equal to coeff x local DRAM latency at full load.
  double contention_coeff = 1.0;
  double contention_threshold = 0.5;

  std::uint64_t seed = 1;  // routing
  bool keep_query_log = false;

  /// Throws numalab::Error on unusable settings.
  void validate() const;
};

nlohmann::json to_json(const SimConfig& c);
SimConfig sim_config_from_json(const nlohmann::json& j);

/// One DRAM transfer of a single line.
struct DramUse {
  NodeId home = 0;
  std::uint32_t channel = 0;
  bool remote = false;
};

/// Counter deltas and time charged for one trace on one core.
struct Charge {
  CounterRow counters{};
  double time_ns = 0.0;
  std::vector<DramUse> dram;
};

/// Per-core L1 and TLB, per-node LLC, and line ownership, shared by all
/// queries of a simulation. Cache state evolves in arrival order only, so it
/// never depends on the timing model.
class CostModel {
 public:
  CostModel(const NumaTopology& topology, const SimConfig& config);

  /// Charges `trace` executed on `core` and updates the cache state.
  const Charge& synthesize(const AccessTrace& trace, CoreId core);

  const LruCache& l1(CoreId core) const { return l1_[core]; }
  const LruCache& llc(NodeId node) const { return llc_[node]; }

 private:
  void serve(const Access& a, CoreId core, double& mem_ns, double& dram_ns);
  void ensure(IndexNodeId id);
  void insert_l1(CoreId core, IndexNodeId id);
  void insert_llc(NodeId node, IndexNodeId id);
  void invalidate_others(CoreId core, IndexNodeId id);

  const NumaTopology* topo_;
  SimConfig cfg_;
  std::vector<LruCache> l1_;
  std::vector<LruCache> llc_;
  std::vector<LruCache> tlb_;
  std::size_t core_words_;
  std::size_t node_words_;
  std::vector<std::uint64_t> l1_holders_;   // per index node, bitset over cores
  std::vector<std::uint64_t> llc_holders_;  // per index node, bitset over NUMA nodes
  std::vector<std::uint32_t> owner_;        // dirty owner core + 1, 0 when clean
  Charge charge_;
};

/// Chooses the executing core of each query.
class Router {
 public:
  Router(const NumaTopology& topology, const SchedulePolicy& policy, std::uint64_t seed);

  struct Decision {
    CoreId core = 0;
    SliceId slice = 0;  // slice the query's counters are attributed to
    CoreId router = 0;
  };

  /// `slices` must be non-empty (as returned by SlicedIndex::slices_of).
  Decision route(const std::vector<SliceId>& slices, std::uint64_t arrival);

 private:
  const NumaTopology* topo_;
  SchedulePolicy policy_;
  Rng rng_;
};

struct SliceDelta {
  SliceId slice = 0;
  CoreId core = 0;
  CounterRow counters{};
};

/// Worker counter deltas harvested by the core sweeper in one round.
struct CoreSweep {
  std::uint32_t round = 0;
  std::vector<SliceDelta> deltas;
};

/// Off-core deltas harvested in one round.
struct OffcoreSweep {
  std::uint32_t round = 0;
  OffcoreStats stats;
};

/// Merges sweeping rounds into per-slice counters and off-core totals. Rounds
/// past the shorter of the two streams are dropped with a warning.
HardwareSnapshot stitch(const std::vector<CoreSweep>& core, const std::vector<OffcoreSweep>& offcore,
                        std::uint32_t slice_count, const NumaTopology& topology);

struct SimOutcome {
  HardwareSnapshot snapshot;
  std::vector<CoreSweep> core_sweeps;
  std::vector<OffcoreSweep> offcore_sweeps;
  std::vector<SliceDelta> query_log;        // unbatched per-query and per-round charges
  std::vector<std::uint64_t> round_wall_ns;
  std::vector<std::uint32_t> migrations_per_round;  // migratory scans applied before each round
};

struct EnforcementReport {
  std::vector<SliceId> changed_slices;
  std::size_t scans_planned = 0;
};

/// A running index service: router tables, index placement and warm caches
/// persist across calls, so a policy can be enforced between two runs.
class System {
 public:
  System(const NumaTopology& topology, SlicedIndex index, SimConfig config = {});

  /// Lays the index out for `policy` at build time (no migration traffic).
  void install(const SchedulePolicy& policy);

  /// Switches routing immediately and migrates every slice whose home node
  /// changes. Aggressive migrations run before the next round; lazy ones run
  /// one sub-range per changed slice per round.
  EnforcementReport enforce(const SchedulePolicy& policy, MigrationMode mode, std::uint32_t lazy_steps = 4);

  /// Applies every queued migratory scan now without charging it to a run.
  void drain_migrations();
  bool migrations_pending() const { return !pending_.empty(); }

  SimOutcome run(const std::vector<Query>& queries);

  const SlicedIndex& index() const { return index_; }
  const SchedulePolicy& policy() const { return policy_; }
  const SimConfig& config() const { return cfg_; }

 private:
  struct PendingMigration {
    std::vector<MigrationStep> steps;
    std::size_t next = 0;
    CoreId exec_core = 0;
  };

  CoreId migration_core(SliceId slice, NodeId dest) const;

  const NumaTopology* topo_;
  SlicedIndex index_;
  SimConfig cfg_;
  SchedulePolicy policy_;
  bool installed_ = false;
  CostModel cost_;
  std::uint64_t runs_ = 0;
  MigrationMode pending_mode_ = MigrationMode::aggressive;
  std::vector<PendingMigration> pending_;
};

/// Builds a fresh system, lays the index out for `policy` and runs the stream.
SimOutcome simulate(const NumaTopology& topology, const SlicedIndex& index, const SchedulePolicy& policy,
                    const std::vector<Query>& queries, const SimConfig& config = {});

/// simulate() packaged as a dataset trajectory.
Trajectory run_simulation(const NumaTopology& topology, const SlicedIndex& index, const SchedulePolicy& policy,
                          const std::vector<Query>& queries, const SimConfig& config, TrajectoryContext context);

}  // namespace numalab
