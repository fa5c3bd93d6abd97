#include "numalab/simulator.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "numalab/error.hpp"

namespace numalab {

void SimConfig::validate() const {
  if (profiling_granularity == 0) throw Error("profiling granularity must be at least 1");
  if (sweep_interval == 0) throw Error("sweep interval must be at least 1 query");
  if (line_bytes == 0) throw Error("line size must be positive");
  if (nodes_per_page == 0) throw Error("nodes_per_page must be positive");
  if (query_overhead_ns <= 0.0) throw Error("query overhead must be positive");
  if (comparison_ns < 0.0 || tlb_miss_ns < 0.0 || stream_line_factor < 0.0) throw Error("negative cost constant");
  if (branch_miss_fraction < 0.0 || branch_miss_fraction > 1.0 || l1i_miss_fraction < 0.0 || l1i_miss_fraction > 1.0) {
    throw Error("miss fractions must lie in [0, 1]");
  }
  if (contention_coeff < 0.0) throw Error("contention coefficient must be non-negative");
  if (contention_threshold < 0.0 || contention_threshold >= 1.0) throw Error("contention threshold must lie in [0, 1)");
}

nlohmann::json to_json(const SimConfig& c) {
  return nlohmann::json{
      {"profiling_granularity", c.profiling_granularity},
      {"sweep_interval", c.sweep_interval},
      {"l1_nodes", c.l1_nodes},
      {"llc_nodes", c.llc_nodes},
      {"tlb_entries", c.tlb_entries},
      {"nodes_per_page", c.nodes_per_page},
      {"line_bytes", c.line_bytes},
      {"stream_line_factor", c.stream_line_factor},
      {"query_overhead_ns", c.query_overhead_ns},
      {"comparison_ns", c.comparison_ns},
      {"tlb_miss_ns", c.tlb_miss_ns},
      {"inst_per_query", c.inst_per_query},
      {"inst_per_node_visit", c.inst_per_node_visit},
      {"inst_per_comparison", c.inst_per_comparison},
      {"branch_miss_fraction", c.branch_miss_fraction},
      {"l1i_miss_fraction", c.l1i_miss_fraction},
      {"contention_coeff", c.contention_coeff},
      {"contention_threshold", c.contention_threshold},
      {"seed", c.seed},
  };
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig c;
  c.profiling_granularity = j.value("profiling_granularity", c.profiling_granularity);
  c.sweep_interval = j.value("sweep_interval", c.sweep_interval);
  c.l1_nodes = j.value("l1_nodes", c.l1_nodes);
  c.llc_nodes = j.value("llc_nodes", c.llc_nodes);
  c.tlb_entries = j.value("tlb_entries", c.tlb_entries);
  c.nodes_per_page = j.value("nodes_per_page", c.nodes_per_page);
  c.line_bytes = j.value("line_bytes", c.line_bytes);
  c.stream_line_factor = j.value("stream_line_factor", c.stream_line_factor);
  c.query_overhead_ns = j.value("query_overhead_ns", c.query_overhead_ns);
  c.comparison_ns = j.value("comparison_ns", c.comparison_ns);
  c.tlb_miss_ns = j.value("tlb_miss_ns", c.tlb_miss_ns);
  c.inst_per_query = j.value("inst_per_query", c.inst_per_query);
  c.inst_per_node_visit = j.value("inst_per_node_visit", c.inst_per_node_visit);
  c.inst_per_comparison = j.value("inst_per_comparison", c.inst_per_comparison);
  c.branch_miss_fraction = j.value("branch_miss_fraction", c.branch_miss_fraction);
  c.l1i_miss_fraction = j.value("l1i_miss_fraction", c.l1i_miss_fraction);
  c.contention_coeff = j.value("contention_coeff", c.contention_coeff);
  c.contention_threshold = j.value("contention_threshold", c.contention_threshold);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Cost model

namespace {

bool test_bit(const std::vector<std::uint64_t>& bits, std::size_t base, std::size_t i) {
  return (bits[base + i / 64] >> (i % 64)) & 1U;
}
void set_bit(std::vector<std::uint64_t>& bits, std::size_t base, std::size_t i) {
  bits[base + i / 64] |= std::uint64_t{1} << (i % 64);
}
void clear_bit(std::vector<std::uint64_t>& bits, std::size_t base, std::size_t i) {
  bits[base + i / 64] &= ~(std::uint64_t{1} << (i % 64));
}

std::uint64_t cycles(double ns, double ghz) { return static_cast<std::uint64_t>(std::llround(ns * ghz)); }

}  // namespace

CostModel::CostModel(const NumaTopology& topology, const SimConfig& config)
    : topo_(&topology),
      cfg_(config),
      core_words_((topology.core_count() + 63) / 64),
      node_words_((topology.node_count() + 63) / 64) {
  l1_.assign(topology.core_count(), LruCache(config.l1_nodes));
  tlb_.assign(topology.core_count(), LruCache(config.tlb_entries));
  llc_.assign(topology.node_count(), LruCache(config.llc_nodes));
}

void CostModel::ensure(IndexNodeId id) {
  if (id < owner_.size()) return;
  const std::size_t n = std::max<std::size_t>(id + 1, owner_.size() * 2);
  owner_.resize(n, 0);
  l1_holders_.resize(n * core_words_, 0);
  llc_holders_.resize(n * node_words_, 0);
}

void CostModel::insert_l1(CoreId core, IndexNodeId id) {
  const auto probe = l1_[core].access(id);
  if (probe.evicted) {
    const IndexNodeId e = *probe.evicted;
    clear_bit(l1_holders_, e * core_words_, core);
    if (owner_[e] == core + 1) owner_[e] = 0;  // written back
  }
  set_bit(l1_holders_, id * core_words_, core);
}

void CostModel::insert_llc(NodeId node, IndexNodeId id) {
  const auto probe = llc_[node].access(id);
  if (probe.evicted) clear_bit(llc_holders_, *probe.evicted * node_words_, node);
  set_bit(llc_holders_, id * node_words_, node);
}

void CostModel::invalidate_others(CoreId core, IndexNodeId id) {
  const NodeId home_node = topo_->node_of(core);
  for (CoreId c = 0; c < topo_->core_count(); ++c) {
    if (c != core && test_bit(l1_holders_, id * core_words_, c)) {
      l1_[c].erase(id);
      clear_bit(l1_holders_, id * core_words_, c);
    }
  }
  for (NodeId n = 0; n < topo_->node_count(); ++n) {
    if (n != home_node && test_bit(llc_holders_, id * node_words_, n)) {
      llc_[n].erase(id);
      clear_bit(llc_holders_, id * node_words_, n);
    }
  }
}

void CostModel::serve(const Access& a, CoreId core, double& mem_ns, double& dram_ns) {
  ensure(a.node);
  const NodeId node = topo_->node_of(core);
  const std::uint64_t lines = std::max<std::uint64_t>(1, (a.bytes + cfg_.line_bytes - 1) / cfg_.line_bytes);
  // Dependent probes pay full latency per line; streamed lines overlap.
  const double stretch =
      a.sequential ? 1.0 + static_cast<double>(lines - 1) * cfg_.stream_line_factor : static_cast<double>(lines);
  const bool write = a.kind == AccessKind::write;
  CounterRow& k = charge_.counters;

  if (l1_[core].contains(a.node)) {
    l1_[core].access(a.node);
    charge_.time_ns += topo_->l1_ns() * stretch;
  } else {
    at(k, Counter::l1d_misses) += lines;
    const std::uint32_t owner = owner_[a.node];
    double cost = 0.0;
    if (owner != 0 && owner - 1 != core) {
      // Dirty in another core's cache: cache-to-cache transfer.
      cost = topo_->core_latency(owner - 1, core) * stretch;
      owner_[a.node] = 0;
    } else if (llc_[node].contains(a.node)) {
      llc_[node].access(a.node);
      cost = topo_->llc_ns() * stretch;
    } else {
      cost = topo_->dram_latency(core, a.home) * stretch;
      dram_ns += cost;
      const bool remote = a.home != node;
      at(k, Counter::memory_accesses) += lines;
      if (write) {
        at(k, Counter::llc_write_misses) += lines;
        if (remote) at(k, Counter::memory_write_misses) += lines;
      } else {
        at(k, Counter::llc_misses) += lines;
        at(k, remote ? Counter::remote_dram_loads : Counter::local_dram_loads) += lines;
      }
      if (remote) at(k, Counter::memory_misses) += lines;
      const std::uint32_t channels = topo_->imc_channels(a.home);
      for (std::uint64_t i = 0; i < lines; ++i) {
        charge_.dram.push_back(DramUse{a.home, static_cast<std::uint32_t>((a.node + i) % channels), remote});
      }
    }
    mem_ns += cost;
    charge_.time_ns += cost;
    insert_llc(node, a.node);
    insert_l1(core, a.node);
  }
  if (write) {
    invalidate_others(core, a.node);
    owner_[a.node] = core + 1;
  }
}

const Charge& CostModel::synthesize(const AccessTrace& trace, CoreId core) {
  charge_.counters = CounterRow{};
  charge_.time_ns = 0.0;
  charge_.dram.clear();
  double mem_ns = 0.0;
  double dram_ns = 0.0;
  CounterRow& k = charge_.counters;
  for (const Access& a : trace.accesses) {
    const std::uint32_t page = a.node / cfg_.nodes_per_page;
    if (!tlb_[core].access(page).hit) {
      ++at(k, Counter::dtlb_misses);
      charge_.time_ns += cfg_.tlb_miss_ns;
      mem_ns += cfg_.tlb_miss_ns;
    }
    serve(a, core, mem_ns, dram_ns);
  }
  charge_.time_ns += cfg_.query_overhead_ns + static_cast<double>(trace.comparisons) * cfg_.comparison_ns;

  const std::uint64_t instructions = cfg_.inst_per_query +
                                     std::uint64_t{cfg_.inst_per_node_visit} * trace.accesses.size() +
                                     std::uint64_t{cfg_.inst_per_comparison} * trace.comparisons;
  const double ghz = topo_->frequency_ghz();
  at(k, Counter::clock_cycles) = cycles(charge_.time_ns, ghz);
  at(k, Counter::instructions) = instructions;
  at(k, Counter::l1i_misses) =
      static_cast<std::uint64_t>(std::llround(static_cast<double>(instructions) / 16.0 * cfg_.l1i_miss_fraction));
  at(k, Counter::branch_misses) =
      static_cast<std::uint64_t>(std::llround(static_cast<double>(trace.comparisons) * cfg_.branch_miss_fraction));
  at(k, Counter::l3_miss_stall_cycles) = cycles(dram_ns, ghz);
  at(k, Counter::memory_stall_cycles) = cycles(mem_ns, ghz);
  return charge_;
}

// ---------------------------------------------------------------------------
// Routing

Router::Router(const NumaTopology& topology, const SchedulePolicy& policy, std::uint64_t seed)
    : topo_(&topology), policy_(policy), rng_(mix_seed(seed, 0x7011)) {}

Router::Decision Router::route(const std::vector<SliceId>& slices, std::uint64_t arrival) {
  if (slices.empty()) throw Error("query touches no slice");
  Decision d;
  d.slice = slices.size() == 1 ? slices.front() : slices[uniform_index(rng_, slices.size())];
  switch (policy_.kind) {
    case PolicyKind::sn_thread:
      if (d.slice >= policy_.assignment.size()) throw Error("unassigned slice " + std::to_string(d.slice));
      d.core = policy_.assignment[d.slice];
      break;
    case PolicyKind::sn_numa: {
      if (d.slice >= policy_.placement.size()) throw Error("unplaced slice " + std::to_string(d.slice));
      const auto& ws = topo_->workers_on(policy_.placement[d.slice]);
      d.core = ws[uniform_index(rng_, ws.size())];
      break;
    }
    default: {
      const auto& ws = topo_->workers();
      d.core = ws[uniform_index(rng_, ws.size())];
      break;
    }
  }
  const auto& routers = topo_->routers();
  d.router = routers.empty() ? d.core : routers[arrival % routers.size()];
  return d;
}

// ---------------------------------------------------------------------------
// Stitching

HardwareSnapshot stitch(const std::vector<CoreSweep>& core, const std::vector<OffcoreSweep>& offcore,
                        std::uint32_t slice_count, const NumaTopology& topology) {
  const std::size_t rounds = std::min(core.size(), offcore.size());
  if (rounds == 0) throw Error("stitching needs at least one completed sweeping round");
  if (core.size() != offcore.size()) {
    spdlog::warn("stitch: {} core rounds vs {} off-core rounds; using the first {}", core.size(), offcore.size(),
                 rounds);
  }
  HardwareSnapshot snap;
  snap.per_slice.assign(slice_count, CounterRow{});
  snap.offcore = OffcoreStats::zero(topology);
  for (std::size_t r = 0; r < rounds; ++r) {
    for (const auto& d : core[r].deltas) {
      if (d.slice >= slice_count) throw Error("sweep delta names unknown slice " + std::to_string(d.slice));
      snap.per_slice[d.slice] += d.counters;
    }
    snap.offcore.add(offcore[r].stats);
  }
  snap.rounds = static_cast<std::uint32_t>(rounds);
  return snap;
}

// ---------------------------------------------------------------------------
// System

System::System(const NumaTopology& topology, SlicedIndex index, SimConfig config)
    : topo_(&topology), index_(std::move(index)), cfg_(config), cost_(topology, config) {
  cfg_.validate();
}

void System::install(const SchedulePolicy& policy) {
  const std::uint32_t t = index_.slice_count();
  require_valid(policy, *topo_, t);
  const std::uint32_t nodes = topo_->node_count();
  switch (policy.kind) {
    case PolicyKind::os_default:
      index_.apply_placement(PlacementMode::first_touch, nodes, topo_->node_of(topo_->workers().front()));
      break;
    case PolicyKind::os_interleave: index_.apply_placement(PlacementMode::interleave, nodes); break;
    default: index_.apply_placement(PlacementMode::slice_home, nodes, 0, slice_homes(policy, *topo_)); break;
  }
  for (SliceId s = 0; s < t; ++s) {
    index_.assign_core(s, policy.kind == PolicyKind::sn_thread ? std::optional<CoreId>(policy.assignment[s])
                                                                : std::nullopt);
  }
  policy_ = policy;
  installed_ = true;
  pending_.clear();
}

CoreId System::migration_core(SliceId slice, NodeId dest) const {
  if (policy_.kind == PolicyKind::sn_thread) return policy_.assignment[slice];
  return topo_->workers_on(dest).front();
}

EnforcementReport System::enforce(const SchedulePolicy& policy, MigrationMode mode, std::uint32_t lazy_steps) {
  const std::uint32_t t = index_.slice_count();
  require_valid(policy, *topo_, t);
  EnforcementReport report;
  if (!policy.slice_based()) {
    // OS layouts have no slice directory to migrate through.
    install(policy);
    for (SliceId s = 0; s < t; ++s) report.changed_slices.push_back(s);
    return report;
  }
  drain_migrations();
  const auto homes = slice_homes(policy, *topo_);
  const bool sliced = installed_ && index_.placement_mode() == PlacementMode::slice_home;
  for (SliceId s = 0; s < t; ++s) {
    if (!sliced || index_.slice(s).home_node != homes[s]) report.changed_slices.push_back(s);
  }
  policy_ = policy;
  installed_ = true;
  pending_mode_ = mode;
  index_.begin_migration_epoch();
  index_.set_allocation_mode(PlacementMode::slice_home, topo_->node_count());
  for (SliceId s : report.changed_slices) {
    PendingMigration m;
    m.steps = index_.plan_migration(s, homes[s], mode, lazy_steps);
    m.exec_core = migration_core(s, homes[s]);
    report.scans_planned += m.steps.size();
    pending_.push_back(std::move(m));
  }
  for (SliceId s = 0; s < t; ++s) {
    index_.assign_core(s, policy.kind == PolicyKind::sn_thread ? std::optional<CoreId>(policy.assignment[s])
                                                                : std::nullopt);
  }
  return report;
}

void System::drain_migrations() {
  for (auto& m : pending_) {
    for (; m.next < m.steps.size(); ++m.next) index_.apply_migration_step(m.steps[m.next]);
  }
  pending_.clear();
}

namespace {

struct Pending {
  CounterRow counters{};
  std::uint32_t queries = 0;
  bool dirty = false;
};

}  // namespace

SimOutcome System::run(const std::vector<Query>& queries) {
  if (!installed_) throw Error("no policy installed");
  if (queries.empty()) throw Error("empty workload");

  const NumaTopology& topo = *topo_;
  const std::uint32_t t = index_.slice_count();
  const std::uint32_t cores = topo.core_count();
  const std::uint32_t nodes = topo.node_count();
  const double ghz = topo.frequency_ghz();

  std::vector<std::uint32_t> chan_offset(nodes + 1, 0);
  for (NodeId n = 0; n < nodes; ++n) chan_offset[n + 1] = chan_offset[n] + topo.imc_channels(n);
  const std::uint32_t channels = chan_offset[nodes];
  std::vector<double> local_dram(nodes);
  for (NodeId n = 0; n < nodes; ++n) local_dram[n] = topo.dram_latency(n * topo.cores_per_node(), n);

  Router router(topo, policy_, mix_seed(cfg_.seed, runs_++));
  SimOutcome out;
  std::vector<Pending> pending(static_cast<std::size_t>(cores) * t);
  std::vector<std::uint64_t> slice_queries(t, 0);

  // Per-round accumulators.
  std::vector<double> busy(cores);
  std::vector<std::uint64_t> dram_ch(static_cast<std::size_t>(cores) * channels);
  std::vector<std::uint64_t> dram_link(static_cast<std::size_t>(cores) * nodes);  // by home node
  std::vector<std::uint64_t> dram_ws(static_cast<std::size_t>(cores) * t);
  std::vector<std::uint64_t> dram_w(cores);
  std::vector<std::uint64_t> chan_bytes(channels);
  std::vector<std::uint64_t> link_bytes(static_cast<std::size_t>(nodes) * nodes);

  const auto flush = [&](std::uint32_t w, SliceId s, CoreSweep& sweep) {
    Pending& p = pending[static_cast<std::size_t>(w) * t + s];
    if (!p.dirty) return;
    SliceDelta d{s, w, p.counters};
    if (p.queries > 0) at(d.counters, Counter::executed_query_batches) += 1;
    sweep.deltas.push_back(d);
    p = Pending{};
  };

  const auto charge = [&](const Charge& c, CoreId w, SliceId s, bool is_query, double extra_ns, std::uint32_t round,
                          CoreSweep& sweep) {
    Pending& p = pending[static_cast<std::size_t>(w) * t + s];
    CounterRow row = c.counters;
    if (extra_ns > 0.0) {
      at(row, Counter::clock_cycles) = cycles(c.time_ns + extra_ns, ghz);
    }
    p.counters += row;
    p.dirty = true;
    busy[w] += c.time_ns + extra_ns;
    const NodeId wn = topo.node_of(w);
    for (const DramUse& u : c.dram) {
      ++dram_ch[static_cast<std::size_t>(w) * channels + chan_offset[u.home] + u.channel];
      chan_bytes[chan_offset[u.home] + u.channel] += cfg_.line_bytes;
      if (u.remote) {
        ++dram_link[static_cast<std::size_t>(w) * nodes + u.home];
        link_bytes[static_cast<std::size_t>(u.home) * nodes + wn] += cfg_.line_bytes;
      }
    }
    dram_ws[static_cast<std::size_t>(w) * t + s] += c.dram.size();
    dram_w[w] += c.dram.size();
    if (cfg_.keep_query_log) out.query_log.push_back(SliceDelta{s, w, row});
    if (is_query && ++p.queries == cfg_.profiling_granularity) flush(w, s, sweep);
    (void)round;
  };

  const std::uint64_t n = queries.size();
  const auto rounds = static_cast<std::uint32_t>((n + cfg_.sweep_interval - 1) / cfg_.sweep_interval);
  double wall = 0.0;

  for (std::uint32_t r = 0; r < rounds; ++r) {
    std::fill(busy.begin(), busy.end(), 0.0);
    std::fill(dram_ch.begin(), dram_ch.end(), 0);
    std::fill(dram_link.begin(), dram_link.end(), 0);
    std::fill(dram_ws.begin(), dram_ws.end(), 0);
    std::fill(dram_w.begin(), dram_w.end(), 0);
    std::fill(chan_bytes.begin(), chan_bytes.end(), 0);
    std::fill(link_bytes.begin(), link_bytes.end(), 0);
    CoreSweep sweep;
    sweep.round = r;

    // Migratory scans queued by enforcement.
    std::uint32_t scans = 0;
    for (auto& m : pending_) {
      const std::size_t budget = pending_mode_ == MigrationMode::aggressive ? m.steps.size() : 1;
      for (std::size_t i = 0; i < budget && m.next < m.steps.size(); ++i, ++m.next) {
        const MigrationStep& step = m.steps[m.next];
        const AccessTrace trace = index_.apply_migration_step(step);
        ++scans;
        if (trace.accesses.empty()) continue;
        charge(cost_.synthesize(trace, m.exec_core), m.exec_core, step.slice, false, 0.0, r, sweep);
      }
    }
    std::erase_if(pending_, [](const PendingMigration& m) { return m.next >= m.steps.size(); });
    out.migrations_per_round.push_back(scans);

    const std::uint64_t begin = static_cast<std::uint64_t>(r) * cfg_.sweep_interval;
    const std::uint64_t end = std::min(n, begin + cfg_.sweep_interval);
    for (std::uint64_t i = begin; i < end; ++i) {
      const Query& q = queries[i];
      const auto decision = router.route(index_.slices_of(q), i);
      const AccessTrace trace = index_.execute(q, topo.node_of(decision.core));
      const double dispatch = topo.core_latency(decision.router, decision.core);
      ++slice_queries[decision.slice];
      charge(cost_.synthesize(trace, decision.core), decision.core, decision.slice, true, dispatch, r, sweep);
    }

    // Round length R solves R = max_w busy_w(R): contention penalties fall as
    // the round stretches, so the fixed point is unique.
    std::vector<double> pen_ch(channels, 0.0);
    std::vector<double> pen_link(static_cast<std::size_t>(nodes) * nodes, 0.0);
    const double th = cfg_.contention_threshold;
    const auto busy_at = [&](double round_s, std::vector<double>* per_worker) {
      for (NodeId h = 0; h < nodes; ++h) {
        for (std::uint32_t c = chan_offset[h]; c < chan_offset[h + 1]; ++c) {
          const double u = static_cast<double>(chan_bytes[c]) / (topo.channel_bandwidth() * round_s);
          pen_ch[c] = cfg_.contention_coeff * local_dram[h] * std::max(0.0, u - th) / (1.0 - th);
        }
        for (NodeId m = 0; m < nodes; ++m) {
          const std::size_t l = static_cast<std::size_t>(h) * nodes + m;
          const double cap = topo.interconnect_capacity(h, m);
          const double u = cap > 0.0 ? static_cast<double>(link_bytes[l]) / (cap * round_s) : 0.0;
          pen_link[l] = cfg_.contention_coeff * local_dram[h] * std::max(0.0, u - th) / (1.0 - th);
        }
      }
      double worst = 0.0;
      for (CoreId w : topo.workers()) {
        double b = busy[w];
        if (dram_w[w] > 0) {
          const NodeId wn = topo.node_of(w);
          for (std::uint32_t c = 0; c < channels; ++c) {
            b += static_cast<double>(dram_ch[static_cast<std::size_t>(w) * channels + c]) * pen_ch[c];
          }
          for (NodeId h = 0; h < nodes; ++h) {
            b += static_cast<double>(dram_link[static_cast<std::size_t>(w) * nodes + h]) *
                 pen_link[static_cast<std::size_t>(h) * nodes + wn];
          }
        }
        if (per_worker != nullptr) (*per_worker)[w] = b - busy[w];
        worst = std::max(worst, b);
      }
      return worst * 1e-9;
    };

    double lo = 0.0;
    for (CoreId w : topo.workers()) lo = std::max(lo, busy[w] * 1e-9);
    double round_s = lo;
    if (lo > 0.0 && busy_at(lo, nullptr) > lo) {
      double hi = lo * 2.0;
      while (busy_at(hi, nullptr) > hi) hi *= 2.0;
      for (int it = 0; it < 200 && hi - lo > hi * 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (busy_at(mid, nullptr) > mid) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      round_s = hi;
    }
    std::vector<double> penalty(cores, 0.0);
    if (round_s > 0.0) busy_at(round_s, &penalty);

    // Penalty cycles go to slices in proportion to their DRAM exposure.
    for (CoreId w : topo.workers()) {
      if (penalty[w] <= 0.0 || dram_w[w] == 0) continue;
      for (SliceId s = 0; s < t; ++s) {
        const std::uint64_t e = dram_ws[static_cast<std::size_t>(w) * t + s];
        if (e == 0) continue;
        const std::uint64_t pc = cycles(penalty[w] * static_cast<double>(e) / static_cast<double>(dram_w[w]), ghz);
        if (pc == 0) continue;
        CounterRow row{};
        at(row, Counter::clock_cycles) = pc;
        at(row, Counter::l3_miss_stall_cycles) = pc;
        at(row, Counter::memory_stall_cycles) = pc;
        Pending& p = pending[static_cast<std::size_t>(w) * t + s];
        p.counters += row;
        p.dirty = true;
        if (cfg_.keep_query_log) out.query_log.push_back(SliceDelta{s, w, row});
      }
    }

    if (r + 1 == rounds) {
      for (CoreId w = 0; w < cores; ++w) {
        for (SliceId s = 0; s < t; ++s) flush(w, s, sweep);
      }
    }

    OffcoreSweep off;
    off.round = r;
    off.stats = OffcoreStats::zero(topo);
    for (NodeId h = 0; h < nodes; ++h) {
      for (std::uint32_t c = 0; c < topo.imc_channels(h); ++c) off.stats.channel_bytes[h][c] = chan_bytes[chan_offset[h] + c];
    }
    off.stats.link_bytes = link_bytes;
    out.core_sweeps.push_back(std::move(sweep));
    out.offcore_sweeps.push_back(std::move(off));
    out.round_wall_ns.push_back(round_s * 1e9);
    wall += round_s;
  }

  out.snapshot = stitch(out.core_sweeps, out.offcore_sweeps, t, topo);
  HardwareSnapshot& snap = out.snapshot;
  snap.wall_time = wall;
  snap.queries = n;
  snap.slice_queries = slice_queries;
  snap.per_slice_throughput.resize(t);
  snap.throughput = 0.0;
  for (SliceId s = 0; s < t; ++s) {
    snap.per_slice_throughput[s] = static_cast<double>(slice_queries[s]) / wall;
    snap.throughput += snap.per_slice_throughput[s];
  }
  return out;
}

SimOutcome simulate(const NumaTopology& topology, const SlicedIndex& index, const SchedulePolicy& policy,
                    const std::vector<Query>& queries, const SimConfig& config) {
  System sys(topology, index, config);
  sys.install(policy);
  return sys.run(queries);
}

Trajectory run_simulation(const NumaTopology& topology, const SlicedIndex& index, const SchedulePolicy& policy,
                          const std::vector<Query>& queries, const SimConfig& config, TrajectoryContext context) {
  Trajectory tr;
  tr.snapshot = simulate(topology, index, policy, queries, config).snapshot;
  context.slices = index.slice_count();
  context.index = std::string(to_string(index.kind()));
  context.queries = queries.size();
  tr.context = std::move(context);
  tr.policy = policy;
  tr.throughput = tr.snapshot.throughput;
  tr.id = trajectory_id(tr.context, tr.policy);
  return tr;
}

}  // namespace numalab
