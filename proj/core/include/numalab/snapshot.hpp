#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "numalab/topology.hpp"

namespace numalab {

inline constexpr std::size_t kCounterCount = 16;

/// Synthesized per-core counters, in their fixed feature order.
enum class Counter : std::uint8_t {
  clock_cycles,
  instructions,
  l1d_misses,
  l1i_misses,
  llc_misses,
  branch_misses,
  memory_misses,
  dtlb_misses,
  llc_write_misses,
  memory_write_misses,
  memory_accesses,
  local_dram_loads,
  remote_dram_loads,
  l3_miss_stall_cycles,
  memory_stall_cycles,
  executed_query_batches,
};

using CounterRow = std::array<std::uint64_t, kCounterCount>;

const std::array<std::string_view, kCounterCount>& counter_names();

inline std::uint64_t& at(CounterRow& row, Counter c) { return row[static_cast<std::size_t>(c)]; }
inline std::uint64_t at(const CounterRow& row, Counter c) { return row[static_cast<std::size_t>(c)]; }

inline CounterRow& operator+=(CounterRow& a, const CounterRow& b) {
  for (std::size_t i = 0; i < kCounterCount; ++i) a[i] += b[i];
  return a;
}

/// System-wide off-core traffic.
struct OffcoreStats {
  std::vector<std::vector<std::uint64_t>> channel_bytes;  // [node][channel]
  std::vector<std::uint64_t> link_bytes;  // [from * nodes + to]: bytes served by `from` to cores on `to`
  std::uint32_t nodes = 0;

  static OffcoreStats zero(const NumaTopology& topology);

  void add(const OffcoreStats& other);
  std::uint64_t link(NodeId from, NodeId to) const { return link_bytes[from * nodes + to]; }
  std::uint64_t total_channel_bytes() const;
  std::uint64_t total_link_bytes() const;
  std::uint64_t incoming(NodeId node) const;
  std::uint64_t outgoing(NodeId node) const;
  friend bool operator==(const OffcoreStats&, const OffcoreStats&) = default;
};

/// Per-slice core counters plus off-core statistics of one run.
struct HardwareSnapshot {
  std::vector<CounterRow> per_slice;  // T x H
  OffcoreStats offcore;
  double wall_time = 0.0;   // simulated seconds
  double throughput = 0.0;  // queries per simulated second; exact sum of per_slice_throughput
  std::vector<double> per_slice_throughput;
  std::vector<std::uint64_t> slice_queries;
  std::uint64_t queries = 0;
  std::uint32_t rounds = 0;

  std::uint32_t slice_count() const { return static_cast<std::uint32_t>(per_slice.size()); }
  CounterRow totals() const;
  friend bool operator==(const HardwareSnapshot&, const HardwareSnapshot&) = default;
};

nlohmann::json to_json(const OffcoreStats& stats);
OffcoreStats offcore_from_json(const nlohmann::json& j);
nlohmann::json to_json(const HardwareSnapshot& snapshot);
HardwareSnapshot snapshot_from_json(const nlohmann::json& j);

}  // namespace numalab
