#include "numalab/snapshot.hpp"

#include <numeric>

#include "numalab/error.hpp"

namespace numalab {

const std::array<std::string_view, kCounterCount>& counter_names() {
  static const std::array<std::string_view, kCounterCount> names = {
      "clock_cycles",        "instructions",     "l1d_misses",           "l1i_misses",
      "llc_misses",          "branch_misses",    "memory_misses",        "dtlb_misses",
      "llc_write_misses",    "memory_write_misses", "memory_accesses",   "local_dram_loads",
      "remote_dram_loads",   "l3_miss_stall_cycles", "memory_stall_cycles", "executed_query_batches",
  };
  return names;
}

OffcoreStats OffcoreStats::zero(const NumaTopology& topology) {
  OffcoreStats s;
  s.nodes = topology.node_count();
  s.channel_bytes.resize(s.nodes);
  for (NodeId n = 0; n < s.nodes; ++n) s.channel_bytes[n].assign(topology.imc_channels(n), 0);
  s.link_bytes.assign(static_cast<std::size_t>(s.nodes) * s.nodes, 0);
  return s;
}

void OffcoreStats::add(const OffcoreStats& o) {
  if (o.nodes != nodes || o.channel_bytes.size() != channel_bytes.size()) throw Error("off-core shape mismatch");
  for (std::size_t n = 0; n < channel_bytes.size(); ++n) {
    if (o.channel_bytes[n].size() != channel_bytes[n].size()) throw Error("off-core channel shape mismatch");
    for (std::size_t c = 0; c < channel_bytes[n].size(); ++c) channel_bytes[n][c] += o.channel_bytes[n][c];
  }
  for (std::size_t i = 0; i < link_bytes.size(); ++i) link_bytes[i] += o.link_bytes[i];
}

std::uint64_t OffcoreStats::total_channel_bytes() const {
  std::uint64_t t = 0;
  for (const auto& node : channel_bytes) t = std::accumulate(node.begin(), node.end(), t);
  return t;
}

std::uint64_t OffcoreStats::total_link_bytes() const {
  return std::accumulate(link_bytes.begin(), link_bytes.end(), std::uint64_t{0});
}

std::uint64_t OffcoreStats::incoming(NodeId node) const {
  std::uint64_t t = 0;
  for (NodeId from = 0; from < nodes; ++from) t += link(from, node);
  return t;
}

std::uint64_t OffcoreStats::outgoing(NodeId node) const {
  std::uint64_t t = 0;
  for (NodeId to = 0; to < nodes; ++to) t += link(node, to);
  return t;
}

CounterRow HardwareSnapshot::totals() const {
  CounterRow t{};
  for (const auto& row : per_slice) t += row;
  return t;
}

nlohmann::json to_json(const OffcoreStats& s) {
  return nlohmann::json{{"nodes", s.nodes}, {"channel_bytes", s.channel_bytes}, {"link_bytes", s.link_bytes}};
}

OffcoreStats offcore_from_json(const nlohmann::json& j) {
  OffcoreStats s;
  s.nodes = j.at("nodes").get<std::uint32_t>();
  s.channel_bytes = j.at("channel_bytes").get<std::vector<std::vector<std::uint64_t>>>();
  s.link_bytes = j.at("link_bytes").get<std::vector<std::uint64_t>>();
  if (s.channel_bytes.size() != s.nodes || s.link_bytes.size() != static_cast<std::size_t>(s.nodes) * s.nodes) {
    throw Error("off-core statistics have inconsistent shape");
  }
  return s;
}

nlohmann::json to_json(const HardwareSnapshot& s) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : s.per_slice) rows.push_back(r);
  return nlohmann::json{
      {"per_slice_counters", std::move(rows)},
      {"offcore", to_json(s.offcore)},
      {"wall_time", s.wall_time},
      {"throughput", s.throughput},
      {"per_slice_throughput", s.per_slice_throughput},
      {"slice_queries", s.slice_queries},
      {"queries", s.queries},
      {"rounds", s.rounds},
  };
}

HardwareSnapshot snapshot_from_json(const nlohmann::json& j) {
  HardwareSnapshot s;
  for (const auto& r : j.at("per_slice_counters")) {
    const auto v = r.get<std::vector<std::uint64_t>>();
    if (v.size() != kCounterCount) throw Error("counter row has " + std::to_string(v.size()) + " entries");
    CounterRow row{};
    std::copy(v.begin(), v.end(), row.begin());
    s.per_slice.push_back(row);
  }
  s.offcore = offcore_from_json(j.at("offcore"));
  s.wall_time = j.at("wall_time").get<double>();
  s.throughput = j.at("throughput").get<double>();
  s.per_slice_throughput = j.at("per_slice_throughput").get<std::vector<double>>();
  s.slice_queries = j.at("slice_queries").get<std::vector<std::uint64_t>>();
  s.queries = j.at("queries").get<std::uint64_t>();
  s.rounds = j.at("rounds").get<std::uint32_t>();
  if (s.per_slice_throughput.size() != s.per_slice.size() || s.slice_queries.size() != s.per_slice.size()) {
    throw Error("snapshot slice vectors disagree in length");
  }
  return s;
}

}  // namespace numalab
