#include "numalab/policy.hpp"

#include <fstream>

#include "numalab/error.hpp"
#include "numalab/rng.hpp"

namespace numalab {

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::os_default: return "OsDefault";
    case PolicyKind::os_interleave: return "OsInterleave";
    case PolicyKind::se_numa: return "SeNuma";
    case PolicyKind::sn_numa: return "SnNuma";
    case PolicyKind::sn_thread: return "SnThread";
  }
  return "unknown";
}

PolicyKind parse_policy_kind(std::string_view s) {
  for (auto k : {PolicyKind::os_default, PolicyKind::os_interleave, PolicyKind::se_numa, PolicyKind::sn_numa,
                 PolicyKind::sn_thread}) {
    if (s == to_string(k)) return k;
  }
  throw Error("unknown policy kind '" + std::string(s) + "'");
}

const std::vector<std::string>& baseline_strategy_names() {
  static const std::vector<std::string> names = {"os-d", "os-i", "se-n", "sn-n", "grouped", "spread", "mixed", "random"};
  return names;
}

namespace {

// Workers visited node by node, taking the i-th worker of every node before
// any node's (i+1)-th.
std::vector<CoreId> round_robin_by_node(const NumaTopology& t, NodeId first, NodeId last) {
  std::vector<CoreId> out;
  std::size_t depth = 0;
  bool any = true;
  while (any) {
    any = false;
    for (NodeId n = first; n < last; ++n) {
      const auto& w = t.workers_on(n);
      if (depth < w.size()) {
        out.push_back(w[depth]);
        any = true;
      }
    }
    ++depth;
  }
  return out;
}

std::vector<NodeId> block_placement(const NumaTopology& t, std::uint32_t slice_count) {
  std::vector<NodeId> p(slice_count);
  const std::uint64_t nodes = t.node_count();
  for (std::uint32_t s = 0; s < slice_count; ++s) p[s] = static_cast<NodeId>(s * nodes / slice_count);
  return p;
}

}  // namespace

SchedulePolicy sn_thread_policy(const NumaTopology& topology, std::vector<CoreId> assignment, std::string strategy,
                                std::uint64_t seed) {
  SchedulePolicy p;
  p.kind = PolicyKind::sn_thread;
  p.strategy = std::move(strategy);
  p.seed = seed;
  p.placement.reserve(assignment.size());
  for (CoreId c : assignment) p.placement.push_back(c < topology.core_count() ? topology.node_of(c) : 0);
  p.assignment = std::move(assignment);
  return p;
}

SchedulePolicy baseline_schedule(std::string_view strategy, const NumaTopology& topology, std::uint32_t slice_count,
                                 std::uint64_t seed) {
  if (slice_count == 0) throw Error("slice count must be positive");
  SchedulePolicy p;
  p.strategy = std::string(strategy);
  p.seed = seed;
  if (strategy == "os-d") {
    p.kind = PolicyKind::os_default;
    return p;
  }
  if (strategy == "os-i") {
    p.kind = PolicyKind::os_interleave;
    return p;
  }
  if (strategy == "se-n" || strategy == "sn-n") {
    p.kind = strategy == "se-n" ? PolicyKind::se_numa : PolicyKind::sn_numa;
    p.placement = block_placement(topology, slice_count);
    return p;
  }

  const auto& workers = topology.workers();
  const std::size_t w = workers.size();
  std::vector<CoreId> a(slice_count);
  if (strategy == "grouped") {
    const std::size_t block = (slice_count + w - 1) / w;
    for (std::uint32_t s = 0; s < slice_count; ++s) a[s] = workers[s / block];
  } else if (strategy == "spread") {
    // Nodes take turns; each node cycles through its own workers.
    std::vector<NodeId> nodes;
    for (NodeId n = 0; n < topology.node_count(); ++n) {
      if (!topology.workers_on(n).empty()) nodes.push_back(n);
    }
    for (std::uint32_t s = 0; s < slice_count; ++s) {
      const auto& ws = topology.workers_on(nodes[s % nodes.size()]);
      a[s] = ws[(s / nodes.size()) % ws.size()];
    }
  } else if (strategy == "mixed") {
    const std::uint64_t sockets = topology.sockets();
    std::vector<std::vector<CoreId>> per_socket(sockets);
    for (std::uint32_t k = 0; k < sockets; ++k) {
      per_socket[k] = round_robin_by_node(topology, k * topology.nodes_per_socket(), (k + 1) * topology.nodes_per_socket());
    }
    for (std::uint32_t s = 0; s < slice_count; ++s) {
      const auto socket = static_cast<std::uint32_t>(s * sockets / slice_count);
      // First slice of this socket's contiguous block.
      const auto block_start = static_cast<std::uint32_t>((socket * static_cast<std::uint64_t>(slice_count) + sockets - 1) / sockets);
      const auto& order = per_socket[socket];
      a[s] = order[(s - block_start) % order.size()];
    }
  } else if (strategy == "random") {
    Rng rng(mix_seed(seed, 0x5107));
    for (std::uint32_t s = 0; s < slice_count; ++s) a[s] = workers[uniform_index(rng, w)];
  } else {
    throw Error("unknown strategy '" + std::string(strategy) + "'");
  }
  return sn_thread_policy(topology, std::move(a), std::string(strategy), seed);
}

std::vector<std::string> validate_policy(const SchedulePolicy& policy, const NumaTopology& topology,
                                         std::uint32_t slice_count) {
  std::vector<std::string> v;
  if (policy.kind == PolicyKind::sn_thread) {
    for (std::size_t s = 0; s < policy.assignment.size(); ++s) {
      const CoreId c = policy.assignment[s];
      if (c >= topology.core_count()) {
        v.push_back("unknown core " + std::to_string(c) + " for slice " + std::to_string(s));
      } else if (!topology.is_worker(c)) {
        v.push_back("non-worker target: slice " + std::to_string(s) + " -> core " + std::to_string(c) + " (" +
                    std::string(to_string(topology.role(c))) + ")");
      } else if (s < policy.placement.size() && policy.placement[s] != topology.node_of(c)) {
        v.push_back("slice " + std::to_string(s) + " placed off its core's local node");
      }
    }
    for (std::size_t s = policy.assignment.size(); s < slice_count; ++s) {
      v.push_back("uncovered slice " + std::to_string(s));
    }
    if (policy.assignment.size() > slice_count) {
      v.push_back("assignment names " + std::to_string(policy.assignment.size()) + " slices, index has " +
                  std::to_string(slice_count));
    }
  } else if (policy.slice_based()) {
    for (std::size_t s = 0; s < policy.placement.size(); ++s) {
      if (policy.placement[s] >= topology.node_count()) {
        v.push_back("unknown node " + std::to_string(policy.placement[s]) + " for slice " + std::to_string(s));
      }
    }
    for (std::size_t s = policy.placement.size(); s < slice_count; ++s) {
      v.push_back("uncovered slice " + std::to_string(s));
    }
    if (policy.placement.size() > slice_count) {
      v.push_back("placement names " + std::to_string(policy.placement.size()) + " slices, index has " +
                  std::to_string(slice_count));
    }
  }
  return v;
}

void require_valid(const SchedulePolicy& policy, const NumaTopology& topology, std::uint32_t slice_count) {
  const auto v = validate_policy(policy, topology, slice_count);
  if (v.empty()) return;
  std::string msg = "invalid policy '" + policy.strategy + "':";
  for (const auto& s : v) msg += "\n  " + s;
  throw Error(msg);
}

std::vector<NodeId> slice_homes(const SchedulePolicy& policy, const NumaTopology& topology) {
  if (policy.kind == PolicyKind::sn_thread) {
    std::vector<NodeId> out;
    out.reserve(policy.assignment.size());
    for (CoreId c : policy.assignment) out.push_back(topology.node_of(c));
    return out;
  }
  if (!policy.slice_based()) throw Error("OS policies have no slice homes");
  return policy.placement;
}

nlohmann::json to_json(const SchedulePolicy& p) {
  nlohmann::json j{{"kind", std::string(to_string(p.kind))}, {"strategy", p.strategy}, {"seed", p.seed}};
  if (p.kind == PolicyKind::sn_thread) j["assignment"] = p.assignment;
  if (p.slice_based()) j["placement"] = p.placement;
  return j;
}

SchedulePolicy policy_from_json(const nlohmann::json& j) {
  try {
    SchedulePolicy p;
    p.kind = parse_policy_kind(j.at("kind").get<std::string>());
    p.strategy = j.value("strategy", std::string("file"));
    p.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("assignment")) p.assignment = j.at("assignment").get<std::vector<CoreId>>();
    if (j.contains("placement")) p.placement = j.at("placement").get<std::vector<NodeId>>();
    if (p.kind == PolicyKind::sn_thread && p.assignment.empty()) throw Error("SnThread policy without assignment");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed policy: ") + e.what());
  }
}

SchedulePolicy load_policy_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open policy file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed policy file '" + path + "': " + e.what());
  }
  return policy_from_json(j);
}

void save_policy_file(const std::string& path, const SchedulePolicy& policy) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write policy file '" + path + "'");
  out << to_json(policy).dump(2) << '\n';
}

SchedulePolicy resolve_policy(const std::string& arg, const NumaTopology& topology, std::uint32_t slice_count,
                              std::uint64_t seed) {
  SchedulePolicy p = arg.rfind("file:", 0) == 0 ? load_policy_file(arg.substr(5))
                                                : baseline_schedule(arg, topology, slice_count, seed);
  if (p.kind == PolicyKind::sn_thread && p.placement.empty()) {
    p = sn_thread_policy(topology, p.assignment, p.strategy, p.seed);
  }
  require_valid(p, topology, slice_count);
  return p;
}

std::uint64_t policy_digest(const SchedulePolicy& p) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(p.kind));
  mix(p.assignment.size());
  for (auto c : p.assignment) mix(c);
  mix(p.placement.size());
  for (auto n : p.placement) mix(n);
  return h;
}

}  // namespace numalab
