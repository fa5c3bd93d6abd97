#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "numalab/topology.hpp"

namespace numalab {

enum class PolicyKind : std::uint8_t { os_default, os_interleave, se_numa, sn_numa, sn_thread };

std::string_view to_string(PolicyKind kind);
PolicyKind parse_policy_kind(std::string_view s);

/// Where every slice lives and which core may execute it.
///
/// OS modes ignore the slice directory entirely. SE:N and SN:N carry a node
/// per slice; SN:T carries a worker core per slice and its placement is the
/// local node of that core.
struct SchedulePolicy {
  PolicyKind kind = PolicyKind::os_default;
  std::vector<CoreId> assignment;  // slice -> worker core (sn_thread)
  std::vector<NodeId> placement;   // slice -> node (se_numa, sn_numa, sn_thread)
  std::string strategy;
  std::uint64_t seed = 0;

  bool slice_based() const { return kind != PolicyKind::os_default && kind != PolicyKind::os_interleave; }
  friend bool operator==(const SchedulePolicy&, const SchedulePolicy&) = default;
};

/// Strategy names accepted by baseline_schedule, in report order.
const std::vector<std::string>& baseline_strategy_names();

/// Builds one of the eight baseline schedules: os-d, os-i, se-n, sn-n,
/// grouped, spread, mixed, random.
SchedulePolicy baseline_schedule(std::string_view strategy, const NumaTopology& topology, std::uint32_t slice_count,
                                 std::uint64_t seed = 0);

/// SN:T policy from an explicit slice -> core map.
SchedulePolicy sn_thread_policy(const NumaTopology& topology, std::vector<CoreId> assignment,
                                std::string strategy = "explicit", std::uint64_t seed = 0);

/// Human-readable violations; empty when the policy is usable.
std::vector<std::string> validate_policy(const SchedulePolicy& policy, const NumaTopology& topology,
                                         std::uint32_t slice_count);

/// Throws numalab::Error listing every violation.
void require_valid(const SchedulePolicy& policy, const NumaTopology& topology, std::uint32_t slice_count);

/// Home node of every slice under a slice-based policy.
std::vector<NodeId> slice_homes(const SchedulePolicy& policy, const NumaTopology& topology);

nlohmann::json to_json(const SchedulePolicy& policy);
SchedulePolicy policy_from_json(const nlohmann::json& j);
SchedulePolicy load_policy_file(const std::string& path);
void save_policy_file(const std::string& path, const SchedulePolicy& policy);

/// Resolves a CLI policy argument: a strategy name or `file:<path>`.
SchedulePolicy resolve_policy(const std::string& arg, const NumaTopology& topology, std::uint32_t slice_count,
                              std::uint64_t seed);

/// Stable 64-bit digest of the policy contents (kind, assignment, placement).
std::uint64_t policy_digest(const SchedulePolicy& policy);

}  // namespace numalab
