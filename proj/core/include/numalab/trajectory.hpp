#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "numalab/policy.hpp"
#include "numalab/snapshot.hpp"

namespace numalab {

/// Tags identifying the experiment a trajectory came from.
struct TrajectoryContext {
  std::string topology;
  std::string workload;
  std::string index = "bplus";
  std::uint32_t slices = 0;
  std::uint64_t record_seed = 0;
  std::uint64_t workload_seed = 0;
  std::uint64_t policy_seed = 0;
  std::uint64_t queries = 0;
  bool learned = false;
  friend bool operator==(const TrajectoryContext&, const TrajectoryContext&) = default;
};

/// One (policy, hardware snapshot) pair of the offline dataset.
struct Trajectory {
  std::string id;
  TrajectoryContext context;
  SchedulePolicy policy;
  HardwareSnapshot snapshot;
  double throughput = 0.0;
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

nlohmann::json to_json(const TrajectoryContext& c);
TrajectoryContext context_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const nlohmann::json& j);

/// Deterministic id from the context and the policy contents.
std::string trajectory_id(const TrajectoryContext& context, const SchedulePolicy& policy);

/// Key of the (topology, workload, index) context a trajectory is compared within.
std::string context_key(const TrajectoryContext& c);

}  // namespace numalab
