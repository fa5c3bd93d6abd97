#include "numalab/trajectory.hpp"

#include <cstdio>

#include "numalab/error.hpp"

namespace numalab {

nlohmann::json to_json(const TrajectoryContext& c) {
  return nlohmann::json{
      {"topology", c.topology},       {"workload", c.workload},       {"index", c.index},
      {"slices", c.slices},           {"record_seed", c.record_seed}, {"workload_seed", c.workload_seed},
      {"policy_seed", c.policy_seed}, {"queries", c.queries},         {"learned", c.learned},
  };
}

TrajectoryContext context_from_json(const nlohmann::json& j) {
  TrajectoryContext c;
  c.topology = j.at("topology").get<std::string>();
  c.workload = j.at("workload").get<std::string>();
  c.index = j.value("index", std::string("bplus"));
  c.slices = j.at("slices").get<std::uint32_t>();
  c.record_seed = j.value("record_seed", std::uint64_t{0});
  c.workload_seed = j.value("workload_seed", std::uint64_t{0});
  c.policy_seed = j.value("policy_seed", std::uint64_t{0});
  c.queries = j.value("queries", std::uint64_t{0});
  c.learned = j.value("learned", false);
  return c;
}

nlohmann::json to_json(const Trajectory& t) {
  return nlohmann::json{
      {"id", t.id},
      {"context", to_json(t.context)},
      {"policy", to_json(t.policy)},
      {"snapshot", to_json(t.snapshot)},
      {"throughput", t.throughput},
  };
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
  try {
    Trajectory t;
    t.id = j.at("id").get<std::string>();
    t.context = context_from_json(j.at("context"));
    t.policy = policy_from_json(j.at("policy"));
    t.snapshot = snapshot_from_json(j.at("snapshot"));
    t.throughput = j.at("throughput").get<double>();
    if (t.snapshot.slice_count() != t.context.slices) throw Error("snapshot slice count disagrees with context");
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed trajectory: ") + e.what());
  }
}

std::string trajectory_id(const TrajectoryContext& c, const SchedulePolicy& policy) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  h ^= policy_digest(policy);
  h *= 0x100000001b3ULL;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return policy.strategy + "-" + buf;
}

std::string context_key(const TrajectoryContext& c) {
  return c.topology + "/" + c.workload + "/" + c.index + "/T" + std::to_string(c.slices);
}

}  // namespace numalab
