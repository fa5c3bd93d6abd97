#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace numalab {

using CoreId = std::uint32_t;
using NodeId = std::uint32_t;

enum class CoreRole : std::uint8_t { worker, router, core_sweeper, offcore_sweeper, stitcher };

std::string_view to_string(CoreRole role);

enum class CacheLevel : std::uint8_t { l1, llc, dram };

/// Where an access is served: a cache level, or DRAM of a given node.
struct MemoryTarget {
  CacheLevel level = CacheLevel::l1;
  NodeId node = 0;  // only meaningful for CacheLevel::dram
};

struct TileCoord {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  friend bool operator==(const TileCoord&, const TileCoord&) = default;
};

/// Placement of cores on an m_i x m_j tile grid.
///
/// Cores are laid out in (socket, node, core) order along a boustrophedon
/// path, so cores with consecutive ids are always grid neighbours. Tiles past the last core and
/// tiles of non-worker cores are never eligible for scheduling.
class GridLayout {
 public:
  GridLayout() = default;
  GridLayout(std::uint32_t rows, std::uint32_t cols, const std::vector<CoreRole>& roles);

  std::uint32_t rows() const { return rows_; }
  std::uint32_t cols() const { return cols_; }
  std::uint32_t tile_count() const { return rows_ * cols_; }

  TileCoord tile_of(CoreId core) const;
  std::uint32_t tile_index(CoreId core) const;  // row * cols + col
  std::optional<CoreId> core_at(std::uint32_t tile) const;
  bool is_worker_tile(std::uint32_t tile) const { return worker_tile_[tile]; }
  const std::vector<bool>& worker_tiles() const { return worker_tile_; }

  /// Manhattan distance between the tiles of two cores.
  std::uint32_t distance(CoreId a, CoreId b) const;

 private:
  std::uint32_t rows_ = 0;
  std::uint32_t cols_ = 0;
  std::uint32_t cores_ = 0;
  std::vector<bool> worker_tile_;
};

/// Near-square grid for `cores` tiles. Prefers an exact factor pair with
/// rows <= cols <= 2 * rows; otherwise falls back to ceil(sqrt) columns.
std::pair<std::uint32_t, std::uint32_t> grid_dims_for(std::uint32_t cores);

/// Parametric machine description used by the presets and by compact topology files.
struct TopologyParams {
  std::string name = "custom";
  std::uint32_t sockets = 1;
  std::uint32_t nodes_per_socket = 1;
  std::uint32_t cores_per_node = 4;

  // Core-to-core latency model.
  double core_base_ns = 40.0;
  double cross_node_core_factor = 1.1;
  double cross_socket_core_factor = 3.0;
  std::uint32_t chiplets_per_socket = 0;  // > 1 enables the chiplet distance model
  double chiplet_max_factor = 1.0;        // farthest chiplet pair within a socket
  double mesh_max_factor = 1.0;           // farthest core pair within a node (mesh)

  // Memory hierarchy.
  double l1_ns = 2.0;
  double llc_ns = 20.0;
  double dram_local_ns = 90.0;
  double remote_node_dram_factor = 1.1;
  double remote_socket_dram_factor = 3.0;

  // Off-core resources.
  std::uint32_t imc_channels = 2;
  double channel_bandwidth = 2.0e9;      // bytes per simulated second per channel
  double interconnect_capacity = 4.0e9;  // bytes per simulated second per node pair
  double frequency_ghz = 2.7;

  // One reserved core per node carrying router, sweeper and stitcher duties.
  bool fold_reserved_roles = false;
  // Relative multiplicative jitter on remote latencies (0 disables).
  double jitter = 0.0;
};

/// Fully explicit machine description; mirrors the topology file format.
struct TopologyDescription {
  std::string name;
  std::uint32_t sockets = 0;
  std::uint32_t nodes_per_socket = 0;
  std::uint32_t cores_per_node = 0;
  std::vector<CoreId> worker_cores;
  std::vector<CoreId> router_cores;
  std::vector<CoreId> core_sweeper_cores;
  std::optional<CoreId> offcore_sweeper_core;
  std::optional<CoreId> stitcher_core;
  std::vector<double> core_latency;  // cores x cores, ns
  std::vector<double> dram_latency;  // cores x nodes, ns
  std::vector<std::uint32_t> imc_channels;  // per node
  double channel_bandwidth = 0.0;
  std::vector<double> interconnect_capacity;  // nodes x nodes
  double l1_ns = 2.0;
  double llc_ns = 20.0;
  double frequency_ghz = 2.7;
  bool folded_roles = false;
  std::optional<std::pair<std::uint32_t, std::uint32_t>> grid_dims;
};

/// An immutable, validated NUMA machine model.
class NumaTopology {
 public:
  /// Validates `desc` and throws numalab::Error on any violated invariant.
  explicit NumaTopology(TopologyDescription desc);

  const std::string& name() const { return d_.name; }
  std::uint32_t sockets() const { return d_.sockets; }
  std::uint32_t nodes_per_socket() const { return d_.nodes_per_socket; }
  std::uint32_t cores_per_node() const { return d_.cores_per_node; }
  std::uint32_t node_count() const { return d_.sockets * d_.nodes_per_socket; }
  std::uint32_t core_count() const { return node_count() * d_.cores_per_node; }

  NodeId node_of(CoreId core) const { return core / d_.cores_per_node; }
  std::uint32_t socket_of_node(NodeId node) const { return node / d_.nodes_per_socket; }
  std::uint32_t socket_of(CoreId core) const { return socket_of_node(node_of(core)); }

  CoreRole role(CoreId core) const { return roles_[core]; }
  bool is_worker(CoreId core) const { return core < core_count() && roles_[core] == CoreRole::worker; }
  const std::vector<CoreId>& workers() const { return d_.worker_cores; }
  const std::vector<CoreId>& workers_on(NodeId node) const { return workers_by_node_[node]; }
  const std::vector<CoreId>& routers() const { return d_.router_cores; }
  const std::vector<CoreId>& core_sweepers() const { return d_.core_sweeper_cores; }
  std::optional<CoreId> offcore_sweeper() const { return d_.offcore_sweeper_core; }
  std::optional<CoreId> stitcher() const { return d_.stitcher_core; }
  bool folded_roles() const { return d_.folded_roles; }

  double core_latency(CoreId a, CoreId b) const { return d_.core_latency[a * core_count() + b]; }
  double dram_latency(CoreId core, NodeId node) const { return d_.dram_latency[core * node_count() + node]; }
  double l1_ns() const { return d_.l1_ns; }
  double llc_ns() const { return d_.llc_ns; }
  double frequency_ghz() const { return d_.frequency_ghz; }

  std::uint32_t imc_channels(NodeId node) const { return d_.imc_channels[node]; }
  double channel_bandwidth() const { return d_.channel_bandwidth; }
  double interconnect_capacity(NodeId from, NodeId to) const {
    return d_.interconnect_capacity[from * node_count() + to];
  }

  const GridLayout& grid() const { return grid_; }
  const TopologyDescription& description() const { return d_; }

 private:
  TopologyDescription d_;
  std::vector<CoreRole> roles_;
  std::vector<std::vector<CoreId>> workers_by_node_;
  GridLayout grid_;
};

/// Latency in nanoseconds of an access issued by `exec_core` and served at `target`.
double access_cost(const NumaTopology& topology, CoreId exec_core, MemoryTarget target);

const std::vector<std::string>& topology_preset_names();

/// Parameters of a compiled-in preset; throws on an unknown name.
TopologyParams preset_params(std::string_view preset);

/// Expands parameters into an explicit description (deterministic for jitter == 0).
TopologyDescription describe(const TopologyParams& params, std::uint64_t seed = 0);

NumaTopology build_topology(std::string_view preset);
NumaTopology build_topology(const TopologyParams& params, std::uint64_t seed = 0);

/// Loads a preset name or a JSON topology file (explicit or parametric form).
NumaTopology load_topology(const std::string& preset_or_path, std::uint64_t seed = 0);

nlohmann::json to_json(const NumaTopology& topology);
NumaTopology topology_from_json(const nlohmann::json& j, std::uint64_t seed = 0);

}  // namespace numalab
