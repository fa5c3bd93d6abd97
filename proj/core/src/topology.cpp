#include "numalab/topology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "numalab/error.hpp"
#include "numalab/rng.hpp"

namespace numalab {

std::string_view to_string(CoreRole role) {
  switch (role) {
    case CoreRole::worker: return "worker";
    case CoreRole::router: return "router";
    case CoreRole::core_sweeper: return "core_sweeper";
    case CoreRole::offcore_sweeper: return "offcore_sweeper";
    case CoreRole::stitcher: return "stitcher";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Grid

std::pair<std::uint32_t, std::uint32_t> grid_dims_for(std::uint32_t cores) {
  if (cores == 0) throw Error("grid needs at least one core");
  std::optional<std::pair<std::uint32_t, std::uint32_t>> best;
  for (std::uint32_t rows = 1; rows * rows <= cores; ++rows) {
    if (cores % rows != 0) continue;
    const std::uint32_t cols = cores / rows;
    if (cols <= 2 * rows) best = {rows, cols};  // later rows are closer to square
  }
  if (best) return *best;
  const auto cols = static_cast<std::uint32_t>(std::ceil(std::sqrt(static_cast<double>(cores))));
  const std::uint32_t rows = (cores + cols - 1) / cols;
  return {rows, cols};
}

GridLayout::GridLayout(std::uint32_t rows, std::uint32_t cols, const std::vector<CoreRole>& roles)
    : rows_(rows), cols_(cols), cores_(static_cast<std::uint32_t>(roles.size())) {
  if (static_cast<std::uint64_t>(rows) * cols < roles.size()) {
    throw Error("grid " + std::to_string(rows) + "x" + std::to_string(cols) + " cannot hold " +
                std::to_string(roles.size()) + " cores");
  }
  worker_tile_.assign(tile_count(), false);
  for (CoreId c = 0; c < roles.size(); ++c) worker_tile_[tile_index(c)] = roles[c] == CoreRole::worker;
}

// Odd rows run right to left, so consecutive cores always share an edge.
TileCoord GridLayout::tile_of(CoreId core) const {
  const std::uint32_t row = core / cols_;
  const std::uint32_t col = core % cols_;
  return TileCoord{row, row % 2 == 0 ? col : cols_ - 1 - col};
}

std::uint32_t GridLayout::tile_index(CoreId core) const {
  const auto t = tile_of(core);
  return t.row * cols_ + t.col;
}

std::optional<CoreId> GridLayout::core_at(std::uint32_t tile) const {
  const std::uint32_t row = tile / cols_;
  const std::uint32_t col = tile % cols_;
  const CoreId core = row * cols_ + (row % 2 == 0 ? col : cols_ - 1 - col);
  if (tile < tile_count() && core < cores_) return core;
  return std::nullopt;
}

std::uint32_t GridLayout::distance(CoreId a, CoreId b) const {
  const auto ta = tile_of(a);
  const auto tb = tile_of(b);
  const auto dr = ta.row > tb.row ? ta.row - tb.row : tb.row - ta.row;
  const auto dc = ta.col > tb.col ? ta.col - tb.col : tb.col - ta.col;
  return dr + dc;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error("invalid topology: " + what);
}

}  // namespace

NumaTopology::NumaTopology(TopologyDescription desc) : d_(std::move(desc)) {
  require(d_.sockets > 0 && d_.nodes_per_socket > 0 && d_.cores_per_node > 0,
          "sockets, nodes_per_socket and cores_per_node must be positive");
  const std::uint32_t cores = core_count();
  const std::uint32_t nodes = node_count();

  constexpr auto kUnassigned = static_cast<CoreRole>(0xff);
  roles_.assign(cores, kUnassigned);
  auto claim = [&](CoreId core, CoreRole role) {
    require(core < cores, "role set names unknown core " + std::to_string(core));
    if (roles_[core] != kUnassigned) {
      throw Error("invalid topology: role sets overlapping at core " + std::to_string(core));
    }
    roles_[core] = role;
  };
  for (auto c : d_.worker_cores) claim(c, CoreRole::worker);
  for (auto c : d_.router_cores) claim(c, CoreRole::router);
  for (auto c : d_.core_sweeper_cores) claim(c, CoreRole::core_sweeper);
  if (d_.offcore_sweeper_core) claim(*d_.offcore_sweeper_core, CoreRole::offcore_sweeper);
  if (d_.stitcher_core) claim(*d_.stitcher_core, CoreRole::stitcher);
  for (CoreId c = 0; c < cores; ++c) {
    require(roles_[c] != kUnassigned, "core " + std::to_string(c) + " has no role");
  }
  require(!d_.router_cores.empty(), "at least one router core is required");
  std::sort(d_.worker_cores.begin(), d_.worker_cores.end());

  workers_by_node_.assign(nodes, {});
  for (auto c : d_.worker_cores) workers_by_node_[node_of(c)].push_back(c);
  for (NodeId n = 0; n < nodes; ++n) {
    if (workers_by_node_[n].empty()) {
      throw Error("invalid topology: zero workers on node " + std::to_string(n));
    }
  }

  require(d_.core_latency.size() == static_cast<std::size_t>(cores) * cores, "core_latency must be cores x cores");
  require(d_.dram_latency.size() == static_cast<std::size_t>(cores) * nodes, "dram_latency must be cores x nodes");
  if (d_.imc_channels.size() == 1 && nodes > 1) d_.imc_channels.assign(nodes, d_.imc_channels.front());
  require(d_.imc_channels.size() == nodes, "imc_channels must list every node");
  for (auto ch : d_.imc_channels) require(ch > 0, "every node needs at least one IMC channel");
  require(d_.channel_bandwidth > 0, "channel_bandwidth must be positive");
  require(d_.interconnect_capacity.size() == static_cast<std::size_t>(nodes) * nodes,
          "interconnect_capacity must be nodes x nodes");
  require(d_.frequency_ghz > 0, "frequency must be positive");

  // Symmetric, zero diagonal, non-decreasing across distance classes.
  double max_intra_node = 0.0;
  double min_cross_node = std::numeric_limits<double>::infinity();
  double max_intra_socket = 0.0;
  double min_cross_socket = std::numeric_limits<double>::infinity();
  for (CoreId a = 0; a < cores; ++a) {
    require(core_latency(a, a) == 0.0, "core_latency diagonal must be zero");
    for (CoreId b = 0; b < cores; ++b) {
      if (a == b) continue;
      const double l = core_latency(a, b);
      require(l > 0.0, "core_latency must be positive off the diagonal");
      require(l == core_latency(b, a), "core_latency must be symmetric");
      if (node_of(a) == node_of(b)) {
        max_intra_node = std::max(max_intra_node, l);
      } else if (socket_of(a) == socket_of(b)) {
        min_cross_node = std::min(min_cross_node, l);
      }
      if (socket_of(a) == socket_of(b)) {
        max_intra_socket = std::max(max_intra_socket, l);
      } else {
        min_cross_socket = std::min(min_cross_socket, l);
      }
    }
  }
  require(max_intra_node <= min_cross_node, "intra-node latency exceeds cross-node latency");
  require(max_intra_socket <= min_cross_socket, "intra-socket latency exceeds cross-socket latency");

  require(d_.l1_ns > 0 && d_.l1_ns < d_.llc_ns, "need 0 < l1_ns < llc_ns");
  for (CoreId c = 0; c < cores; ++c) {
    const double local = dram_latency(c, node_of(c));
    require(local > d_.llc_ns, "local DRAM latency must exceed LLC latency");
    for (NodeId n = 0; n < nodes; ++n) {
      if (n == node_of(c)) continue;
      require(dram_latency(c, n) > local, "remote DRAM latency must exceed local DRAM latency");
    }
  }

  const auto dims = d_.grid_dims ? *d_.grid_dims : grid_dims_for(cores);
  d_.grid_dims = dims;
  grid_ = GridLayout(dims.first, dims.second, roles_);
}

double access_cost(const NumaTopology& topology, CoreId exec_core, MemoryTarget target) {
  switch (target.level) {
    case CacheLevel::l1: return topology.l1_ns();
    case CacheLevel::llc: return topology.llc_ns();
    case CacheLevel::dram: return topology.dram_latency(exec_core, target.node);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Presets

const std::vector<std::string>& topology_preset_names() {
  static const std::vector<std::string> names = {"skx-4s-snc2",    "milan-2s-nps4", "gh200-1s",
                                                 "sandybridge-4s", "milan-2s-nps1", "tiny-2n4c"};
  return names;
}

TopologyParams preset_params(std::string_view preset) {
  TopologyParams p;
  p.name = std::string(preset);
  if (preset == "skx-4s-snc2") {
    // Sub-NUMA clustering: 1.1x across nodes of a socket, 3x across sockets.
    p.sockets = 4;
    p.nodes_per_socket = 2;
    p.cores_per_node = 6;
    p.cross_node_core_factor = 1.1;
    p.cross_socket_core_factor = 3.0;
    p.remote_node_dram_factor = 1.1;
    p.remote_socket_dram_factor = 3.0;
    p.imc_channels = 3;
    p.frequency_ghz = 2.7;
  } else if (preset == "milan-2s-nps4") {
    // One chiplet per node; cross-chiplet latency grows to 4x within a socket.
    p.sockets = 2;
    p.nodes_per_socket = 4;
    p.cores_per_node = 6;
    p.chiplets_per_socket = 4;
    p.chiplet_max_factor = 4.0;
    p.cross_socket_core_factor = 4.5;
    p.remote_node_dram_factor = 1.2;
    p.remote_socket_dram_factor = 2.0;
    p.imc_channels = 2;
    p.frequency_ghz = 2.8;
  } else if (preset == "gh200-1s") {
    // Single mesh node; the farthest core pair is 1.5x the base latency.
    p.sockets = 1;
    p.nodes_per_socket = 1;
    p.cores_per_node = 20;
    p.mesh_max_factor = 1.5;
    p.imc_channels = 4;
    p.frequency_ghz = 3.1;
  } else if (preset == "sandybridge-4s") {
    p.sockets = 4;
    p.nodes_per_socket = 1;
    p.cores_per_node = 8;
    p.cross_socket_core_factor = 2.0;
    p.remote_socket_dram_factor = 1.6;
    p.imc_channels = 4;
    p.frequency_ghz = 2.2;
  } else if (preset == "milan-2s-nps1") {
    p.sockets = 2;
    p.nodes_per_socket = 1;
    p.cores_per_node = 24;
    p.chiplets_per_socket = 4;
    p.chiplet_max_factor = 4.0;
    p.cross_socket_core_factor = 4.5;
    p.remote_socket_dram_factor = 2.0;
    p.imc_channels = 8;
    p.frequency_ghz = 2.8;
  } else if (preset == "tiny-2n4c") {
    p.sockets = 2;
    p.nodes_per_socket = 1;
    p.cores_per_node = 3;
    p.cross_socket_core_factor = 2.0;
    p.remote_socket_dram_factor = 2.0;
    p.imc_channels = 1;
    p.fold_reserved_roles = true;
  } else {
    throw Error("unknown topology preset '" + std::string(preset) + "'");
  }
  return p;
}

namespace {

double core_latency_model(const TopologyParams& p, CoreId a, CoreId b) {
  if (a == b) return 0.0;
  const std::uint32_t cores_per_socket = p.nodes_per_socket * p.cores_per_node;
  const std::uint32_t sa = a / cores_per_socket;
  const std::uint32_t sb = b / cores_per_socket;
  if (sa != sb) return p.core_base_ns * p.cross_socket_core_factor;

  const std::uint32_t na = a / p.cores_per_node;
  const std::uint32_t nb = b / p.cores_per_node;
  if (p.chiplets_per_socket > 1) {
    const std::uint32_t per_chiplet = std::max<std::uint32_t>(1, cores_per_socket / p.chiplets_per_socket);
    const std::uint32_t ca = std::min((a % cores_per_socket) / per_chiplet, p.chiplets_per_socket - 1);
    const std::uint32_t cb = std::min((b % cores_per_socket) / per_chiplet, p.chiplets_per_socket - 1);
    if (ca != cb) {
      const double span = static_cast<double>(ca > cb ? ca - cb : cb - ca) / (p.chiplets_per_socket - 1);
      return p.core_base_ns * (1.0 + (p.chiplet_max_factor - 1.0) * span);
    }
  } else if (na != nb) {
    return p.core_base_ns * p.cross_node_core_factor;
  }

  if (p.mesh_max_factor > 1.0) {
    const auto [rows, cols] = grid_dims_for(p.cores_per_node);
    const std::uint32_t ia = a % p.cores_per_node;
    const std::uint32_t ib = b % p.cores_per_node;
    const std::uint32_t dr = ia / cols > ib / cols ? ia / cols - ib / cols : ib / cols - ia / cols;
    const std::uint32_t dc = ia % cols > ib % cols ? ia % cols - ib % cols : ib % cols - ia % cols;
    const double max_dist = static_cast<double>((rows - 1) + (cols - 1));
    if (max_dist > 0) return p.core_base_ns * (1.0 + (p.mesh_max_factor - 1.0) * (dr + dc) / max_dist);
  }
  return p.core_base_ns;
}

}  // namespace

TopologyDescription describe(const TopologyParams& p, std::uint64_t seed) {
  if (p.sockets == 0 || p.nodes_per_socket == 0 || p.cores_per_node == 0) {
    throw Error("invalid topology: sockets, nodes_per_socket and cores_per_node must be positive");
  }
  TopologyDescription d;
  d.name = p.name;
  d.sockets = p.sockets;
  d.nodes_per_socket = p.nodes_per_socket;
  d.cores_per_node = p.cores_per_node;
  d.l1_ns = p.l1_ns;
  d.llc_ns = p.llc_ns;
  d.frequency_ghz = p.frequency_ghz;
  d.folded_roles = p.fold_reserved_roles;

  const std::uint32_t nodes = p.sockets * p.nodes_per_socket;
  const std::uint32_t cores = nodes * p.cores_per_node;

  // Reserved cores are taken from the top of each node so workers stay contiguous.
  std::vector<bool> reserved(cores, false);
  auto take = [&](NodeId node, std::uint32_t from_top) -> CoreId {
    if (from_top >= p.cores_per_node) {
      throw Error("invalid topology: zero workers on node " + std::to_string(node));
    }
    const CoreId core = node * p.cores_per_node + (p.cores_per_node - 1 - from_top);
    reserved[core] = true;
    return core;
  };
  std::vector<std::uint32_t> used(nodes, 0);
  for (NodeId n = 0; n < nodes; ++n) d.router_cores.push_back(take(n, used[n]++));
  if (!p.fold_reserved_roles) {
    for (NodeId n = 0; n < nodes; ++n) d.core_sweeper_cores.push_back(take(n, used[n]++));
    d.offcore_sweeper_core = take(0, used[0]++);
    const NodeId stitch_node = nodes > 1 ? 1 : 0;
    d.stitcher_core = take(stitch_node, used[stitch_node]++);
  }
  for (CoreId c = 0; c < cores; ++c) {
    if (!reserved[c]) d.worker_cores.push_back(c);
  }

  Rng rng(mix_seed(seed, 0x7070));
  auto jitter = [&]() { return p.jitter > 0.0 ? 1.0 + p.jitter * uniform01(rng) : 1.0; };

  d.core_latency.assign(static_cast<std::size_t>(cores) * cores, 0.0);
  for (CoreId a = 0; a < cores; ++a) {
    for (CoreId b = a + 1; b < cores; ++b) {
      const double l = core_latency_model(p, a, b) * jitter();
      d.core_latency[a * cores + b] = l;
      d.core_latency[b * cores + a] = l;
    }
  }
  d.dram_latency.assign(static_cast<std::size_t>(cores) * nodes, 0.0);
  for (CoreId c = 0; c < cores; ++c) {
    const NodeId home = c / p.cores_per_node;
    for (NodeId n = 0; n < nodes; ++n) {
      double l = p.dram_local_ns;
      if (n != home) {
        const bool same_socket = home / p.nodes_per_socket == n / p.nodes_per_socket;
        l *= (same_socket ? p.remote_node_dram_factor : p.remote_socket_dram_factor) * jitter();
      }
      d.dram_latency[c * nodes + n] = l;
    }
  }
  d.imc_channels.assign(nodes, p.imc_channels);
  d.channel_bandwidth = p.channel_bandwidth;
  d.interconnect_capacity.assign(static_cast<std::size_t>(nodes) * nodes, p.interconnect_capacity);
  return d;
}

NumaTopology build_topology(std::string_view preset) {
  return NumaTopology(describe(preset_params(preset)));
}

NumaTopology build_topology(const TopologyParams& params, std::uint64_t seed) {
  return NumaTopology(describe(params, seed));
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const NumaTopology& t) {
  const auto& d = t.description();
  nlohmann::json j;
  j["name"] = d.name;
  j["sockets"] = d.sockets;
  j["nodes_per_socket"] = d.nodes_per_socket;
  j["cores_per_node"] = d.cores_per_node;
  j["worker_cores"] = d.worker_cores;
  j["router_cores"] = d.router_cores;
  j["core_sweeper_cores"] = d.core_sweeper_cores;
  j["offcore_sweeper_core"] = d.offcore_sweeper_core ? nlohmann::json(*d.offcore_sweeper_core) : nlohmann::json();
  j["stitcher_core"] = d.stitcher_core ? nlohmann::json(*d.stitcher_core) : nlohmann::json();
  j["folded_roles"] = d.folded_roles;
  j["core_latency"] = d.core_latency;
  j["dram_latency"] = d.dram_latency;
  j["imc_channels"] = d.imc_channels;
  j["channel_bandwidth"] = d.channel_bandwidth;
  j["interconnect_capacity"] = d.interconnect_capacity;
  j["l1_ns"] = d.l1_ns;
  j["llc_ns"] = d.llc_ns;
  j["frequency_ghz"] = d.frequency_ghz;
  j["grid_dims"] = {t.grid().rows(), t.grid().cols()};
  return j;
}

namespace {

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

TopologyParams params_from_json(const nlohmann::json& j) {
  TopologyParams p = j.contains("preset") ? preset_params(j.at("preset").get<std::string>()) : TopologyParams{};
  read_if(j, "name", p.name);
  read_if(j, "sockets", p.sockets);
  read_if(j, "nodes_per_socket", p.nodes_per_socket);
  read_if(j, "cores_per_node", p.cores_per_node);
  read_if(j, "core_base_ns", p.core_base_ns);
  read_if(j, "cross_node_core_factor", p.cross_node_core_factor);
  read_if(j, "cross_socket_core_factor", p.cross_socket_core_factor);
  read_if(j, "chiplets_per_socket", p.chiplets_per_socket);
  read_if(j, "chiplet_max_factor", p.chiplet_max_factor);
  read_if(j, "mesh_max_factor", p.mesh_max_factor);
  read_if(j, "l1_ns", p.l1_ns);
  read_if(j, "llc_ns", p.llc_ns);
  read_if(j, "dram_local_ns", p.dram_local_ns);
  read_if(j, "remote_node_dram_factor", p.remote_node_dram_factor);
  read_if(j, "remote_socket_dram_factor", p.remote_socket_dram_factor);
  read_if(j, "imc_channels", p.imc_channels);
  read_if(j, "channel_bandwidth", p.channel_bandwidth);
  read_if(j, "interconnect_capacity", p.interconnect_capacity);
  read_if(j, "frequency_ghz", p.frequency_ghz);
  read_if(j, "fold_reserved_roles", p.fold_reserved_roles);
  read_if(j, "jitter", p.jitter);
  return p;
}

}  // namespace

NumaTopology topology_from_json(const nlohmann::json& j, std::uint64_t seed) {
  if (!j.contains("core_latency")) return build_topology(params_from_json(j), seed);

  TopologyDescription d;
  d.name = j.value("name", std::string("custom"));
  d.sockets = j.at("sockets").get<std::uint32_t>();
  d.nodes_per_socket = j.at("nodes_per_socket").get<std::uint32_t>();
  d.cores_per_node = j.at("cores_per_node").get<std::uint32_t>();
  d.worker_cores = j.at("worker_cores").get<std::vector<CoreId>>();
  d.router_cores = j.at("router_cores").get<std::vector<CoreId>>();
  read_if(j, "core_sweeper_cores", d.core_sweeper_cores);
  if (j.contains("offcore_sweeper_core") && !j.at("offcore_sweeper_core").is_null()) {
    d.offcore_sweeper_core = j.at("offcore_sweeper_core").get<CoreId>();
  }
  if (j.contains("stitcher_core") && !j.at("stitcher_core").is_null()) {
    d.stitcher_core = j.at("stitcher_core").get<CoreId>();
  }
  read_if(j, "folded_roles", d.folded_roles);
  d.core_latency = j.at("core_latency").get<std::vector<double>>();
  d.dram_latency = j.at("dram_latency").get<std::vector<double>>();
  if (j.at("imc_channels").is_array()) {
    d.imc_channels = j.at("imc_channels").get<std::vector<std::uint32_t>>();
  } else {
    d.imc_channels = {j.at("imc_channels").get<std::uint32_t>()};
  }
  d.channel_bandwidth = j.at("channel_bandwidth").get<double>();
  const std::uint32_t nodes = d.sockets * d.nodes_per_socket;
  if (j.at("interconnect_capacity").is_array()) {
    d.interconnect_capacity = j.at("interconnect_capacity").get<std::vector<double>>();
  } else {
    d.interconnect_capacity.assign(static_cast<std::size_t>(nodes) * nodes,
                                   j.at("interconnect_capacity").get<double>());
  }
  read_if(j, "l1_ns", d.l1_ns);
  read_if(j, "llc_ns", d.llc_ns);
  read_if(j, "frequency_ghz", d.frequency_ghz);
  if (j.contains("grid_dims")) {
    const auto dims = j.at("grid_dims").get<std::vector<std::uint32_t>>();
    if (dims.size() != 2) throw Error("invalid topology: grid_dims must have two entries");
    d.grid_dims = std::pair{dims[0], dims[1]};
  }
  return NumaTopology(std::move(d));
}

NumaTopology load_topology(const std::string& preset_or_path, std::uint64_t seed) {
  const auto& names = topology_preset_names();
  if (std::find(names.begin(), names.end(), preset_or_path) != names.end()) {
    return build_topology(preset_or_path);
  }
  std::ifstream in(preset_or_path);
  if (!in) throw Error("unknown topology preset or unreadable file '" + preset_or_path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed topology file '" + preset_or_path + "': " + e.what());
  }
  return topology_from_json(j, seed);
}

}  // namespace numalab
