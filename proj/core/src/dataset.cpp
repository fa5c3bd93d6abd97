#include "numalab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "numalab/error.hpp"

namespace numalab {

bool TrajectoryFilter::matches(const TrajectoryContext& c) const {
  if (topology && *topology != c.topology) return false;
  if (workload && *workload != c.workload) return false;
  if (index && *index != c.index) return false;
  if (slices && *slices != c.slices) return false;
  if (learned && *learned != c.learned) return false;
  return true;
}

TrajectoryStore::TrajectoryStore(std::filesystem::path path) : path_(std::move(path)) {}

void TrajectoryStore::append(const Trajectory& t) { append(std::vector<Trajectory>{t}); }

void TrajectoryStore::append(const std::vector<Trajectory>& ts) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot open trajectory store " + path_.string());
  for (const auto& t : ts) out << to_json(t).dump() << '\n';
  out.flush();
  if (!out) throw Error("write failed on " + path_.string());
}

LoadResult TrajectoryStore::load(const TrajectoryFilter& filter) const {
  LoadResult r;
  std::ifstream in(path_, std::ios::binary);
  if (!in) return r;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      Trajectory t = trajectory_from_json(nlohmann::json::parse(line));
      if (filter.matches(t.context)) r.trajectories.push_back(std::move(t));
    } catch (const std::exception& e) {
      ++r.corrupt;
      spdlog::warn("{}:{}: skipping corrupt record ({})", path_.string(), lineno, e.what());
    }
  }
  return r;
}

std::vector<std::string> TrajectoryStore::ids() const {
  std::vector<std::string> out;
  for (auto& t : load().trajectories) out.push_back(std::move(t.id));
  return out;
}

std::filesystem::path TrajectoryStore::norm_path() const {
  auto p = path_;
  p += ".norm.json";
  return p;
}

// ---------------------------------------------------------------------------

std::vector<double> rtg_sequence(const std::vector<double>& rewards, double init) {
  std::vector<double> rtg(rewards.size());
  double accrued = 0.0;
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    rtg[t] = init - accrued;
    accrued += rewards[t];
  }
  return rtg;
}

std::vector<double> meta_token(const OffcoreStats& offcore, const NumaTopology& topology) {
  std::vector<double> meta;
  for (const auto& node : offcore.channel_bytes) {
    for (auto b : node) meta.push_back(static_cast<double>(b));
  }
  for (auto b : offcore.link_bytes) meta.push_back(static_cast<double>(b));
  meta.push_back(topology.core_count());
  meta.push_back(topology.node_count());
  meta.push_back(topology.sockets());
  return meta;
}

bool tokenizable(const Trajectory& t) { return t.policy.kind == PolicyKind::sn_thread; }

TokenSequence tokenize(const Trajectory& t, const NumaTopology& topology) {
  if (!tokenizable(t)) throw Error("trajectory " + t.id + " is not SnThread and has no per-slice actions");
  const auto& snap = t.snapshot;
  const std::uint32_t steps = snap.slice_count();
  if (t.policy.assignment.size() != steps || snap.per_slice_throughput.size() != steps) {
    throw Error("shape mismatch: " + std::to_string(t.policy.assignment.size()) + " assignments for " +
                std::to_string(steps) + " snapshot rows");
  }
  if (snap.offcore.nodes != topology.node_count()) {
    throw Error("shape mismatch: snapshot has " + std::to_string(snap.offcore.nodes) + " nodes, topology " +
                std::to_string(topology.node_count()));
  }
  const GridLayout& grid = topology.grid();

  TokenSequence s;
  s.id = t.id;
  s.steps = steps;
  s.rows = grid.rows();
  s.cols = grid.cols();
  const std::uint32_t tiles = s.tiles();
  s.view_mask.assign(static_cast<std::size_t>(steps) * tiles, 0);
  s.position_mask.assign(static_cast<std::size_t>(steps) * tiles, 0);
  s.machine_view.assign(static_cast<std::size_t>(steps) * tiles * kCounterCount, 0.0);
  s.actions.resize(steps);
  s.rewards = snap.per_slice_throughput;

  std::vector<std::uint8_t> view(tiles, 0);
  std::vector<double> mv(static_cast<std::size_t>(tiles) * kCounterCount, 0.0);
  for (std::uint32_t step = 0; step < steps; ++step) {
    const CoreId core = t.policy.assignment[step];
    if (!topology.is_worker(core)) {
      throw Error("non-worker action: slice " + std::to_string(step) + " -> core " + std::to_string(core));
    }
    std::copy(view.begin(), view.end(), s.view_mask.begin() + static_cast<std::ptrdiff_t>(step) * tiles);
    for (std::uint32_t tile = 0; tile < tiles; ++tile) {
      s.position_mask[static_cast<std::size_t>(step) * tiles + tile] = grid.is_worker_tile(tile) ? 1 : 0;
    }
    std::copy(mv.begin(), mv.end(), s.machine_view.begin() + static_cast<std::ptrdiff_t>(step) * tiles * kCounterCount);

    s.actions[step] = core;
    const std::uint32_t tile = grid.tile_index(core);
    view[tile] = 1;
    for (std::size_t h = 0; h < kCounterCount; ++h) {
      mv[tile * kCounterCount + h] += static_cast<double>(snap.per_slice[step][h]);
    }
  }
  s.final_view = std::move(mv);
  s.rtg = rtg_sequence(s.rewards, t.throughput);
  s.meta = meta_token(snap.offcore, topology);
  return s;
}

// ---------------------------------------------------------------------------

double NormStats::normalize(std::size_t feature, double raw) const {
  const double sd = stddev[feature] > 0.0 ? stddev[feature] : 1.0;
  return (raw - mean[feature]) / sd;
}

NormStats compute_norm_stats(const std::vector<Trajectory>& ts) {
  NormStats s;
  std::array<double, kCounterCount> m2{};
  for (const auto& t : ts) {
    if (!tokenizable(t)) continue;
    s.max_throughput = std::max(s.max_throughput, t.throughput);
    for (const auto& row : t.snapshot.per_slice) {
      ++s.rows;
      for (std::size_t h = 0; h < kCounterCount; ++h) {
        const double x = static_cast<double>(row[h]);
        const double d = x - s.mean[h];
        s.mean[h] += d / static_cast<double>(s.rows);
        m2[h] += d * (x - s.mean[h]);
      }
    }
  }
  for (std::size_t h = 0; h < kCounterCount; ++h) {
    s.stddev[h] = s.rows > 0 ? std::sqrt(m2[h] / static_cast<double>(s.rows)) : 0.0;
  }
  return s;
}

nlohmann::json to_json(const NormStats& s) {
  nlohmann::json features = nlohmann::json::array();
  for (auto n : counter_names()) features.push_back(std::string(n));
  return nlohmann::json{{"features", features},          {"mean", s.mean},
                        {"std", s.stddev},               {"rows", s.rows},
                        {"max_throughput", s.max_throughput}, {"target_multiplier", s.target_multiplier}};
}

NormStats norm_stats_from_json(const nlohmann::json& j) {
  NormStats s;
  try {
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto sd = j.at("std").get<std::vector<double>>();
    if (mean.size() != kCounterCount || sd.size() != kCounterCount) throw Error("normalization stats need 16 features");
    std::copy(mean.begin(), mean.end(), s.mean.begin());
    std::copy(sd.begin(), sd.end(), s.stddev.begin());
    s.rows = j.value("rows", std::uint64_t{0});
    s.max_throughput = j.value("max_throughput", 0.0);
    s.target_multiplier = j.value("target_multiplier", 1.1);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed normalization stats: ") + e.what());
  }
  return s;
}

void save_norm_stats(const std::filesystem::path& path, const NormStats& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json(s).dump(2) << '\n';
}

NormStats load_norm_stats(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  try {
    return norm_stats_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// NPY v1.0, '<f4', C order.

namespace {

std::string shape_tuple(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    s += std::to_string(shape[i]);
    if (shape.size() == 1 || i + 1 < shape.size()) s += ",";
    if (i + 1 < shape.size()) s += " ";
  }
  return s + ")";
}

void put_f32le(std::string& buf, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

}  // namespace

void write_npy(const std::filesystem::path& path, const std::vector<std::size_t>& shape, const std::vector<float>& data) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  if (n != data.size()) throw Error("npy shape does not match data size for " + path.string());
  std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': " + shape_tuple(shape) + ", }";
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::string buf("\x93NUMPY\x01\x00", 8);
  buf.push_back(static_cast<char>(header.size() & 0xFF));
  buf.push_back(static_cast<char>(header.size() >> 8));
  buf += header;
  buf.reserve(buf.size() + 4 * data.size());
  for (float f : data) put_f32le(buf, f);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

NpyArray read_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 10 || bytes.compare(0, 6, "\x93NUMPY") != 0 || bytes[6] != 1) {
    throw Error(path.string() + ": not an NPY v1 file");
  }
  const std::size_t hlen = static_cast<unsigned char>(bytes[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  if (bytes.size() < 10 + hlen) throw Error(path.string() + ": truncated header");
  const std::string header = bytes.substr(10, hlen);
  if (header.find("'<f4'") == std::string::npos) throw Error(path.string() + ": only '<f4' arrays are supported");
  if (header.find("'fortran_order': False") == std::string::npos) throw Error(path.string() + ": fortran order");

  NpyArray a;
  const auto open = header.find('(', header.find("'shape'"));
  const auto close = header.find(')', open);
  if (open == std::string::npos || close == std::string::npos) throw Error(path.string() + ": no shape");
  std::stringstream ss(header.substr(open + 1, close - open - 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(' ') == std::string::npos) continue;
    a.shape.push_back(std::stoull(item));
  }
  std::size_t n = 1;
  for (auto d : a.shape) n *= d;
  if (bytes.size() != 10 + hlen + 4 * n) throw Error(path.string() + ": payload size mismatch");
  a.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[10 + hlen + 4 * i + b])) << (8 * b);
    std::memcpy(&a.data[i], &u, 4);
  }
  return a;
}

// ---------------------------------------------------------------------------

ExportSummary export_tokens(const std::vector<Trajectory>& ts, const NumaTopology& topology, const NormStats& norm,
                            const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  ExportSummary summary;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& t : ts) {
    if (!tokenizable(t)) {
      ++summary.skipped;
      continue;
    }
    TokenSequence s;
    try {
      s = tokenize(t, topology);
    } catch (const Error& e) {
      spdlog::warn("skipping {}: {}", t.id, e.what());
      ++summary.skipped;
      continue;
    }
    const std::size_t T = s.steps, R = s.rows, C = s.cols, H = kCounterCount, tiles = s.tiles();

    // Normalized view: each slice row is z-scored, then summed into its tile.
    std::vector<float> mv(T * tiles * H, 0.0f);
    std::vector<double> acc(tiles * H, 0.0);
    for (std::size_t step = 0; step < T; ++step) {
      for (std::size_t i = 0; i < acc.size(); ++i) mv[step * tiles * H + i] = static_cast<float>(acc[i]);
      const std::size_t tile = topology.grid().tile_index(s.actions[step]);
      for (std::size_t h = 0; h < H; ++h) {
        acc[tile * H + h] += norm.normalize(h, static_cast<double>(t.snapshot.per_slice[step][h]));
      }
    }
    auto as_float = [](const auto& v) { return std::vector<float>(v.begin(), v.end()); };

    const auto dir = out / s.id;
    std::filesystem::create_directories(dir);
    write_npy(dir / "view_mask.npy", {T, R, C}, as_float(s.view_mask));
    write_npy(dir / "position_mask.npy", {T, R, C}, as_float(s.position_mask));
    write_npy(dir / "machine_view.npy", {T, R, C, H}, mv);
    write_npy(dir / "actions.npy", {T}, as_float(s.actions));
    write_npy(dir / "rewards.npy", {T}, as_float(s.rewards));
    write_npy(dir / "rtg.npy", {T}, as_float(s.rtg));
    write_npy(dir / "meta.npy", {s.meta.size()}, as_float(s.meta));

    entries.push_back({{"id", s.id},
                       {"dir", s.id},
                       {"context", to_json(t.context)},
                       {"steps", T},
                       {"rows", R},
                       {"cols", C},
                       {"features", H},
                       {"meta_size", s.meta.size()},
                       {"tokens", s.token_count()},
                       {"throughput", t.throughput}});
    ++summary.exported;
  }
  nlohmann::json manifest{{"format", "npy-v1 <f4"},
                          {"topology", topology.name()},
                          {"cores", topology.core_count()},
                          {"nodes", topology.node_count()},
                          {"sockets", topology.sockets()},
                          {"norm", "norm.json"},
                          {"trajectories", entries}};
  std::ofstream mf(out / "manifest.json", std::ios::binary);
  if (!mf) throw Error("cannot write manifest in " + out.string());
  mf << manifest.dump(2) << '\n';
  save_norm_stats(out / "norm.json", norm);
  return summary;
}

}  // namespace numalab
