#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "numalab/snapshot.hpp"
#include "numalab/topology.hpp"
#include "numalab/trajectory.hpp"

namespace numalab {

/// Context tags to select trajectories by; unset fields match anything.
struct TrajectoryFilter {
  std::optional<std::string> topology;
  std::optional<std::string> workload;
  std::optional<std::string> index;
  std::optional<std::uint32_t> slices;
  std::optional<bool> learned;

  bool matches(const TrajectoryContext& c) const;
};

struct LoadResult {
  std::vector<Trajectory> trajectories;
  std::size_t corrupt = 0;  // lines that failed to parse, skipped
};

/// Append-only JSON-Lines trajectory store. One writer, many readers.
class TrajectoryStore {
 public:
  explicit TrajectoryStore(std::filesystem::path path);

  const std::filesystem::path& path() const { return path_; }

  /// Appends one record and flushes it.
  void append(const Trajectory& t);
  void append(const std::vector<Trajectory>& ts);

  /// Records in file order. Corrupt lines are skipped and counted.
  LoadResult load(const TrajectoryFilter& filter = {}) const;

  /// Ids already present, for idempotent collection.
  std::vector<std::string> ids() const;

  /// Path of the normalization sidecar: `<store>.norm.json`.
  std::filesystem::path norm_path() const;

 private:
  std::filesystem::path path_;
};

/// rtg[t] = init - (r[0] + ... + r[t-1]), the prefix sum accumulated left to right.
std::vector<double> rtg_sequence(const std::vector<double>& rewards, double init);

/// Tokenized form of one SN:T trajectory: T (rtg, state, action) steps plus a
/// final meta token. States are tile grids of `rows x cols`; the state at step
/// t describes the placement of slices 0..t-1.
struct TokenSequence {
  std::string id;
  std::uint32_t steps = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;

  std::vector<std::uint8_t> view_mask;      // steps x tiles
  std::vector<std::uint8_t> position_mask;  // steps x tiles
  std::vector<double> machine_view;         // steps x tiles x H
  std::vector<double> final_view;           // tiles x H, after the last action
  std::vector<std::uint32_t> actions;       // steps
  std::vector<double> rewards;              // steps
  std::vector<double> rtg;                  // steps
  std::vector<double> meta;

  std::uint32_t tiles() const { return rows * cols; }
  std::size_t token_count() const { return 3 * static_cast<std::size_t>(steps) + (meta.empty() ? 0 : 1); }

  std::uint8_t view(std::uint32_t step, std::uint32_t tile) const { return view_mask[step * tiles() + tile]; }
  double cell(std::uint32_t step, std::uint32_t tile, std::size_t feature) const {
    return machine_view[(static_cast<std::size_t>(step) * tiles() + tile) * kCounterCount + feature];
  }
};

/// Meta token: per-node channel bytes (node-major), node-pair link bytes,
/// then core, node and socket counts.
std::vector<double> meta_token(const OffcoreStats& offcore, const NumaTopology& topology);

/// Pure function of (trajectory, topology). Throws numalab::Error on a
/// non-SN:T policy, a shape mismatch or a non-worker action.
TokenSequence tokenize(const Trajectory& t, const NumaTopology& topology);

bool tokenizable(const Trajectory& t);

/// Per-feature z-score statistics over every per-slice counter row of a dataset.
struct NormStats {
  std::array<double, kCounterCount> mean{};
  std::array<double, kCounterCount> stddev{};
  std::uint64_t rows = 0;
  double max_throughput = 0.0;
  double target_multiplier = 1.1;

  double normalize(std::size_t feature, double raw) const;
};

NormStats compute_norm_stats(const std::vector<Trajectory>& ts);
nlohmann::json to_json(const NormStats& s);
NormStats norm_stats_from_json(const nlohmann::json& j);
void save_norm_stats(const std::filesystem::path& path, const NormStats& s);
NormStats load_norm_stats(const std::filesystem::path& path);

/// NPY v1.0 container holding little-endian float32 data.
struct NpyArray {
  std::vector<std::size_t> shape;
  std::vector<float> data;
};

void write_npy(const std::filesystem::path& path, const std::vector<std::size_t>& shape, const std::vector<float>& data);
NpyArray read_npy(const std::filesystem::path& path);

struct ExportSummary {
  std::size_t exported = 0;
  std::size_t skipped = 0;  // not SN:T, or failed to tokenize
};

/// Writes one directory per trajectory under `out` (view_mask, position_mask,
/// machine_view, actions, rewards, rtg, meta as .npy; machine_view z-scored
/// per slice row before tile aggregation) plus manifest.json and norm.json.
ExportSummary export_tokens(const std::vector<Trajectory>& ts, const NumaTopology& topology, const NormStats& norm,
                            const std::filesystem::path& out);

}  // namespace numalab
