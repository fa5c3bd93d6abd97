#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "numalab/hilbert.hpp"
#include "numalab/rng.hpp"

namespace numalab {

enum class IndexKind : std::uint8_t { bplus, rtree2d };
enum class QueryKind : std::uint8_t { lookup, insert, scan };
enum class KeyDistribution : std::uint8_t { zipfian, uniform };
enum class DataDistribution : std::uint8_t { dense, clustered };

std::string_view to_string(IndexKind kind);
std::string_view to_string(QueryKind kind);
IndexKind parse_index_kind(std::string_view s);

/// Exact Zipf sampler over ranks [1, n] with P(k) proportional to k^-theta.
///
/// Rejection-inversion (Hoermann & Derflinger); O(1) memory and expected
/// O(1) time per sample for any n.
class ZipfianSampler {
 public:
  ZipfianSampler(double theta, std::uint64_t n);

  std::uint64_t operator()(Rng& rng) const;

  double theta() const { return theta_; }
  std::uint64_t size() const { return n_; }

 private:
  double h(double x) const;
  double h_integral(double x) const;
  double h_integral_inverse(double x) const;

  double theta_;
  std::uint64_t n_;
  double h_integral_x1_;
  double h_integral_n_;
  double s_;
};

/// Draws one Zipf rank using the given generator state.
std::uint64_t zipfian_sample(Rng& rng, double theta, std::uint64_t n);

/// The record population an index is built from. Keys are unique and sorted;
/// for spatial data the key is the Hilbert index of the point.
struct KeySpace {
  IndexKind kind = IndexKind::bplus;
  std::vector<std::uint64_t> keys;
  std::vector<Point2> points;  // spatial only, parallel to keys
  std::uint64_t domain_lo = 0;
  std::uint64_t domain_hi = 0;  // exclusive

  std::uint64_t size() const { return keys.size(); }
};

/// Spacing between consecutive dense one-dimensional keys; leaves room for inserts.
inline constexpr std::uint64_t kDenseKeyStride = 8;

KeySpace make_key_space(IndexKind kind, DataDistribution dist, std::uint64_t record_count, std::uint64_t seed);

struct WorkloadSpec {
  std::string name = "custom";
  double lookup_fraction = 0.5;
  double insert_fraction = 0.5;
  double scan_fraction = 0.0;
  KeyDistribution key_distribution = KeyDistribution::zipfian;
  double zipf_theta = 0.99;
  double scan_selectivity_max = 0.001;
  DataDistribution data_distribution = DataDistribution::dense;
  std::uint64_t record_count = 100'000;
  std::uint64_t query_count = 100'000;
  std::uint64_t seed = 1;         // query stream
  std::uint64_t record_seed = 7;  // record population (index build)
  IndexKind index_kind = IndexKind::bplus;

  /// Throws numalab::Error when the spec is inconsistent.
  void validate() const;
};

struct Query {
  QueryKind kind = QueryKind::lookup;
  std::uint64_t key = 0;  // ordered key (Hilbert index for spatial queries)
  Point2 point;           // spatial only
  std::uint64_t scan_length = 0;  // key span, or rectangle side for spatial scans
  std::uint64_t arrival_index = 0;

  /// Query rectangle of a spatial query (a single cell for point queries).
  Rect rect() const;
  friend bool operator==(const Query&, const Query&) = default;
};

const std::vector<std::string>& workload_names();
WorkloadSpec canned_workload(std::string_view name);

/// Loads a canned workload name or a JSON workload spec file.
WorkloadSpec load_workload(const std::string& name_or_path);

nlohmann::json to_json(const WorkloadSpec& spec);
WorkloadSpec workload_from_json(const nlohmann::json& j);

/// Replayable query stream. The same spec always yields the same stream.
class WorkloadGenerator {
 public:
  WorkloadGenerator(const WorkloadSpec& spec, const KeySpace& keys);

  Query next();
  std::uint64_t produced() const { return produced_; }

 private:
  std::uint64_t pick_record();

  WorkloadSpec spec_;
  const KeySpace* keys_;
  Rng rng_;
  ZipfianSampler zipf_;
  std::vector<std::uint32_t> hot_permutation_;
  std::uint64_t produced_ = 0;
};

/// Full stream for `spec` over `keys` (which must come from the same spec).
std::vector<Query> generate_workload(const WorkloadSpec& spec, const KeySpace& keys);

/// Convenience overload that derives the key space from the spec itself.
std::vector<Query> generate_workload(const WorkloadSpec& spec);

/// Key space the spec describes (records seeded from spec.record_seed).
KeySpace key_space_for(const WorkloadSpec& spec);

}  // namespace numalab
