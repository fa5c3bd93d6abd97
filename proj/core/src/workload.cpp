#include "numalab/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "numalab/error.hpp"

namespace numalab {

std::string_view to_string(IndexKind kind) {
  return kind == IndexKind::bplus ? "bplus" : "rtree2d";
}

std::string_view to_string(QueryKind kind) {
  switch (kind) {
    case QueryKind::lookup: return "lookup";
    case QueryKind::insert: return "insert";
    case QueryKind::scan: return "scan";
  }
  return "unknown";
}

IndexKind parse_index_kind(std::string_view s) {
  if (s == "bplus") return IndexKind::bplus;
  if (s == "rtree2d") return IndexKind::rtree2d;
  throw Error("unknown index kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Zipf

namespace {

// log1p(x)/x with a series fallback near zero.
double helper1(double x) {
  if (std::abs(x) > 1e-8) return std::log1p(x) / x;
  return 1.0 - x * (0.5 - x * (1.0 / 3.0 - 0.25 * x));
}

// expm1(x)/x with a series fallback near zero.
double helper2(double x) {
  if (std::abs(x) > 1e-8) return std::expm1(x) / x;
  return 1.0 + x * 0.5 * (1.0 + x * (1.0 / 3.0) * (1.0 + 0.25 * x));
}

}  // namespace

ZipfianSampler::ZipfianSampler(double theta, std::uint64_t n) : theta_(theta), n_(n) {
  if (!(theta > 0.0)) throw Error("zipfian exponent must be positive");
  if (n == 0) throw Error("zipfian domain must be non-empty");
  h_integral_x1_ = h_integral(1.5) - 1.0;
  h_integral_n_ = h_integral(static_cast<double>(n) + 0.5);
  s_ = 2.0 - h_integral_inverse(h_integral(2.5) - h(2.0));
}

double ZipfianSampler::h(double x) const { return std::exp(-theta_ * std::log(x)); }

double ZipfianSampler::h_integral(double x) const {
  const double log_x = std::log(x);
  return helper2((1.0 - theta_) * log_x) * log_x;
}

double ZipfianSampler::h_integral_inverse(double x) const {
  double t = x * (1.0 - theta_);
  if (t < -1.0) t = -1.0;  // numerical guard
  return std::exp(helper1(t) * x);
}

std::uint64_t ZipfianSampler::operator()(Rng& rng) const {
  if (n_ == 1) return 1;
  while (true) {
    const double u = h_integral_n_ + uniform01(rng) * (h_integral_x1_ - h_integral_n_);
    const double x = h_integral_inverse(u);
    double k = std::floor(x + 0.5);
    if (k < 1.0) {
      k = 1.0;
    } else if (k > static_cast<double>(n_)) {
      k = static_cast<double>(n_);
    }
    if (k - x <= s_ || u >= h_integral(k + 0.5) - h(k)) return static_cast<std::uint64_t>(k);
  }
}

std::uint64_t zipfian_sample(Rng& rng, double theta, std::uint64_t n) {
  return ZipfianSampler(theta, n)(rng);
}

// ---------------------------------------------------------------------------
// Key spaces

namespace {

double normal01(Rng& rng) {
  // Box-Muller on our own uniforms keeps streams portable.
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

struct Cluster {
  double cx;
  double cy;
};

constexpr std::uint32_t kClusters = 8;

}  // namespace

KeySpace make_key_space(IndexKind kind, DataDistribution dist, std::uint64_t record_count, std::uint64_t seed) {
  if (record_count == 0) throw Error("degenerate key domain: record_count = 0");
  KeySpace ks;
  ks.kind = kind;
  Rng rng(mix_seed(seed, 0xda7a));

  if (kind == IndexKind::bplus) {
    const std::uint64_t span = record_count * kDenseKeyStride;
    ks.domain_lo = 0;
    ks.domain_hi = span;
    if (dist == DataDistribution::dense) {
      ks.keys.resize(record_count);
      for (std::uint64_t i = 0; i < record_count; ++i) ks.keys[i] = i * kDenseKeyStride;
      return ks;
    }
    std::vector<Cluster> centers(kClusters);
    for (auto& c : centers) c.cx = uniform01(rng) * static_cast<double>(span);
    const double sigma = static_cast<double>(span) / 64.0;
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(record_count * 2);
    while (ks.keys.size() < record_count) {
      const auto& c = centers[uniform_index(rng, kClusters)];
      const double v = std::clamp(c.cx + sigma * normal01(rng), 0.0, static_cast<double>(span - 1));
      const auto key = static_cast<std::uint64_t>(v);
      if (seen.insert(key).second) ks.keys.push_back(key);
    }
    std::sort(ks.keys.begin(), ks.keys.end());
    return ks;
  }

  ks.domain_lo = 0;
  ks.domain_hi = static_cast<std::uint64_t>(kSpatialSide) * kSpatialSide;
  std::vector<Cluster> centers(kClusters);
  for (auto& c : centers) {
    c.cx = uniform01(rng) * kSpatialSide;
    c.cy = uniform01(rng) * kSpatialSide;
  }
  const double sigma = kSpatialSide / 32.0;
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(record_count * 2);
  std::vector<std::pair<std::uint64_t, Point2>> items;
  items.reserve(record_count);
  while (items.size() < record_count) {
    Point2 p;
    if (dist == DataDistribution::dense) {
      p = Point2{static_cast<std::uint32_t>(uniform_index(rng, kSpatialSide)),
                 static_cast<std::uint32_t>(uniform_index(rng, kSpatialSide))};
    } else {
      const auto& c = centers[uniform_index(rng, kClusters)];
      const double max = kSpatialSide - 1;
      p = Point2{static_cast<std::uint32_t>(std::clamp(c.cx + sigma * normal01(rng), 0.0, max)),
                 static_cast<std::uint32_t>(std::clamp(c.cy + sigma * normal01(rng), 0.0, max))};
    }
    const auto h = hilbert_index(p);
    if (seen.insert(h).second) items.emplace_back(h, p);
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  ks.keys.reserve(record_count);
  ks.points.reserve(record_count);
  for (const auto& [h, p] : items) {
    ks.keys.push_back(h);
    ks.points.push_back(p);
  }
  return ks;
}

// ---------------------------------------------------------------------------
// Specs

void WorkloadSpec::validate() const {
  for (double f : {lookup_fraction, insert_fraction, scan_fraction}) {
    if (f < 0.0 || f > 1.0) throw Error("workload mix proportions must lie in [0, 1]");
  }
  if (std::abs(lookup_fraction + insert_fraction + scan_fraction - 1.0) > 1e-9) {
    throw Error("workload mix proportions must sum to 1");
  }
  if (key_distribution == KeyDistribution::zipfian && !(zipf_theta > 0.0)) {
    throw Error("zipfian exponent must be positive");
  }
  if (!(scan_selectivity_max > 0.0 && scan_selectivity_max <= 1.0)) {
    throw Error("scan selectivity must lie in (0, 1]");
  }
  if (record_count == 0) throw Error("degenerate key domain: record_count = 0");
}

Rect Query::rect() const {
  const std::uint64_t side = kind == QueryKind::scan ? std::max<std::uint64_t>(scan_length, 1) : 1;
  const auto x1 = std::min<std::uint64_t>(point.x + side, kSpatialSide);
  const auto y1 = std::min<std::uint64_t>(point.y + side, kSpatialSide);
  return Rect{point.x, point.y, static_cast<std::uint32_t>(x1), static_cast<std::uint32_t>(y1)};
}

const std::vector<std::string>& workload_names() {
  static const std::vector<std::string> names = {"rw50", "lookup100", "scan95", "mixed50", "clustered-rw50",
                                                 "rscan100"};
  return names;
}

WorkloadSpec canned_workload(std::string_view name) {
  WorkloadSpec s;
  s.name = std::string(name);
  if (name == "rw50") {
    s.lookup_fraction = 0.5;
    s.insert_fraction = 0.5;
  } else if (name == "lookup100") {
    s.lookup_fraction = 1.0;
    s.insert_fraction = 0.0;
    s.key_distribution = KeyDistribution::uniform;
  } else if (name == "scan95") {
    s.lookup_fraction = 0.0;
    s.insert_fraction = 0.05;
    s.scan_fraction = 0.95;
    s.scan_selectivity_max = 0.002;
  } else if (name == "mixed50") {
    s.lookup_fraction = 0.5;
    s.insert_fraction = 0.0;
    s.scan_fraction = 0.5;
    s.scan_selectivity_max = 0.002;
  } else if (name == "clustered-rw50") {
    s.lookup_fraction = 0.5;
    s.insert_fraction = 0.5;
    s.data_distribution = DataDistribution::clustered;
  } else if (name == "rscan100") {
    s.lookup_fraction = 0.0;
    s.insert_fraction = 0.0;
    s.scan_fraction = 1.0;
    s.key_distribution = KeyDistribution::uniform;
    s.scan_selectivity_max = 0.001;
    s.index_kind = IndexKind::rtree2d;
  } else {
    throw Error("unknown workload '" + std::string(name) + "'");
  }
  return s;
}

nlohmann::json to_json(const WorkloadSpec& s) {
  return nlohmann::json{
      {"name", s.name},
      {"mix", {{"lookup", s.lookup_fraction}, {"insert", s.insert_fraction}, {"scan", s.scan_fraction}}},
      {"key_distribution", s.key_distribution == KeyDistribution::zipfian ? "zipfian" : "uniform"},
      {"zipf_theta", s.zipf_theta},
      {"scan_selectivity_max", s.scan_selectivity_max},
      {"data_distribution", s.data_distribution == DataDistribution::dense ? "dense" : "clustered"},
      {"record_count", s.record_count},
      {"query_count", s.query_count},
      {"seed", s.seed},
      {"record_seed", s.record_seed},
      {"index", std::string(to_string(s.index_kind))},
  };
}

WorkloadSpec workload_from_json(const nlohmann::json& j) {
  WorkloadSpec s = j.contains("base") ? canned_workload(j.at("base").get<std::string>()) : WorkloadSpec{};
  s.name = j.value("name", s.name);
  if (j.contains("mix")) {
    const auto& m = j.at("mix");
    s.lookup_fraction = m.value("lookup", 0.0);
    s.insert_fraction = m.value("insert", 0.0);
    s.scan_fraction = m.value("scan", 0.0);
  }
  if (j.contains("key_distribution")) {
    const auto d = j.at("key_distribution").get<std::string>();
    if (d == "zipfian") {
      s.key_distribution = KeyDistribution::zipfian;
    } else if (d == "uniform") {
      s.key_distribution = KeyDistribution::uniform;
    } else {
      throw Error("unknown key distribution '" + d + "'");
    }
  }
  s.zipf_theta = j.value("zipf_theta", s.zipf_theta);
  s.scan_selectivity_max = j.value("scan_selectivity_max", s.scan_selectivity_max);
  if (j.contains("data_distribution")) {
    const auto d = j.at("data_distribution").get<std::string>();
    if (d == "dense") {
      s.data_distribution = DataDistribution::dense;
    } else if (d == "clustered") {
      s.data_distribution = DataDistribution::clustered;
    } else {
      throw Error("unknown data distribution '" + d + "'");
    }
  }
  s.record_count = j.value("record_count", s.record_count);
  s.query_count = j.value("query_count", s.query_count);
  s.seed = j.value("seed", s.seed);
  s.record_seed = j.value("record_seed", s.record_seed);
  if (j.contains("index")) s.index_kind = parse_index_kind(j.at("index").get<std::string>());
  s.validate();
  return s;
}

WorkloadSpec load_workload(const std::string& name_or_path) {
  const auto& names = workload_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return canned_workload(name_or_path);
  std::ifstream in(name_or_path);
  if (!in) throw Error("unknown workload or unreadable file '" + name_or_path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed workload file '" + name_or_path + "': " + e.what());
  }
  return workload_from_json(j);
}

// ---------------------------------------------------------------------------
// Generation

WorkloadGenerator::WorkloadGenerator(const WorkloadSpec& spec, const KeySpace& keys)
    : spec_(spec),
      keys_(&keys),
      rng_(mix_seed(spec.seed, 0x9e11)),
      zipf_(spec.key_distribution == KeyDistribution::zipfian ? spec.zipf_theta : 1.0, std::max<std::uint64_t>(keys.size(), 1)) {
  spec_.validate();
  if (keys.size() == 0) throw Error("degenerate key domain: no records");
  if (keys.kind != spec.index_kind) throw Error("key space kind does not match workload index kind");
  if (spec_.key_distribution == KeyDistribution::zipfian) {
    // Hot ranks are scattered over the key space with a seeded permutation.
    hot_permutation_.resize(keys.size());
    std::iota(hot_permutation_.begin(), hot_permutation_.end(), 0u);
    Rng perm_rng(mix_seed(spec.seed, 0x5eed));
    for (std::size_t i = hot_permutation_.size(); i > 1; --i) {
      std::swap(hot_permutation_[i - 1], hot_permutation_[uniform_index(perm_rng, i)]);
    }
  }
}

std::uint64_t WorkloadGenerator::pick_record() {
  if (spec_.key_distribution == KeyDistribution::uniform) return uniform_index(rng_, keys_->size());
  return hot_permutation_[zipf_(rng_) - 1];
}

Query WorkloadGenerator::next() {
  Query q;
  q.arrival_index = produced_++;
  const double draw = uniform01(rng_);
  if (draw < spec_.lookup_fraction) {
    q.kind = QueryKind::lookup;
  } else if (draw < spec_.lookup_fraction + spec_.insert_fraction) {
    q.kind = QueryKind::insert;
  } else {
    q.kind = QueryKind::scan;
  }
  // Guard against rounding when a fraction is exactly zero.
  if (q.kind == QueryKind::scan && spec_.scan_fraction == 0.0) {
    q.kind = spec_.insert_fraction > 0.0 ? QueryKind::insert : QueryKind::lookup;
  }

  const std::uint64_t rec = pick_record();
  const KeySpace& ks = *keys_;

  if (ks.kind == IndexKind::bplus) {
    q.key = ks.keys[rec];
    if (q.kind == QueryKind::insert) {
      const std::uint64_t next_key = rec + 1 < ks.size() ? ks.keys[rec + 1] : ks.domain_hi;
      const std::uint64_t gap = next_key - q.key;
      if (gap > 1) q.key += 1 + uniform_index(rng_, gap - 1);
    } else if (q.kind == QueryKind::scan) {
      const double span = static_cast<double>(ks.domain_hi - ks.domain_lo);
      auto len = static_cast<std::uint64_t>(std::ceil(uniform01(rng_) * spec_.scan_selectivity_max * span));
      len = std::max<std::uint64_t>(len, 1);
      q.scan_length = std::min(len, ks.domain_hi - q.key);
    }
    return q;
  }

  q.point = ks.points[rec];
  if (q.kind == QueryKind::insert) {
    // A fresh point near an existing record.
    const auto jitter = [&](std::uint32_t v) {
      const auto delta = static_cast<std::int64_t>(uniform_index(rng_, 65)) - 32;
      return static_cast<std::uint32_t>(std::clamp<std::int64_t>(v + delta, 0, kSpatialSide - 1));
    };
    q.point = Point2{jitter(q.point.x), jitter(q.point.y)};
  } else if (q.kind == QueryKind::scan) {
    const double side = std::sqrt(uniform01(rng_) * spec_.scan_selectivity_max) * kSpatialSide;
    q.scan_length = std::max<std::uint64_t>(static_cast<std::uint64_t>(std::ceil(side)), 1);
    q.scan_length = std::min<std::uint64_t>(
        q.scan_length, std::min<std::uint64_t>(kSpatialSide - q.point.x, kSpatialSide - q.point.y));
  }
  q.key = hilbert_index(q.point);
  return q;
}

std::vector<Query> generate_workload(const WorkloadSpec& spec, const KeySpace& keys) {
  WorkloadGenerator gen(spec, keys);
  std::vector<Query> out;
  out.reserve(spec.query_count);
  for (std::uint64_t i = 0; i < spec.query_count; ++i) out.push_back(gen.next());
  return out;
}

KeySpace key_space_for(const WorkloadSpec& spec) {
  return make_key_space(spec.index_kind, spec.data_distribution, spec.record_count, spec.record_seed);
}

std::vector<Query> generate_workload(const WorkloadSpec& spec) {
  spec.validate();
  const KeySpace keys = key_space_for(spec);
  return generate_workload(spec, keys);
}

}  // namespace numalab
