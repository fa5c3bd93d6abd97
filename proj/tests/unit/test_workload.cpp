#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "numalab/error.hpp"
#include "numalab/workload.hpp"

using namespace numalab;

namespace {

// Exact Zipf mass by direct summation.
std::vector<double> zipf_mass(double theta, std::uint64_t n) {
  std::vector<double> p(n);
  double z = 0.0;
  for (std::uint64_t k = 1; k <= n; ++k) z += std::pow(static_cast<double>(k), -theta);
  for (std::uint64_t k = 1; k <= n; ++k) p[k - 1] = std::pow(static_cast<double>(k), -theta) / z;
  return p;
}

std::vector<double> empirical(double theta, std::uint64_t n, std::size_t samples, std::uint64_t seed) {
  ZipfianSampler zipf(theta, n);
  Rng rng(seed);
  std::vector<double> freq(n, 0.0);
  for (std::size_t i = 0; i < samples; ++i) {
    const auto k = zipf(rng);
    EXPECT_GE(k, 1u);
    EXPECT_LE(k, n);
    freq[k - 1] += 1.0;
  }
  for (auto& f : freq) f /= static_cast<double>(samples);
  return freq;
}

}  // namespace

TEST(Zipf, SingletonDomainAlwaysOne) {
  ZipfianSampler zipf(0.99, 1);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(zipf(rng), 1u);
}

TEST(Zipf, HeadRatioMatchesExactMass) {
  const auto exact = zipf_mass(0.99, 100);
  const auto freq = empirical(0.99, 100, 1'000'000, 42);
  const double expected = exact[0] / exact[1];
  EXPECT_NEAR(freq[0] / freq[1], expected, 0.05 * expected);
}

TEST(Zipf, SmallDomainCdfWithinTotalVariation) {
  const auto exact = zipf_mass(0.99, 10);
  const auto freq = empirical(0.99, 10, 1'000'000, 7);
  double tv = 0.0;
  for (std::size_t k = 0; k < exact.size(); ++k) tv += std::abs(exact[k] - freq[k]);
  EXPECT_LT(0.5 * tv, 0.01);
}

TEST(Zipf, LargeDomainStaysInRange) {
  ZipfianSampler zipf(1.2, 1'000'000'000ULL);
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const auto k = zipf(rng);
    ASSERT_GE(k, 1u);
    ASSERT_LE(k, 1'000'000'000ULL);
  }
}

namespace {

double fraction(const std::vector<Query>& qs, QueryKind kind) {
  return static_cast<double>(std::count_if(qs.begin(), qs.end(), [&](const Query& q) { return q.kind == kind; })) /
         static_cast<double>(qs.size());
}

}  // namespace

TEST(Workload, ReadWriteMixIsHalfLookups) {
  const auto qs = generate_workload(canned_workload("rw50"));
  ASSERT_EQ(qs.size(), 100'000u);
  EXPECT_NEAR(fraction(qs, QueryKind::lookup), 0.5, 0.01);
  EXPECT_NEAR(fraction(qs, QueryKind::insert), 0.5, 0.01);
}

TEST(Workload, PureLookupUniform) {
  auto spec = canned_workload("lookup100");
  spec.key_distribution = KeyDistribution::uniform;
  const auto qs = generate_workload(spec);
  EXPECT_EQ(fraction(qs, QueryKind::lookup), 1.0);
}

TEST(Workload, ScanHeavyMix) {
  const auto qs = generate_workload(canned_workload("scan95"));
  EXPECT_NEAR(fraction(qs, QueryKind::scan), 0.95, 0.01);
}

TEST(Workload, StreamIsReplayable) {
  const auto spec = canned_workload("mixed50");
  EXPECT_EQ(generate_workload(spec), generate_workload(spec));
  auto other = spec;
  other.seed += 1;
  EXPECT_NE(generate_workload(spec), generate_workload(other));
}

TEST(Workload, ArrivalIndicesAreSequential) {
  auto spec = canned_workload("rw50");
  spec.query_count = 1000;
  const auto qs = generate_workload(spec);
  for (std::size_t i = 0; i < qs.size(); ++i) EXPECT_EQ(qs[i].arrival_index, i);
}

TEST(Workload, KeysInsideDomain) {
  for (const auto& name : workload_names()) {
    auto spec = canned_workload(name);
    spec.query_count = 5000;
    spec.record_count = 5000;
    const auto keys = key_space_for(spec);
    ASSERT_TRUE(std::is_sorted(keys.keys.begin(), keys.keys.end())) << name;
    ASSERT_EQ(std::adjacent_find(keys.keys.begin(), keys.keys.end()), keys.keys.end()) << name;
    for (const auto& q : generate_workload(spec, keys)) {
      ASSERT_GE(q.key, keys.domain_lo) << name;
      ASSERT_LT(q.key, keys.domain_hi) << name;
    }
  }
}

TEST(Workload, SpatialKeysAreHilbertIndices) {
  const auto keys = make_key_space(IndexKind::rtree2d, DataDistribution::dense, 2000, 5);
  ASSERT_EQ(keys.points.size(), keys.keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) EXPECT_EQ(keys.keys[i], hilbert_index(keys.points[i]));
}

TEST(Workload, JsonRoundTrip) {
  const auto spec = canned_workload("scan95");
  const auto back = workload_from_json(to_json(spec));
  EXPECT_EQ(to_json(back), to_json(spec));
}

TEST(Workload, InvalidMixRejected) {
  auto spec = canned_workload("rw50");
  spec.lookup_fraction = 0.9;
  EXPECT_THROW(spec.validate(), Error);
  EXPECT_THROW(canned_workload("nope"), Error);
}
