#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "flf/detection.hpp"
#include "support.hpp"

using namespace flf;

namespace {

std::vector<InfluencePair> ab_pairs() {
  return {{0, 4, 1, 1}, {1, 6, 1, 1}, {2, 5, 5, 1}, {3, 5, 6, 1}};
}

double dist(const ScaledPoint& a, const ScaledPoint& b) { return std::hypot(a.u - b.u, a.v - b.v); }

// Malicious clients sit at large s with small s'; benign clients sit at
// slightly negative s with s' tracking s.
std::vector<InfluencePair> synthetic_population(Rng& rng, std::size_t n, std::size_t m) {
  std::vector<InfluencePair> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    InfluencePair p;
    p.client = static_cast<ClientId>(i);
    p.rounds_counted = 1;
    if (i < m) {
      p.s = 1.0 + 0.05 * rng.normal();
      p.s_prime = 0.1 + 0.02 * rng.normal();
    } else {
      p.s = -0.05 + 0.1 * rng.normal();
      p.s_prime = p.s + 0.01 * rng.normal();
    }
    pairs.push_back(p);
  }
  return pairs;
}

}  // namespace

TEST_CASE("scale_scores hand example") {
  const std::vector<InfluencePair> pairs{{0, 0, 0, 1}, {1, 10, 5, 1}};
  const auto sc = scale_scores(pairs);
  CHECK(sc.points[0].u == 0.0);
  CHECK(sc.points[0].v == 0.0);
  CHECK(sc.points[1].u == 1.0);
  CHECK(sc.points[1].v == 1.0);
  CHECK(dist(sc.points[0], sc.points[1]) == doctest::Approx(1.41421356).epsilon(1e-8));
  CHECK_FALSE(sc.s_span_zero);
  CHECK_THROWS(scale_scores(std::span(pairs).first(1)));
}

TEST_CASE("zero span is flagged and zeroes the axis") {
  const std::vector<InfluencePair> pairs{{0, 3, 1, 1}, {1, 3, 2, 1}, {2, 3, 4, 1}};
  const auto sc = scale_scores(pairs);
  CHECK(sc.s_span_zero);
  CHECK_FALSE(sc.sp_span_zero);
  for (const auto& p : sc.points) CHECK(p.u == 0.0);
  CHECK(sc.points[2].v == doctest::Approx(4.0 / 3.0));
}

TEST_CASE("affine maps of one axis leave scaled distances unchanged") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<InfluencePair> pairs;
    for (ClientId i = 0; i < 20; ++i) pairs.push_back({i, rng.normal(), rng.normal(), 1});
    const double a = rng.uniform(0.1, 10.0), b = rng.uniform(-5.0, 5.0);
    auto moved = pairs;
    for (auto& p : moved) (trial % 2 == 0 ? p.s : p.s_prime) = a * (trial % 2 == 0 ? p.s : p.s_prime) + b;
    const auto x = scale_scores(pairs), y = scale_scores(moved);
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = i + 1; j < 20; ++j)
        CHECK(dist(y.points[i], y.points[j]) == doctest::Approx(dist(x.points[i], x.points[j])).epsilon(1e-9));
  }
}

TEST_CASE("ratio rule hand trace") {
  const auto pairs = ab_pairs();
  const std::vector<int> labels{0, 0, 1, 1};
  const auto r = apply_ratio_rule(pairs, labels, 2);
  REQUIRE(r.threshold.has_value());
  CHECK(*r.threshold == doctest::Approx(0.65).epsilon(1e-15));
  REQUIRE(r.clusters.size() == 2);
  CHECK(*r.clusters[0].ratio == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(*r.clusters[1].ratio == doctest::Approx(1.1).epsilon(1e-15));
  CHECK(r.clusters[0].malicious);
  CHECK_FALSE(r.clusters[1].malicious);
  CHECK(r.predicted == std::vector<ClientId>{0, 1});
  CHECK(r.mode == DetectionMode::kTwoScore);
}

TEST_CASE("single-score rule flags both positive clusters") {
  const auto pairs = ab_pairs();
  const std::vector<int> labels{0, 0, 1, 1};
  const auto r = apply_single_score_rule(pairs, labels, 2);
  CHECK(r.predicted == std::vector<ClientId>{0, 1, 2, 3});
  CHECK(r.mode == DetectionMode::kSingleScore);
}

TEST_CASE("outliers use the cluster-derived threshold") {
  std::vector<InfluencePair> pairs = ab_pairs();
  pairs.push_back({4, 10, 1, 1});   // ratio 0.1 <= 0.65
  pairs.push_back({5, 10, 9, 1});   // ratio 0.9 > 0.65
  pairs.push_back({6, -3, -9, 1});  // s <= 0
  const std::vector<int> labels{0, 0, 1, 1, kNoise, kNoise, kNoise};
  const auto r = apply_ratio_rule(pairs, labels, 2);
  CHECK(r.predicted == std::vector<ClientId>{0, 1, 4});
  REQUIRE(r.outliers.size() == 3);
  CHECK(r.outliers[0].malicious);
  CHECK_FALSE(r.outliers[1].malicious);
  CHECK_FALSE(r.outliers[2].ratio.has_value());
}

TEST_CASE("no positive cluster means nothing is flagged") {
  const std::vector<InfluencePair> pairs{{0, -1, 1, 1}, {1, -2, 1, 1}, {2, 1, 0, 1}};
  const std::vector<int> labels{0, 0, kNoise};
  const auto r = apply_ratio_rule(pairs, labels, 2);
  CHECK_FALSE(r.threshold.has_value());
  CHECK(r.predicted.empty());
  CHECK_FALSE(r.notes.empty());
  CHECK(apply_single_score_rule(pairs, labels, 2).predicted.empty());

  Rng rng(2);
  std::vector<InfluencePair> negative;
  for (ClientId i = 0; i < 30; ++i) negative.push_back({i, -std::abs(rng.normal()) - 0.01, rng.normal(), 1});
  CHECK(detect_malicious(negative, 7).predicted.empty());
  CHECK(detect_single_score(negative, 7).predicted.empty());
}

TEST_CASE("synthetic population: malicious group recovered") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pairs = synthetic_population(rng, 100, 20);
    const auto r = detect_malicious(pairs, 7);
    std::vector<ClientId> truth(20);
    for (ClientId i = 0; i < 20; ++i) truth[i] = i;
    CHECK(r.predicted == truth);
    CHECK_FALSE(r.duplicated);
  }
}

TEST_CASE("a weakly positive cluster with negative s' sum is flagged by the rule as written") {
  // Threshold (2 - 0.1) / (10 + 0.2) = 0.186: the weak cluster's ratio -0.5
  // falls below it while the strong cluster's 0.2 does not.
  const std::vector<InfluencePair> pairs{{0, 4, 1, 1}, {1, 6, 1, 1}, {2, 0.1, -0.2, 1}, {3, 0.1, 0.1, 1}};
  const auto r = apply_ratio_rule(pairs, std::vector<int>{0, 0, 1, 1}, 2);
  CHECK(*r.clusters[1].ratio == doctest::Approx(-0.5));
  CHECK(*r.threshold == doctest::Approx(1.9 / 10.2));
  CHECK(r.predicted == std::vector<ClientId>{2, 3});
}

TEST_CASE("flagged clients come from potential clusters or positive outliers") {
  Rng rng(4);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 5 + rng.below(80);
    std::vector<InfluencePair> pairs;
    for (ClientId i = 0; i < n; ++i) pairs.push_back({i, rng.normal(), rng.normal(), 1});
    const auto r = detect_malicious(pairs, 7);
    std::set<ClientId> allowed;
    for (const auto& c : r.clusters)
      if (c.potential) allowed.insert(c.members.begin(), c.members.end());
    for (const auto& o : r.outliers)
      if (o.s > 0) allowed.insert(o.client);
    for (auto id : r.predicted) CHECK(allowed.contains(id));
    CHECK(std::is_sorted(r.predicted.begin(), r.predicted.end()));
    CHECK(std::adjacent_find(r.predicted.begin(), r.predicted.end()) == r.predicted.end());
    CHECK(r.duplicated == (n < 14));
    std::size_t accounted = r.outliers.size();
    for (const auto& c : r.clusters) accounted += c.members.size();
    CHECK(accounted == n);
  }
}

TEST_CASE("small populations are duplicated before clustering") {
  // Eight clients with min cluster size 5: two groups of four only reach the
  // size once every point is duplicated.
  std::vector<InfluencePair> pairs;
  for (ClientId i = 0; i < 4; ++i) pairs.push_back({i, 1.0 + 0.01 * i, 0.1, 1});
  for (ClientId i = 4; i < 8; ++i) pairs.push_back({i, 0.01 * i, 0.01 * i, 1});
  const auto r = detect_malicious(pairs, 5);
  CHECK(r.duplicated);
  std::size_t members = 0;
  for (const auto& c : r.clusters) members += c.members.size();
  CHECK(members + r.outliers.size() == 8);
  CHECK(r.predicted == std::vector<ClientId>{0, 1, 2, 3});
}

TEST_CASE("probe classification boundaries") {
  // Fourteen identical clients form one potential cluster whose ratio is s'/s.
  const auto make = [](double s, double sp) {
    std::vector<InfluencePair> pairs;
    for (ClientId i = 0; i < 14; ++i) pairs.push_back({i, s, sp, 1});
    return pairs;
  };
  auto c = classify_probe(make(5.0, 1.0), 7, 0.2);
  REQUIRE(c.potential_ratios.size() == 1);
  CHECK(c.potential_ratios[0] == 0.2);
  CHECK(c.verdict == ProbeVerdict::kNonTargetInput);
  c = classify_probe(make(1.0, 5.0), 7, 0.2);
  CHECK(c.verdict == ProbeVerdict::kNonTargetInput);
  c = classify_probe(make(20.0, 1.0), 7, 0.2);
  CHECK(c.potential_ratios[0] == 0.05);
  CHECK(c.verdict == ProbeVerdict::kTargetInput);
  c = classify_probe(make(1.0, 5.5), 7, 0.2);
  CHECK(c.verdict == ProbeVerdict::kTargetInput);
  c = classify_probe(make(-1.0, 3.0), 7, 0.2);
  CHECK(c.potential_ratios.empty());
  CHECK(c.verdict == ProbeVerdict::kNonTargetInput);
  CHECK_THROWS(classify_probe(make(1.0, 1.0), 7, 1.0));
  CHECK_THROWS(classify_probe(make(1.0, 1.0), 7, 0.0));
}

TEST_CASE("detection is deterministic") {
  Rng rng(5);
  const auto pairs = synthetic_population(rng, 60, 12);
  const auto a = detect_malicious(pairs, 7), b = detect_malicious(pairs, 7);
  CHECK(a.predicted == b.predicted);
  CHECK(a.threshold == b.threshold);
  CHECK(a.notes == b.notes);
}
