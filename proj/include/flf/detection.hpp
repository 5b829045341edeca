#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flf/hdbscan.hpp"
#include "flf/influence.hpp"

namespace flf {

struct ScaledPoint {
  ClientId client = 0;
  double u = 0.0;  // s  / span(s)
  double v = 0.0;  // s' / span(s')
};

struct ScaledScores {
  std::vector<ScaledPoint> points;
  bool s_span_zero = false;   // every u forced to 0
  bool sp_span_zero = false;  // every v forced to 0
};

/// Divides each axis by its population span (max - min). A zero span sets
/// that coordinate to 0 for every client. Needs at least two clients.
ScaledScores scale_scores(std::span<const InfluencePair> pairs);

enum class DetectionMode { kTwoScore, kSingleScore };
std::string to_string(DetectionMode mode);

struct ClusterSummary {
  int id = 0;
  std::vector<ClientId> members;
  double sum_s = 0.0;
  double sum_s_prime = 0.0;
  double mean_s = 0.0;
  bool potential = false;       // mean s > 0
  std::optional<double> ratio;  // sum s' / sum s, potential clusters only
  bool malicious = false;
};

struct OutlierSummary {
  ClientId client = 0;
  double s = 0.0;
  double s_prime = 0.0;
  std::optional<double> ratio;  // s' / s, only when s > 0 and a threshold exists
  bool malicious = false;
};

/// Every intermediate quantity of one detection, kept for audit.
struct DetectionReport {
  DetectionMode mode = DetectionMode::kTwoScore;
  std::size_t min_cluster_size = 0;
  bool duplicated = false;  // small-population workaround was applied
  bool s_span_zero = false;
  bool sp_span_zero = false;
  std::vector<ClusterSummary> clusters;
  std::vector<OutlierSummary> outliers;
  std::optional<double> threshold;
  std::vector<ClientId> predicted;  // ascending
  std::vector<std::string> notes;   // division guards and other policy events
};

/// Clusters the span-scaled pairs with HDBSCAN and applies the ratio rule:
///   potential clusters: mean raw s > 0
///   threshold: sum s' / sum s over all members of all potential clusters
///   a potential cluster is malicious iff its own sum s' / sum s <= threshold
///   an outlier is malicious iff s > 0 and s' / s <= threshold
/// With fewer than 2 * min_cluster_size clients every point is duplicated
/// once before clustering; sums and the prediction use each client once.
DetectionReport detect_malicious(std::span<const InfluencePair> pairs, std::size_t min_cluster_size);

/// The decision stage of detect_malicious on an existing clustering:
/// `labels[i]` is the cluster id of pairs[i] or kNoise.
DetectionReport apply_ratio_rule(std::span<const InfluencePair> pairs, std::span<const int> labels,
                                 std::size_t min_cluster_size);

/// The decision stage of detect_single_score on an existing clustering.
DetectionReport apply_single_score_rule(std::span<const InfluencePair> pairs, std::span<const int> labels,
                                        std::size_t min_cluster_size);

/// Target-probe-only variant: clusters on the scaled s axis alone and flags
/// every cluster whose mean s is positive.
DetectionReport detect_single_score(std::span<const InfluencePair> pairs, std::size_t min_cluster_size);

enum class ProbeVerdict { kTargetInput, kNonTargetInput };
std::string to_string(ProbeVerdict v);

struct ProbeClassification {
  ProbeVerdict verdict = ProbeVerdict::kNonTargetInput;
  std::vector<double> potential_ratios;
  DetectionReport report;
};

/// A misclassified probe is NonTargetInput when every potential cluster's
/// ratio lies in [alpha, 1/alpha] (inclusive), or when no potential cluster
/// exists; otherwise TargetInput.
ProbeClassification classify_probe(std::span<const InfluencePair> pairs, std::size_t min_cluster_size,
                                   double alpha);

}  // namespace flf
