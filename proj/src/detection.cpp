#include "flf/detection.hpp"

#include <algorithm>
#include <stdexcept>

namespace flf {

std::string to_string(DetectionMode mode) {
  return mode == DetectionMode::kTwoScore ? "TwoScore" : "SingleScore";
}

std::string to_string(ProbeVerdict v) {
  return v == ProbeVerdict::kTargetInput ? "TargetInput" : "NonTargetInput";
}

ScaledScores scale_scores(std::span<const InfluencePair> pairs) {
  if (pairs.size() < 2) throw std::invalid_argument("scale_scores: need at least two clients");
  const auto [smin, smax] = std::minmax_element(pairs.begin(), pairs.end(),
                                                [](const auto& a, const auto& b) { return a.s < b.s; });
  const auto [pmin, pmax] = std::minmax_element(
      pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.s_prime < b.s_prime; });
  const double s_span = smax->s - smin->s;
  const double p_span = pmax->s_prime - pmin->s_prime;
  ScaledScores out;
  out.s_span_zero = !(s_span > 0.0);
  out.sp_span_zero = !(p_span > 0.0);
  for (const auto& p : pairs)
    out.points.push_back({p.client, out.s_span_zero ? 0.0 : p.s / s_span,
                          out.sp_span_zero ? 0.0 : p.s_prime / p_span});
  return out;
}

namespace {

// Labels per client (first copy when duplicated) plus notes about the clustering.
struct Clustering {
  std::vector<int> labels;
  bool duplicated = false;
  std::vector<std::string> notes;
};

Clustering cluster(const std::vector<std::vector<double>>& coords, std::span<const InfluencePair> pairs,
                   std::size_t mcs) {
  Clustering c;
  const std::size_t n = coords.size();
  std::vector<std::vector<double>> pts = coords;
  if (n < 2 * mcs) {
    c.duplicated = true;
    pts.insert(pts.end(), coords.begin(), coords.end());
  }
  const auto a = hdbscan(pts, {mcs, mcs});
  c.labels.assign(a.labels.begin(), a.labels.begin() + static_cast<std::ptrdiff_t>(n));
  if (c.duplicated)
    for (std::size_t i = 0; i < n; ++i)
      if (a.labels[i] != a.labels[i + n])
        c.notes.push_back("client " + std::to_string(pairs[i].client) +
                          ": duplicated copies were labeled differently; using the first copy");
  return c;
}

DetectionReport summarize(std::span<const InfluencePair> pairs, std::span<const int> labels,
                          std::size_t mcs, DetectionMode mode) {
  if (labels.size() != pairs.size()) throw std::invalid_argument("detection: one label per client expected");
  DetectionReport r;
  r.mode = mode;
  r.min_cluster_size = mcs;
  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  r.clusters.resize(static_cast<std::size_t>(max_label + 1));
  for (std::size_t k = 0; k < r.clusters.size(); ++k) r.clusters[k].id = static_cast<int>(k);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (labels[i] == kNoise) {
      r.outliers.push_back({p.client, p.s, p.s_prime, std::nullopt, false});
      continue;
    }
    if (labels[i] < 0) throw std::invalid_argument("detection: invalid cluster label");
    auto& c = r.clusters[static_cast<std::size_t>(labels[i])];
    c.members.push_back(p.client);
    c.sum_s += p.s;
    c.sum_s_prime += p.s_prime;
  }
  r.clusters.erase(std::remove_if(r.clusters.begin(), r.clusters.end(),
                                  [](const ClusterSummary& c) { return c.members.empty(); }),
                   r.clusters.end());
  for (auto& c : r.clusters) {
    c.mean_s = c.sum_s / static_cast<double>(c.members.size());
    c.potential = c.mean_s > 0.0;
    if (c.potential) c.ratio = c.sum_s_prime / c.sum_s;
  }
  return r;
}

std::vector<std::vector<double>> coords_of(const ScaledScores& sc, bool two_dims) {
  std::vector<std::vector<double>> pts;
  pts.reserve(sc.points.size());
  for (const auto& p : sc.points)
    pts.push_back(two_dims ? std::vector<double>{p.u, p.v} : std::vector<double>{p.u});
  return pts;
}

void finish(DetectionReport& r) {
  std::sort(r.predicted.begin(), r.predicted.end());
  r.predicted.erase(std::unique(r.predicted.begin(), r.predicted.end()), r.predicted.end());
}

}  // namespace

DetectionReport apply_ratio_rule(std::span<const InfluencePair> pairs, std::span<const int> labels,
                                 std::size_t min_cluster_size) {
  auto r = summarize(pairs, labels, min_cluster_size, DetectionMode::kTwoScore);
  double num = 0.0, den = 0.0;
  bool any_potential = false;
  for (const auto& c : r.clusters)
    if (c.potential) {
      any_potential = true;
      num += c.sum_s_prime;
      den += c.sum_s;
    }
  if (!any_potential) {
    r.notes.push_back("no cluster has a positive mean s; threshold undefined and no client flagged");
    return r;
  }
  if (!(den > 0.0)) {
    r.notes.push_back("sum of s over potential clusters is not positive; threshold undefined");
    return r;
  }
  r.threshold = num / den;
  for (auto& c : r.clusters) {
    if (!c.potential) continue;
    c.malicious = *c.ratio <= *r.threshold;
    if (c.malicious) r.predicted.insert(r.predicted.end(), c.members.begin(), c.members.end());
  }
  for (auto& o : r.outliers) {
    if (!(o.s > 0.0)) {
      r.notes.push_back("outlier " + std::to_string(o.client) + " has s <= 0; treated as benign");
      continue;
    }
    o.ratio = o.s_prime / o.s;
    o.malicious = *o.ratio <= *r.threshold;
    if (o.malicious) r.predicted.push_back(o.client);
  }
  finish(r);
  return r;
}

DetectionReport apply_single_score_rule(std::span<const InfluencePair> pairs, std::span<const int> labels,
                                        std::size_t min_cluster_size) {
  auto r = summarize(pairs, labels, min_cluster_size, DetectionMode::kSingleScore);
  for (auto& c : r.clusters) {
    c.malicious = c.potential;
    if (c.malicious) r.predicted.insert(r.predicted.end(), c.members.begin(), c.members.end());
  }
  finish(r);
  return r;
}

DetectionReport detect_malicious(std::span<const InfluencePair> pairs, std::size_t min_cluster_size) {
  const auto scaled = scale_scores(pairs);
  const auto cl = cluster(coords_of(scaled, true), pairs, min_cluster_size);
  auto r = apply_ratio_rule(pairs, cl.labels, min_cluster_size);
  r.duplicated = cl.duplicated;
  r.s_span_zero = scaled.s_span_zero;
  r.sp_span_zero = scaled.sp_span_zero;
  r.notes.insert(r.notes.begin(), cl.notes.begin(), cl.notes.end());
  return r;
}

DetectionReport detect_single_score(std::span<const InfluencePair> pairs, std::size_t min_cluster_size) {
  const auto scaled = scale_scores(pairs);
  const auto cl = cluster(coords_of(scaled, false), pairs, min_cluster_size);
  auto r = apply_single_score_rule(pairs, cl.labels, min_cluster_size);
  r.duplicated = cl.duplicated;
  r.s_span_zero = scaled.s_span_zero;
  r.sp_span_zero = scaled.sp_span_zero;
  r.notes.insert(r.notes.begin(), cl.notes.begin(), cl.notes.end());
  return r;
}

ProbeClassification classify_probe(std::span<const InfluencePair> pairs, std::size_t min_cluster_size,
                                   double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("classify_probe: alpha must lie in (0, 1)");
  ProbeClassification out;
  out.report = detect_malicious(pairs, min_cluster_size);
  bool all_within = true;
  for (const auto& c : out.report.clusters) {
    if (!c.potential) continue;
    out.potential_ratios.push_back(*c.ratio);
    if (*c.ratio < alpha || *c.ratio > 1.0 / alpha) all_within = false;
  }
  out.verdict = all_within ? ProbeVerdict::kNonTargetInput : ProbeVerdict::kTargetInput;
  return out;
}

}  // namespace flf
