#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace flf {

inline constexpr int kNoise = -1;

struct ClusterAssignment {
  std::vector<int> labels;  // per input point: cluster id in [0, num_clusters) or kNoise
  std::size_t num_clusters = 0;
  std::vector<std::size_t> outliers;  // indices labeled kNoise, ascending
  std::vector<double> stability;      // per cluster id

  std::vector<std::vector<std::size_t>> members() const;
};

struct HdbscanParams {
  std::size_t min_cluster_size = 7;
  std::size_t min_samples = 0;  // 0: same as min_cluster_size
};

/// HDBSCAN* with Euclidean distance.
///
/// core(p)   = distance to the min_samples-th nearest point, counting p itself
/// mreach    = max(core(a), core(b), d(a, b))
/// The minimum spanning tree of the mutual-reachability graph (Kruskal, ties
/// broken by (smaller id, larger id)) is turned into a level hierarchy in
/// which all edges of equal weight are removed at once, so simultaneous
/// splits become one multi-way split and the result does not depend on how
/// ties are ordered. The hierarchy is condensed with min_cluster_size and
/// clusters are chosen by excess of mass; the root is only chosen when it
/// never splits into two cluster-sized children, in which case its members
/// are the points that remain until its last level.
///
/// Cluster ids are numbered by their smallest member index.
ClusterAssignment hdbscan(std::span<const std::vector<double>> points, const HdbscanParams& params);

}  // namespace flf
