#include "flf/hdbscan.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace flf {

std::vector<std::vector<std::size_t>> ClusterAssignment::members() const {
  std::vector<std::vector<std::size_t>> m(num_clusters);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != kNoise) m[static_cast<std::size_t>(labels[i])].push_back(i);
  return m;
}

namespace {

// Distances this small are treated as coincident points.
constexpr double kMinDistance = 1e-300;

double lambda_of(double d) { return 1.0 / std::max(d, kMinDistance); }

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (a > b) std::swap(a, b);
    parent_[b] = a;
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

struct Edge {
  double weight;
  std::size_t a, b;  // a < b
};

bool edge_less(const Edge& x, const Edge& y) {
  return std::tie(x.weight, x.a, x.b) < std::tie(y.weight, y.a, y.b);
}

// Node of the level hierarchy. Ids below n are the input points.
struct LevelNode {
  double distance = 0.0;
  std::size_t size = 1;
  std::vector<std::size_t> children;
};

std::vector<Edge> minimum_spanning_tree(std::span<const std::vector<double>> pts, std::size_t min_samples) {
  const std::size_t n = pts.size();
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double sq = 0.0;
      for (std::size_t k = 0; k < pts[i].size(); ++k) {
        const double diff = pts[i][k] - pts[j][k];
        sq += diff * diff;
      }
      dist[i * n + j] = dist[j * n + i] = std::sqrt(sq);
    }

  std::vector<double> core(n);
  std::vector<double> row(n);
  const std::size_t k = std::min(min_samples, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(dist.begin() + static_cast<std::ptrdiff_t>(i * n),
              dist.begin() + static_cast<std::ptrdiff_t>((i + 1) * n), row.begin());
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k - 1), row.end());
    core[i] = row[k - 1];
  }

  std::vector<Edge> edges;
  edges.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      edges.push_back({std::max({core[i], core[j], dist[i * n + j]}), i, j});
  std::sort(edges.begin(), edges.end(), edge_less);

  DisjointSets ds(n);
  std::vector<Edge> mst;
  mst.reserve(n - 1);
  for (const auto& e : edges) {
    if (ds.unite(e.a, e.b)) mst.push_back(e);
    if (mst.size() + 1 == n) break;
  }
  return mst;
}

std::vector<LevelNode> level_hierarchy(std::size_t n, const std::vector<Edge>& mst) {
  std::vector<LevelNode> nodes(n);
  DisjointSets ds(n);
  std::vector<std::size_t> node_of(n);
  std::iota(node_of.begin(), node_of.end(), 0);

  for (std::size_t start = 0; start < mst.size();) {
    std::size_t end = start;
    while (end < mst.size() && mst[end].weight == mst[start].weight) ++end;

    std::vector<std::size_t> old_roots;
    for (std::size_t e = start; e < end; ++e) {
      old_roots.push_back(ds.find(mst[e].a));
      old_roots.push_back(ds.find(mst[e].b));
    }
    std::sort(old_roots.begin(), old_roots.end());
    old_roots.erase(std::unique(old_roots.begin(), old_roots.end()), old_roots.end());
    std::vector<std::size_t> old_nodes;
    for (auto r : old_roots) old_nodes.push_back(node_of[r]);

    for (std::size_t e = start; e < end; ++e) ds.unite(mst[e].a, mst[e].b);

    std::map<std::size_t, std::vector<std::size_t>> merged;  // new root -> old component nodes
    for (std::size_t i = 0; i < old_roots.size(); ++i) merged[ds.find(old_roots[i])].push_back(old_nodes[i]);
    for (auto& [root, children] : merged) {
      LevelNode node;
      node.distance = mst[start].weight;
      node.size = 0;
      for (auto c : children) node.size += nodes[c].size;
      node.children = std::move(children);
      node_of[root] = nodes.size();
      nodes.push_back(std::move(node));
    }
    start = end;
  }
  return nodes;
}

struct CondensedCluster {
  std::ptrdiff_t parent = -1;
  double birth = 0.0;
  double stability = 0.0;
  std::vector<std::size_t> child_clusters;
  std::vector<std::pair<std::size_t, double>> fallen;  // (point, lambda at which it left)
};

void collect_points(const std::vector<LevelNode>& nodes, std::size_t n, std::size_t node,
                    std::vector<std::size_t>& out) {
  std::vector<std::size_t> stack{node};
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    if (v < n) {
      out.push_back(v);
      continue;
    }
    for (auto c : nodes[v].children) stack.push_back(c);
  }
}

std::vector<CondensedCluster> condense(const std::vector<LevelNode>& nodes, std::size_t n, std::size_t mcs) {
  std::vector<CondensedCluster> clusters(1);
  std::vector<std::pair<std::size_t, std::size_t>> work{{0, nodes.size() - 1}};  // (cluster, level node)
  std::vector<std::size_t> pts;
  while (!work.empty()) {
    const std::size_t c = work.back().first;
    std::size_t v = work.back().second;
    work.pop_back();
    while (true) {
      const auto& node = nodes[v];
      const double lambda = lambda_of(node.distance);
      const double birth = clusters[c].birth;
      std::vector<std::size_t> big;
      for (auto ch : node.children)
        if (nodes[ch].size >= mcs) big.push_back(ch);
      const auto fall = [&](std::size_t ch) {
        pts.clear();
        collect_points(nodes, n, ch, pts);
        std::sort(pts.begin(), pts.end());
        for (auto p : pts) {
          clusters[c].fallen.emplace_back(p, lambda);
          clusters[c].stability += lambda - birth;
        }
      };
      if (big.size() >= 2) {
        for (auto ch : node.children) {
          if (nodes[ch].size < mcs) {
            fall(ch);
            continue;
          }
          CondensedCluster child;
          child.parent = static_cast<std::ptrdiff_t>(c);
          child.birth = lambda;
          clusters[c].stability += static_cast<double>(nodes[ch].size) * (lambda - birth);
          clusters[c].child_clusters.push_back(clusters.size());
          work.emplace_back(clusters.size(), ch);
          clusters.push_back(std::move(child));
        }
        break;
      }
      for (auto ch : node.children)
        if (big.empty() || ch != big.front()) fall(ch);
      if (big.empty()) break;
      v = big.front();
    }
  }
  return clusters;
}

}  // namespace

ClusterAssignment hdbscan(std::span<const std::vector<double>> points, const HdbscanParams& params) {
  if (params.min_cluster_size < 2) throw std::invalid_argument("hdbscan: min_cluster_size must be at least 2");
  const std::size_t n = points.size();
  for (const auto& p : points)
    if (p.size() != points.front().size()) throw std::invalid_argument("hdbscan: points differ in dimension");

  ClusterAssignment out;
  out.labels.assign(n, kNoise);
  if (n < params.min_cluster_size) {
    out.outliers.resize(n);
    std::iota(out.outliers.begin(), out.outliers.end(), 0);
    return out;
  }

  const std::size_t min_samples = params.min_samples == 0 ? params.min_cluster_size : params.min_samples;
  const auto nodes = level_hierarchy(n, minimum_spanning_tree(points, min_samples));
  auto clusters = condense(nodes, n, params.min_cluster_size);

  // Excess-of-mass selection, children before parents (children have larger ids).
  const std::size_t m = clusters.size();
  std::vector<bool> selected(m, false);
  std::vector<double> subtree(m, 0.0);
  for (std::size_t c = m; c-- > 1;) {
    double children = 0.0;
    for (auto ch : clusters[c].child_clusters) children += subtree[ch];
    if (clusters[c].child_clusters.empty() || clusters[c].stability >= children) {
      selected[c] = true;
      subtree[c] = clusters[c].stability;
    } else {
      subtree[c] = children;
    }
  }
  if (clusters[0].child_clusters.empty()) selected[0] = true;
  // Keep only the top-most selected cluster on every root-to-leaf path.
  std::vector<bool> covered(m, false);
  for (std::size_t c = 1; c < m; ++c) {
    const auto p = static_cast<std::size_t>(clusters[c].parent);
    if (covered[p] || selected[p]) {
      covered[c] = true;
      selected[c] = false;
    }
  }

  // Owner of every point: the selected cluster at or above the cluster it left.
  std::vector<std::ptrdiff_t> owner(m, -1);
  for (std::size_t c = 0; c < m; ++c) {
    if (selected[c])
      owner[c] = static_cast<std::ptrdiff_t>(c);
    else if (c > 0)
      owner[c] = owner[static_cast<std::size_t>(clusters[c].parent)];
  }
  std::vector<std::ptrdiff_t> point_cluster(n, -1);
  for (std::size_t c = 0; c < m; ++c) {
    if (owner[c] < 0) continue;
    double root_core = 0.0;
    if (c == 0)
      for (const auto& [p, l] : clusters[0].fallen) root_core = std::max(root_core, l);
    for (const auto& [p, l] : clusters[c].fallen) {
      if (c == 0 && l < root_core) continue;
      point_cluster[p] = owner[c];
    }
  }

  // Number clusters by their smallest member index.
  std::map<std::ptrdiff_t, int> relabel;
  std::vector<double> stab;
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = point_cluster[i];
    if (c < 0) continue;
    if (!relabel.contains(c)) {
      relabel[c] = static_cast<int>(stab.size());
      stab.push_back(clusters[static_cast<std::size_t>(c)].stability);
    }
    out.labels[i] = relabel[c];
  }
  out.num_clusters = stab.size();
  out.stability = std::move(stab);
  for (std::size_t i = 0; i < n; ++i)
    if (out.labels[i] == kNoise) out.outliers.push_back(i);
  return out;
}

}  // namespace flf
