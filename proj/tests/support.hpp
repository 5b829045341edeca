#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "flf/checkpoint_store.hpp"
#include "flf/influence.hpp"
#include "flf/model.hpp"
#include "flf/rng.hpp"

namespace flf::test {

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline Example random_example(Rng& rng, std::size_t d, std::size_t classes) {
  return {random_vector(rng, d, 0.0, 1.0), static_cast<std::uint32_t>(rng.below(classes))};
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

/// Checkpoint with `clients` updates drawn from `rng`; client ids are a random
/// subset of [0, id_range).
inline Checkpoint random_checkpoint(Rng& rng, std::uint64_t round, std::size_t p, std::size_t clients,
                                    std::size_t id_range) {
  Checkpoint cp;
  cp.round = round;
  cp.lr = rng.uniform(0.01, 2.0);
  cp.global_model.resize(p);
  for (auto& x : cp.global_model) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  std::vector<ClientId> ids(id_range);
  for (std::size_t i = 0; i < id_range; ++i) ids[i] = static_cast<ClientId>(i);
  shuffle(ids, rng);
  ids.resize(std::min(clients, id_range));
  std::sort(ids.begin(), ids.end());
  for (auto id : ids) {
    ClientUpdate u{id, std::vector<float>(p)};
    for (auto& x : u.values) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    cp.updates.push_back(std::move(u));
  }
  return cp;
}

/// Deterministic stream of checkpoints shared by the cross-process writer and
/// reader: rounds 1..count, varying model sizes and client subsets.
inline std::vector<Checkpoint> checkpoint_sequence(std::uint64_t seed, std::size_t count) {
  Rng rng(seed);
  std::vector<Checkpoint> out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t p = 1 + rng.below(40);
    const std::size_t clients = rng.below(12);
    out.push_back(random_checkpoint(rng, i + 1, p, clients, 30));
  }
  return out;
}

// Largest coordinate-wise relative error between the analytic gradient and a
// central difference with step h.
inline double fd_max_rel_error(const Example& ex, ParamVector w, const ModelSpec& spec, double h = 1e-5) {
  const auto g = ce_grad(ex, w, spec);
  double worst = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double orig = w[k];
    w[k] = orig + h;
    const double up = ce_loss(ex, w, spec);
    w[k] = orig - h;
    const double down = ce_loss(ex, w, spec);
    w[k] = orig;
    const double fd = (up - down) / (2 * h);
    const double err = std::abs(fd - g[k]) / std::max({std::abs(fd), std::abs(g[k]), 1e-6});
    worst = std::max(worst, err);
  }
  return worst;
}

// Direct transcription of the score definition with plain loops.
inline double naive_score(const std::vector<Checkpoint>& cps, const Example& probe, const ModelSpec& spec,
                   ClientId client) {
  double s = 0.0;
  for (const auto& cp : cps) {
    for (const auto& u : cp.updates) {
      if (u.client != client) continue;
      const std::vector<double> w(cp.global_model.begin(), cp.global_model.end());
      const auto grad = ce_grad(probe, w, spec);
      double norm2 = 0.0;
      for (float v : u.values) norm2 += static_cast<double>(v) * v;
      const double norm = std::sqrt(norm2);
      if (norm <= kNormEpsilon) continue;
      double dot = 0.0;
      for (std::size_t k = 0; k < grad.size(); ++k) dot += grad[k] * (static_cast<double>(u.values[k]) / norm);
      s -= cp.lr * dot;
    }
  }
  return s;
}

/// Adjusted Rand index between two labelings of the same points. Every label
/// value, including a noise marker, is treated as its own group.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  const auto pairs2 = [](double x) { return x * (x - 1.0) / 2.0; };
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ca, cb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ca[a[i]] += 1;
    cb[b[i]] += 1;
  }
  double index = 0, sa = 0, sb = 0;
  for (const auto& [k, v] : joint) index += pairs2(v);
  for (const auto& [k, v] : ca) sa += pairs2(v);
  for (const auto& [k, v] : cb) sb += pairs2(v);
  const double expected = sa * sb / pairs2(static_cast<double>(a.size()));
  const double max_index = (sa + sb) / 2.0;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

struct Blobs {
  std::vector<std::vector<double>> points;
  std::vector<int> truth;
};

/// k isotropic Gaussian blobs (sd 1) whose centers are at least
/// `separation` blob spreads apart, taking the spread to be 2 sd.
inline Blobs make_blobs(Rng& rng, std::size_t k, std::size_t min_size, std::size_t max_size, double separation) {
  const double min_gap = 2.0 * separation;
  std::vector<std::pair<double, double>> centers;
  while (centers.size() < k) {
    const double cx = rng.uniform(0.0, 10.0 * min_gap), cy = rng.uniform(0.0, 10.0 * min_gap);
    bool ok = true;
    for (const auto& [x, y] : centers) ok = ok && std::hypot(cx - x, cy - y) >= min_gap;
    if (ok) centers.emplace_back(cx, cy);
  }
  Blobs out;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t size = min_size + rng.below(max_size - min_size + 1);
    for (std::size_t i = 0; i < size; ++i) {
      out.points.push_back({centers[c].first + rng.normal(), centers[c].second + rng.normal()});
      out.truth.push_back(static_cast<int>(c));
    }
  }
  return out;
}

}  // namespace flf::test
