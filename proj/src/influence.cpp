#include "flf/influence.hpp"

#include <cmath>
#include <stdexcept>

#include "flf/rng.hpp"

namespace flf {

std::string to_string(ProbeKind kind) {
  switch (kind) {
    case ProbeKind::kTargetMisclassified:
      return "TargetMisclassified";
    case ProbeKind::kRandomNonTarget:
      return "RandomNonTarget";
    case ProbeKind::kTrueNonTarget:
      return "TrueNonTarget";
  }
  return "?";
}

ProbeKind probe_kind_from_string(const std::string& s) {
  if (s == "TargetMisclassified") return ProbeKind::kTargetMisclassified;
  if (s == "RandomNonTarget") return ProbeKind::kRandomNonTarget;
  if (s == "TrueNonTarget") return ProbeKind::kTrueNonTarget;
  throw std::invalid_argument("unknown probe kind: " + s);
}

ProbeInput gen_random_nontarget(std::size_t dim, std::uint32_t label, std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("random probe: dimension must be positive");
  Rng rng(derive_seed(seed, Stream::kProbe));
  ProbeInput p;
  p.kind = ProbeKind::kRandomNonTarget;
  p.example.label = label;
  p.example.input.resize(dim);
  for (auto& v : p.example.input) v = rng.uniform01();
  return p;
}

ParamVector normalize_update(std::span<const double> g) {
  double sq = 0.0;
  for (double v : g) sq += v * v;
  const double norm = std::sqrt(sq);
  ParamVector out(g.size(), 0.0);
  if (norm > kNormEpsilon)
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] / norm;
  return out;
}

namespace {

/// Running sums for several probes over a stream of checkpoints.
class Accumulator {
 public:
  Accumulator(std::vector<const ProbeInput*> probes, const ModelSpec& spec)
      : probes_(std::move(probes)), spec_(spec) {
    for (const auto* p : probes_)
      if (p->example.input.size() != spec.input_dim)
        throw DimensionError("influence: probe dimension does not match the model");
  }

  void add(const Checkpoint& cp) {
    if (cp.param_count() != spec_.param_count())
      throw DimensionError("influence: checkpoint model length does not match the model shape");
    const std::vector<double> w(cp.global_model.begin(), cp.global_model.end());
    std::vector<ParamVector> grads;
    for (const auto* p : probes_) grads.push_back(ce_grad(p->example, w, spec_));
    std::vector<double> g(cp.param_count());
    for (const auto& u : cp.updates) {
      for (std::size_t j = 0; j < g.size(); ++j) g[j] = u.values[j];
      const auto unit = normalize_update(g);
      auto& slot = scores_[u.client];
      slot.resize(probes_.size());
      for (std::size_t k = 0; k < probes_.size(); ++k) {
        double dot = 0.0;
        for (std::size_t j = 0; j < unit.size(); ++j) dot += grads[k][j] * unit[j];
        slot[k].score -= cp.lr * dot;
        ++slot[k].rounds_counted;
      }
    }
    ++seen_;
  }

  std::size_t seen() const { return seen_; }

  std::map<ClientId, std::vector<ClientScore>> finish(std::size_t n_clients) {
    for (ClientId c = 0; c < n_clients; ++c) {
      auto& slot = scores_[c];
      slot.resize(probes_.size());
    }
    return std::move(scores_);
  }

 private:
  std::vector<const ProbeInput*> probes_;
  const ModelSpec& spec_;
  std::map<ClientId, std::vector<ClientScore>> scores_;
  std::size_t seen_ = 0;
};

template <typename Range>
std::map<ClientId, std::vector<ClientScore>> accumulate(const Range& checkpoints,
                                                        std::vector<const ProbeInput*> probes,
                                                        const ModelSpec& spec, std::size_t n_clients) {
  Accumulator acc(std::move(probes), spec);
  for (const auto& cp : checkpoints) acc.add(cp);
  if (acc.seen() == 0) throw std::invalid_argument("influence: no checkpoints");
  return acc.finish(n_clients);
}

std::map<ClientId, ClientScore> single(std::map<ClientId, std::vector<ClientScore>> all) {
  std::map<ClientId, ClientScore> out;
  for (auto& [c, v] : all) out[c] = v[0];
  return out;
}

std::vector<InfluencePair> pairs(std::map<ClientId, std::vector<ClientScore>> all) {
  std::vector<InfluencePair> out;
  out.reserve(all.size());
  for (auto& [c, v] : all) out.push_back({c, v[0].score, v[1].score, v[0].rounds_counted});
  return out;
}

void check_labels(const ProbeInput& target, const ProbeInput& nontarget) {
  if (target.example.label != nontarget.example.label)
    throw std::invalid_argument("influence: target and non-target probes carry different labels");
}

}  // namespace

std::map<ClientId, ClientScore> influence_scores(std::span<const Checkpoint> checkpoints,
                                                 const ProbeInput& probe, const ModelSpec& spec,
                                                 std::size_t n_clients) {
  return single(accumulate(checkpoints, {&probe}, spec, n_clients));
}

std::map<ClientId, ClientScore> influence_scores(const CheckpointStore& store, const ProbeInput& probe,
                                                 const ModelSpec& spec, std::size_t n_clients) {
  return single(accumulate(store, {&probe}, spec, n_clients));
}

std::vector<InfluencePair> influence_pairs(const CheckpointStore& store, const ProbeInput& target,
                                           const ProbeInput& nontarget, const ModelSpec& spec,
                                           std::size_t n_clients) {
  check_labels(target, nontarget);
  return pairs(accumulate(store, {&target, &nontarget}, spec, n_clients));
}

std::vector<InfluencePair> influence_pairs(std::span<const Checkpoint> checkpoints,
                                           const ProbeInput& target, const ProbeInput& nontarget,
                                           const ModelSpec& spec, std::size_t n_clients) {
  check_labels(target, nontarget);
  return pairs(accumulate(checkpoints, {&target, &nontarget}, spec, n_clients));
}

}  // namespace flf
