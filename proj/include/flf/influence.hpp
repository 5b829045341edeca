#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "flf/checkpoint_store.hpp"
#include "flf/model.hpp"

namespace flf {

enum class ProbeKind { kTargetMisclassified, kRandomNonTarget, kTrueNonTarget };

std::string to_string(ProbeKind kind);
ProbeKind probe_kind_from_string(const std::string& s);

/// An input whose cross-entropy loss against `example.label` is traced back
/// through the checkpoints.
struct ProbeInput {
  Example example;
  ProbeKind kind = ProbeKind::kTargetMisclassified;
};

/// Every coordinate uniform on [0, 1], labeled y.
ProbeInput gen_random_nontarget(std::size_t dim, std::uint32_t label, std::uint64_t seed);

inline constexpr double kNormEpsilon = 1e-12;

/// g / ||g||_2, or the zero vector when ||g||_2 <= kNormEpsilon.
ParamVector normalize_update(std::span<const double> g);

struct ClientScore {
  double score = 0.0;
  std::size_t rounds_counted = 0;  // 0 flags a client absent from every checkpoint
};

/// score_i = - sum over checkpoints t with i in C_t of
///           alpha_t * grad ce_loss(probe; w_t) . normalize_update(g_t^(i))
///
/// Terms are added in ascending round order. With n_clients > 0 every id in
/// [0, n_clients) appears in the result, absent ones with rounds_counted = 0.
std::map<ClientId, ClientScore> influence_scores(std::span<const Checkpoint> checkpoints,
                                                 const ProbeInput& probe, const ModelSpec& spec,
                                                 std::size_t n_clients = 0);
std::map<ClientId, ClientScore> influence_scores(const CheckpointStore& store, const ProbeInput& probe,
                                                 const ModelSpec& spec, std::size_t n_clients = 0);

/// Two-dimensional influence of one client: s from the target probe, s' from
/// the non-target probe.
struct InfluencePair {
  ClientId client = 0;
  double s = 0.0;
  double s_prime = 0.0;
  std::size_t rounds_counted = 0;
};

/// Both probes must carry the same label. One pass over the store; one pair
/// per client present in any checkpoint (or per id < n_clients when given).
std::vector<InfluencePair> influence_pairs(const CheckpointStore& store, const ProbeInput& target,
                                           const ProbeInput& nontarget, const ModelSpec& spec,
                                           std::size_t n_clients = 0);
std::vector<InfluencePair> influence_pairs(std::span<const Checkpoint> checkpoints,
                                           const ProbeInput& target, const ProbeInput& nontarget,
                                           const ModelSpec& spec, std::size_t n_clients = 0);

}  // namespace flf
