#include "flf/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flf {

std::string to_string(TriggerLocation loc) {
  switch (loc) {
    case TriggerLocation::kUpperRight:
      return "UR";
    case TriggerLocation::kLowerRight:
      return "LR";
    case TriggerLocation::kUpperLeft:
      return "UL";
    case TriggerLocation::kLowerLeft:
      return "LL";
    case TriggerLocation::kRandom:
      return "Random";
  }
  return "?";
}

TriggerLocation trigger_location_from_string(const std::string& s) {
  if (s == "UR") return TriggerLocation::kUpperRight;
  if (s == "LR") return TriggerLocation::kLowerRight;
  if (s == "UL") return TriggerLocation::kUpperLeft;
  if (s == "LL") return TriggerLocation::kLowerLeft;
  if (s == "Random") return TriggerLocation::kRandom;
  throw std::invalid_argument("unknown trigger location: " + s);
}

void TriggerSpec::validate() const {
  if (size == 0) throw std::invalid_argument("trigger: size must be at least 1");
  if (size > grid_h || size > grid_w)
    throw std::out_of_range("trigger: a " + std::to_string(size) + "x" + std::to_string(size) +
                            " patch does not fit a " + std::to_string(grid_h) + "x" +
                            std::to_string(grid_w) + " grid");
  if (values.size() != 1 && values.size() != size * size)
    throw std::invalid_argument("trigger: expected 1 or size*size values");
  for (double v : values)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("trigger: values must lie in [0, 1]");
}

std::vector<double> embed_trigger(std::span<const double> input, const TriggerSpec& spec, Rng& rng) {
  spec.validate();
  if (input.size() != spec.grid_h * spec.grid_w)
    throw DimensionError("embed_trigger: input length does not match the grid");
  std::size_t top = 0, left = 0;
  switch (spec.location) {
    case TriggerLocation::kUpperRight:
      left = spec.grid_w - spec.size;
      break;
    case TriggerLocation::kLowerRight:
      top = spec.grid_h - spec.size;
      left = spec.grid_w - spec.size;
      break;
    case TriggerLocation::kUpperLeft:
      break;
    case TriggerLocation::kLowerLeft:
      top = spec.grid_h - spec.size;
      break;
    case TriggerLocation::kRandom:
      top = rng.below(spec.grid_h - spec.size + 1);
      left = rng.below(spec.grid_w - spec.size + 1);
      break;
  }
  std::vector<double> out(input.begin(), input.end());
  for (std::size_t r = 0; r < spec.size; ++r)
    for (std::size_t c = 0; c < spec.size; ++c) {
      const double v = spec.values.size() == 1 ? spec.values[0] : spec.values[r * spec.size + c];
      out[(top + r) * spec.grid_w + left + c] = v;
    }
  return out;
}

std::vector<Example> poison_local_data(std::span<const Example> data, const TriggerSpec& spec,
                                       std::uint32_t target, Rng& rng) {
  std::vector<Example> out(data.begin(), data.end());
  out.reserve(2 * data.size());
  for (const auto& ex : data) out.push_back({embed_trigger(ex.input, spec, rng), target});
  return out;
}

std::vector<Example> poison_edge_data(std::span<const Example> data,
                                      std::span<const Example> edge_set, std::uint32_t target) {
  if (edge_set.empty()) throw std::invalid_argument("poison_edge_data: empty edge set");
  std::vector<Example> out(data.begin(), data.end());
  out.reserve(data.size() + edge_set.size());
  for (const auto& ex : edge_set) out.push_back({ex.input, target});
  return out;
}

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::kNone:
      return "None";
    case AttackKind::kScaling:
      return "Scaling";
    case AttackKind::kAlie:
      return "ALIE";
    case AttackKind::kEdge:
      return "Edge";
  }
  return "?";
}

AttackKind attack_kind_from_string(const std::string& s) {
  if (s == "None") return AttackKind::kNone;
  if (s == "Scaling") return AttackKind::kScaling;
  if (s == "ALIE") return AttackKind::kAlie;
  if (s == "Edge") return AttackKind::kEdge;
  throw std::invalid_argument("unknown attack kind: " + s);
}

void AttackSchedule::validate() const {
  if (mode == Mode::kEvery && every == 0) throw std::invalid_argument("schedule: every must be >= 1");
  if (mode == Mode::kProbability && !(probability > 0.0 && probability <= 1.0))
    throw std::invalid_argument("schedule: probability must lie in (0, 1]");
}

std::size_t AttackConfig::malicious_count(std::size_t n_clients) const {
  if (kind == AttackKind::kNone) return 0;
  return static_cast<std::size_t>(std::llround(malicious_fraction * static_cast<double>(n_clients)));
}

void AttackConfig::validate(std::size_t n_clients, std::size_t num_classes) const {
  if (kind == AttackKind::kNone) return;
  // A zero fraction is accepted as "no attacker" for clean baselines.
  if (!(malicious_fraction >= 0.0 && malicious_fraction < 1.0))
    throw std::invalid_argument("attack: malicious_fraction must lie in [0, 1)");
  if (target_label >= num_classes) throw std::invalid_argument("attack: target label out of range");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("attack: gamma must be positive");
  if (!(alie_z >= 0.0)) throw std::invalid_argument("attack: alie_z must be non-negative");
  schedule.validate();
  if (kind != AttackKind::kEdge) trigger.validate();
  if (malicious_count(n_clients) >= n_clients) throw std::invalid_argument("attack: every client would be malicious");
}

bool attack_active(std::uint64_t round, const AttackSchedule& schedule, std::uint64_t attacker_seed) {
  schedule.validate();
  if (schedule.mode == AttackSchedule::Mode::kEvery) return round % schedule.every == 0;
  Rng rng(derive_seed(attacker_seed, Stream::kAttackSchedule, {round}));
  return rng.bernoulli(schedule.probability);
}

ParamVector craft_scaling_update(std::span<const double> w_t, std::span<const Example> data,
                                 const ModelSpec& model, const TriggerSpec& trigger,
                                 std::uint32_t target, double gamma, const TrainParams& train,
                                 std::uint64_t train_seed, Rng& trigger_rng) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("scaling attack: gamma must be finite and non-negative");
  const auto poisoned = poison_local_data(data, trigger, target, trigger_rng);
  ParamVector g = local_train(poisoned, w_t, model, train, train_seed);
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = gamma * (g[k] - w_t[k]);
  return g;
}

std::vector<ParamVector> alie_clamp(std::span<const ParamVector> raw, double z) {
  if (raw.size() < 2) throw std::invalid_argument("ALIE needs at least two malicious clients");
  if (!(z >= 0.0)) throw std::invalid_argument("ALIE: z must be non-negative");
  const std::size_t dim = raw.front().size();
  for (const auto& g : raw)
    if (g.size() != dim) throw DimensionError("ALIE: updates have different dimensions");
  const double n = static_cast<double>(raw.size());
  std::vector<ParamVector> out(raw.begin(), raw.end());
  for (std::size_t j = 0; j < dim; ++j) {
    double mean = 0.0;
    for (const auto& g : raw) mean += g[j];
    mean /= n;
    double var = 0.0;
    for (const auto& g : raw) var += (g[j] - mean) * (g[j] - mean);
    const double sigma = std::sqrt(var / n);
    // z = inf with sigma = 0 would give inf * 0; the band is then just the mean.
    const double half = sigma > 0.0 ? z * sigma : 0.0;
    for (auto& g : out) g[j] = std::clamp(g[j], mean - half, mean + half);
  }
  return out;
}

std::vector<ParamVector> craft_alie_updates(std::span<const double> w_t,
                                            std::span<const MaliciousShard> shards,
                                            const ModelSpec& model, const TriggerSpec& trigger,
                                            std::uint32_t target, double z,
                                            const TrainParams& train) {
  if (shards.size() < 2) throw std::invalid_argument("ALIE needs at least two malicious clients");
  std::vector<ParamVector> raw;
  raw.reserve(shards.size());
  for (const auto& s : shards) {
    Rng trigger_rng(s.trigger_seed);
    raw.push_back(craft_scaling_update(w_t, s.data, model, trigger, target, 1.0, train,
                                       s.train_seed, trigger_rng));
  }
  return alie_clamp(raw, z);
}

}  // namespace flf
