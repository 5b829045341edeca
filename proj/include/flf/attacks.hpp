#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flf/model.hpp"
#include "flf/rng.hpp"

namespace flf {

enum class TriggerLocation { kUpperRight, kLowerRight, kUpperLeft, kLowerLeft, kRandom };

std::string to_string(TriggerLocation loc);
TriggerLocation trigger_location_from_string(const std::string& s);

/// A square patch written into the H x W grid that the flat input encodes
/// (row-major). `values` holds either one fill value or size*size per-cell
/// values in row-major patch order.
struct TriggerSpec {
  TriggerLocation location = TriggerLocation::kUpperRight;
  std::size_t size = 2;
  std::vector<double> values{1.0};
  std::size_t grid_h = 8;
  std::size_t grid_w = 8;

  void validate() const;
};

/// Returns a copy of `input` with the patch applied. `rng` is only consulted
/// for the Random location, which draws a fresh top-left corner per call.
std::vector<double> embed_trigger(std::span<const double> input, const TriggerSpec& spec, Rng& rng);

/// data followed by one triggered copy of every example relabeled to `target`.
std::vector<Example> poison_local_data(std::span<const Example> data, const TriggerSpec& spec,
                                       std::uint32_t target, Rng& rng);

/// data followed by the edge-case examples relabeled to `target`.
std::vector<Example> poison_edge_data(std::span<const Example> data,
                                      std::span<const Example> edge_set, std::uint32_t target);

enum class AttackKind { kNone, kScaling, kAlie, kEdge };

std::string to_string(AttackKind kind);
AttackKind attack_kind_from_string(const std::string& s);

struct AttackSchedule {
  enum class Mode { kEvery, kProbability };
  Mode mode = Mode::kEvery;
  std::uint64_t every = 1;  // attack when round % every == 0
  double probability = 1.0;

  void validate() const;
};

/// Every-e mode is a pure modulus test. Probability mode draws a Bernoulli(p)
/// from a stream keyed by (attacker_seed, round), so a given attacker's
/// decision for a round never depends on the order of queries.
bool attack_active(std::uint64_t round, const AttackSchedule& schedule, std::uint64_t attacker_seed);

struct AttackConfig {
  AttackKind kind = AttackKind::kScaling;
  double malicious_fraction = 0.2;  // clients 0..m-1 are malicious
  std::uint32_t target_label = 0;
  double gamma = 1.0;   // Scaling factor
  double alie_z = 1.0;  // ALIE band half-width in standard deviations
  AttackSchedule schedule;
  TriggerSpec trigger;  // Scaling and ALIE

  /// m = round(fraction * n_clients); zero when kind is None.
  std::size_t malicious_count(std::size_t n_clients) const;
  void validate(std::size_t n_clients, std::size_t num_classes) const;
};

/// Malicious update of the Scaling attack:
///   gamma * (local_train(poison_local_data(data), w_t) - w_t)
ParamVector craft_scaling_update(std::span<const double> w_t, std::span<const Example> data,
                                 const ModelSpec& model, const TriggerSpec& trigger,
                                 std::uint32_t target, double gamma, const TrainParams& train,
                                 std::uint64_t train_seed, Rng& trigger_rng);

/// Clamps every update coordinate-wise into [mu - z*sigma, mu + z*sigma],
/// where mu and sigma are the coordinate-wise mean and (population) standard
/// deviation over `raw`. Needs at least two updates.
std::vector<ParamVector> alie_clamp(std::span<const ParamVector> raw, double z);

struct MaliciousShard {
  std::span<const Example> data;
  std::uint64_t train_seed = 0;
  std::uint64_t trigger_seed = 0;
};

/// ALIE-style crafting: each malicious client first computes the backdoored
/// update of the Scaling attack with gamma = 1, then all of them are clamped
/// jointly by alie_clamp.
std::vector<ParamVector> craft_alie_updates(std::span<const double> w_t,
                                            std::span<const MaliciousShard> shards,
                                            const ModelSpec& model, const TriggerSpec& trigger,
                                            std::uint32_t target, double z,
                                            const TrainParams& train);

}  // namespace flf
