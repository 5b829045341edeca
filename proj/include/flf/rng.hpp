#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace flf {

/// Named purposes for derived random streams. Every stochastic step in the
/// simulator draws from its own stream so that changing one knob (e.g. the
/// selection fraction) does not perturb unrelated draws.
enum class Stream : std::uint64_t {
  kDataset = 1,
  kPartition = 2,
  kModelInit = 3,
  kSelection = 4,
  kLocalTraining = 5,
  kTrigger = 6,
  kAttackSchedule = 7,
  kProbe = 8,
  kEdgeSet = 9,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Mixes a master seed, a stream tag and up to a few coordinates (round,
/// client id, ...) into an independent 64-bit seed.
std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                          std::initializer_list<std::uint64_t> coords = {});

/// Thin wrapper over mt19937_64 with the few draws the project needs.
/// uniform01() is built from raw bits so it is identical across standard
/// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal();
  bool bernoulli(double p) { return uniform01() < p; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Fisher-Yates shuffle driven by Rng::below (portable, unlike std::shuffle).
template <typename Container>
void shuffle(Container& c, Rng& rng) {
  for (std::size_t i = c.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(c[i - 1], c[j]);
  }
}

}  // namespace flf
