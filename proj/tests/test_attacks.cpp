#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "flf/attacks.hpp"
#include "support.hpp"

using namespace flf;

namespace {

TriggerSpec trig(TriggerLocation loc, std::size_t size, std::vector<double> values, std::size_t h,
                 std::size_t w) {
  return {loc, size, std::move(values), h, w};
}

std::vector<Example> make_examples(Rng& rng, std::size_t n, std::size_t d, std::size_t c) {
  std::vector<Example> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(test::random_example(rng, d, c));
  return v;
}

}  // namespace

TEST_CASE("trigger covering the whole grid overwrites everything") {
  Rng rng(1);
  const std::vector<double> x(16, 0.3);
  const auto out = embed_trigger(x, trig(TriggerLocation::kUpperLeft, 4, {1.0}, 4, 4), rng);
  CHECK(out == std::vector<double>(16, 1.0));
}

TEST_CASE("upper-right 2x2 patch on a 4x4 zero grid") {
  Rng rng(1);
  const std::vector<double> zero(16, 0.0);
  const auto out = embed_trigger(zero, trig(TriggerLocation::kUpperRight, 2, {1.0}, 4, 4), rng);
  std::vector<std::size_t> set;
  for (std::size_t i = 0; i < 16; ++i)
    if (out[i] != 0.0) set.push_back(i);
  // rows {0,1} x cols {2,3}
  CHECK(set == std::vector<std::size_t>{2, 3, 6, 7});
  CHECK(zero == std::vector<double>(16, 0.0));
}

TEST_CASE("other fixed corners and per-cell values") {
  Rng rng(1);
  const std::vector<double> zero(12, 0.0);  // 3 x 4
  auto out = embed_trigger(zero, trig(TriggerLocation::kLowerLeft, 2, {0.1, 0.2, 0.3, 0.4}, 3, 4), rng);
  CHECK(out[4] == 0.1);
  CHECK(out[5] == 0.2);
  CHECK(out[8] == 0.3);
  CHECK(out[9] == 0.4);
  out = embed_trigger(zero, trig(TriggerLocation::kLowerRight, 1, {0.5}, 3, 4), rng);
  CHECK(out[11] == 0.5);
  CHECK(std::count(out.begin(), out.end(), 0.0) == 11);
}

TEST_CASE("black trigger on a black input changes nothing") {
  Rng rng(1);
  const std::vector<double> zero(64, 0.0);
  CHECK(embed_trigger(zero, trig(TriggerLocation::kUpperRight, 2, {0.0}, 8, 8), rng) == zero);
}

TEST_CASE("fixed triggers are idempotent") {
  Rng rng(2);
  for (auto loc : {TriggerLocation::kUpperRight, TriggerLocation::kLowerRight, TriggerLocation::kUpperLeft,
                   TriggerLocation::kLowerLeft}) {
    const auto spec = trig(loc, 3, {0.9}, 8, 8);
    const auto x = test::random_vector(rng, 64, 0.0, 1.0);
    const auto once = embed_trigger(x, spec, rng);
    CHECK(embed_trigger(once, spec, rng) == once);
  }
}

TEST_CASE("random location stays in bounds and varies") {
  Rng rng(3);
  const auto spec = trig(TriggerLocation::kRandom, 2, {1.0}, 8, 8);
  const std::vector<double> zero(64, 0.0);
  std::set<std::vector<double>> distinct;
  for (int i = 0; i < 50; ++i) {
    const auto out = embed_trigger(zero, spec, rng);
    CHECK(std::count(out.begin(), out.end(), 1.0) == 4);
    distinct.insert(out);
  }
  CHECK(distinct.size() > 5);
}

TEST_CASE("trigger errors") {
  Rng rng(1);
  CHECK_THROWS_AS(embed_trigger(std::vector<double>(16), trig(TriggerLocation::kUpperRight, 5, {1.0}, 4, 4), rng),
                  std::out_of_range);
  CHECK_THROWS(embed_trigger(std::vector<double>(15), trig(TriggerLocation::kUpperRight, 2, {1.0}, 4, 4), rng));
  CHECK_THROWS(trig(TriggerLocation::kUpperRight, 0, {1.0}, 4, 4).validate());
  CHECK_THROWS(trig(TriggerLocation::kUpperRight, 2, {1.0, 0.5}, 4, 4).validate());
  CHECK(trigger_location_from_string(to_string(TriggerLocation::kLowerLeft)) == TriggerLocation::kLowerLeft);
}

TEST_CASE("poison_local_data duplicates with the target label") {
  Rng rng(4);
  const auto spec = trig(TriggerLocation::kUpperRight, 2, {1.0}, 4, 4);
  auto data = make_examples(rng, 10, 16, 5);
  const auto before = data;
  const auto out = poison_local_data(data, spec, 3, rng);
  CHECK(data.size() == before.size());
  CHECK(out.size() == 20);
  std::size_t relabeled = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(out[i].input == before[i].input);
    CHECK(out[i].label == before[i].label);
    CHECK(out[10 + i].label == 3);
    relabeled += out[10 + i].label == 3 ? 1 : 0;
    for (std::size_t j = 0; j < 16; ++j) {
      const bool in_patch = (j / 4) < 2 && (j % 4) >= 2;
      CHECK(out[10 + i].input[j] == (in_patch ? 1.0 : before[i].input[j]));
    }
  }
  CHECK(relabeled == 10);
  std::size_t total_target = std::count_if(out.begin(), out.end(), [](const Example& e) { return e.label == 3; });
  std::size_t orig_target = std::count_if(before.begin(), before.end(), [](const Example& e) { return e.label == 3; });
  CHECK(total_target == orig_target + 10);
}

TEST_CASE("poison_edge_data appends the relabeled edge set") {
  Rng rng(5);
  const auto edge = make_examples(rng, 10, 4, 3);
  const auto out = poison_edge_data(std::vector<Example>{}, std::span(edge).first(5), 2);
  CHECK(out.size() == 5);
  for (const auto& e : out) CHECK(e.label == 2);

  const auto data = make_examples(rng, 50, 4, 3);
  const auto mixed = poison_edge_data(data, edge, 1);
  CHECK(mixed.size() == 60);
  for (std::size_t i = 0; i < 50; ++i) CHECK(mixed[i].label == data[i].label);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(mixed[50 + i].label == 1);
    CHECK(mixed[50 + i].input == edge[i].input);
  }
  CHECK_THROWS(poison_edge_data(data, std::vector<Example>{}, 1));
}

TEST_CASE("attack schedules") {
  const AttackSchedule every1{AttackSchedule::Mode::kEvery, 1, 1.0};
  for (std::uint64_t t = 1; t <= 10; ++t) CHECK(attack_active(t, every1, 0));
  const AttackSchedule every5{AttackSchedule::Mode::kEvery, 5, 1.0};
  std::vector<std::uint64_t> active;
  for (std::uint64_t t = 1; t <= 10; ++t)
    if (attack_active(t, every5, 0)) active.push_back(t);
  CHECK(active == std::vector<std::uint64_t>{5, 10});

  const AttackSchedule half{AttackSchedule::Mode::kProbability, 1, 0.5};
  std::size_t hits = 0;
  for (std::uint64_t t = 1; t <= 10000; ++t) hits += attack_active(t, half, 77) ? 1 : 0;
  CHECK(hits >= 4800);
  CHECK(hits <= 5200);
  // Order independence: a decision depends only on (round, attacker).
  CHECK(attack_active(123, half, 77) == attack_active(123, half, 77));

  CHECK_THROWS(attack_active(1, {AttackSchedule::Mode::kEvery, 0, 1.0}, 0));
  CHECK_THROWS(attack_active(1, {AttackSchedule::Mode::kProbability, 1, 0.0}, 0));
}

TEST_CASE("scaling update: gamma = 1 is honest training on poisoned data; linear in gamma") {
  Rng rng(6);
  const ModelSpec model{ModelKind::kLinearSoftmax, 16, 4, 0, 1};
  const auto spec = trig(TriggerLocation::kUpperRight, 2, {1.0}, 4, 4);
  const auto data = make_examples(rng, 20, 16, 4);
  const auto w = init_model(model);
  const TrainParams tp{2, 8, 0.1};

  Rng r1(99), r2(99), r3(99), r4(99), r5(99);
  const auto g1 = craft_scaling_update(w, data, model, spec, 0, 1.0, tp, 5, r1);
  const auto poisoned = poison_local_data(data, spec, 0, r2);
  const auto honest = local_train(poisoned, w, model, tp, 5);
  for (std::size_t k = 0; k < w.size(); ++k) CHECK(g1[k] == honest[k] - w[k]);

  const auto g0 = craft_scaling_update(w, data, model, spec, 0, 0.0, tp, 5, r3);
  for (double x : g0) CHECK(x == 0.0);
  const auto g5 = craft_scaling_update(w, data, model, spec, 0, 5.0, tp, 5, r4);
  for (std::size_t k = 0; k < w.size(); ++k) CHECK(g5[k] == doctest::Approx(5.0 * g1[k]).epsilon(1e-15));
  const auto g25 = craft_scaling_update(w, data, model, spec, 0, 2.5, tp, 5, r5);
  for (std::size_t k = 0; k < w.size(); ++k) CHECK(g25[k] == doctest::Approx(2.5 * g1[k]).epsilon(1e-15));
}

TEST_CASE("ALIE clamp: hand arithmetic and degenerate cases") {
  const std::vector<ParamVector> two{{0.0}, {10.0}};
  const auto out = alie_clamp(two, 0.5);
  CHECK(out[0][0] == 2.5);
  CHECK(out[1][0] == 7.5);

  const std::vector<ParamVector> same{{1, 2}, {1, 2}, {1, 2}};
  CHECK(alie_clamp(same, 1.0) == same);
  CHECK(alie_clamp(same, std::numeric_limits<double>::infinity()) == same);

  Rng rng(7);
  std::vector<ParamVector> raw;
  for (int i = 0; i < 5; ++i) raw.push_back(test::random_vector(rng, 8));
  CHECK(alie_clamp(raw, std::numeric_limits<double>::infinity()) == raw);
  CHECK(alie_clamp(raw, 1e9) == raw);

  CHECK_THROWS(alie_clamp(std::vector<ParamVector>{{1.0}}, 1.0));
  CHECK_THROWS(alie_clamp(std::vector<ParamVector>{{1.0}, {1.0, 2.0}}, 1.0));
}

TEST_CASE("ALIE outputs stay inside the band") {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng.below(6);
    const double z = rng.uniform(0.0, 2.0);
    std::vector<ParamVector> raw;
    for (std::size_t i = 0; i < n; ++i) raw.push_back(test::random_vector(rng, 10, -5, 5));
    const auto out = alie_clamp(raw, z);
    for (std::size_t j = 0; j < 10; ++j) {
      double mu = 0, var = 0;
      for (const auto& g : raw) mu += g[j];
      mu /= static_cast<double>(n);
      for (const auto& g : raw) var += (g[j] - mu) * (g[j] - mu);
      const double sigma = std::sqrt(var / static_cast<double>(n));
      for (const auto& g : out) {
        CHECK(g[j] >= mu - z * sigma - 1e-12);
        CHECK(g[j] <= mu + z * sigma + 1e-12);
      }
    }
  }
}

TEST_CASE("craft_alie_updates clamps the gamma-1 backdoored updates") {
  Rng rng(9);
  const ModelSpec model{ModelKind::kLinearSoftmax, 16, 3, 0, 2};
  const auto spec = trig(TriggerLocation::kUpperRight, 2, {1.0}, 4, 4);
  const auto a = make_examples(rng, 12, 16, 3);
  const auto b = make_examples(rng, 12, 16, 3);
  const auto w = init_model(model);
  const TrainParams tp{1, 4, 0.1};
  const std::vector<MaliciousShard> shards{{a, 1, 11}, {b, 2, 12}};
  const auto out = craft_alie_updates(w, shards, model, spec, 0, 0.5, tp);
  Rng ra(11), rb(12);
  const std::vector<ParamVector> raw{craft_scaling_update(w, a, model, spec, 0, 1.0, tp, 1, ra),
                                     craft_scaling_update(w, b, model, spec, 0, 1.0, tp, 2, rb)};
  CHECK(out == alie_clamp(raw, 0.5));
  CHECK_THROWS(craft_alie_updates(w, std::span(shards).first(1), model, spec, 0, 0.5, tp));
}

TEST_CASE("attack config validation and malicious count") {
  AttackConfig c;
  c.trigger.grid_h = c.trigger.grid_w = 8;
  CHECK(c.malicious_count(100) == 20);
  CHECK_NOTHROW(c.validate(100, 10));
  c.target_label = 10;
  CHECK_THROWS(c.validate(100, 10));
  c.target_label = 0;
  c.gamma = 0.0;
  CHECK_THROWS(c.validate(100, 10));
  c.gamma = 1.0;
  c.malicious_fraction = 1.0;
  CHECK_THROWS(c.validate(100, 10));
  c.malicious_fraction = 0.2;
  c.kind = AttackKind::kNone;
  CHECK(c.malicious_count(100) == 0);
  CHECK(attack_kind_from_string("ALIE") == AttackKind::kAlie);
  CHECK_THROWS(attack_kind_from_string("LIE"));
}
