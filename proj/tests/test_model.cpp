#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "flf/model.hpp"
#include "support.hpp"

using namespace flf;
using flf::test::random_example;
using flf::test::random_vector;

namespace {

ModelSpec linear(std::size_t d, std::size_t c, std::uint64_t seed = 1) {
  return {ModelKind::kLinearSoftmax, d, c, 0, seed};
}
ModelSpec mlp(std::size_t d, std::size_t h, std::size_t c, std::uint64_t seed = 1) {
  return {ModelKind::kMlp1, d, c, h, seed};
}

}  // namespace

TEST_CASE("parameter counts follow the layout formulas") {
  CHECK(linear(4, 3).param_count() == 15);
  CHECK(init_model(linear(4, 3, 7)).size() == 15);
  CHECK(mlp(4, 8, 3).param_count() == 67);
  CHECK(init_model(mlp(4, 8, 3)).size() == 67);
  CHECK(linear(64, 10).param_count() == 650);
}

TEST_CASE("init_model is deterministic and bounded by 1/sqrt(d)") {
  const auto a = init_model(linear(4, 3, 7));
  const auto b = init_model(linear(4, 3, 7));
  CHECK(a == b);
  CHECK(init_model(linear(4, 3, 8)) != a);
  const auto w = init_model(mlp(16, 8, 3, 3));
  for (double x : w) CHECK(std::abs(x) <= 0.25);
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS(linear(0, 3).validate());
  CHECK_THROWS(linear(4, 1).validate());
  CHECK_THROWS(mlp(4, 0, 3).validate());
  CHECK(model_kind_from_string("MLP1") == ModelKind::kMlp1);
  CHECK(model_kind_from_string(to_string(ModelKind::kLinearSoftmax)) == ModelKind::kLinearSoftmax);
  CHECK_THROWS(model_kind_from_string("CNN"));
}

TEST_CASE("uniform logits give log C") {
  for (std::size_t c : {10u, 2u}) {
    const auto spec = linear(5, c);
    const ParamVector zero(spec.param_count(), 0.0);
    const Example ex{{0.1, 0.2, 0.3, 0.4, 0.5}, 1};
    CHECK(ce_loss(ex, zero, spec) == doctest::Approx(std::log(static_cast<double>(c))).epsilon(1e-12));
  }
  CHECK(std::log(10.0) == doctest::Approx(2.302585).epsilon(1e-6));
}

TEST_CASE("hand-set two-class linear model") {
  // W = [[1, 0], [0, 2]], b = [0.5, -0.5], x = (1, 1), label 0:
  // logits (1.5, 1.5) -> p0 = 0.5 -> loss ln 2. With x = (2, 0): logits
  // (2.5, -0.5), loss = ln(1 + e^-3).
  const auto spec = linear(2, 2);
  const ParamVector w{1, 0, 0, 2, 0.5, -0.5};
  CHECK(ce_loss({{1, 1}, 0}, w, spec) == doctest::Approx(std::numbers::ln2).epsilon(1e-12));
  CHECK(ce_loss({{2, 0}, 0}, w, spec) == doctest::Approx(std::log1p(std::exp(-3.0))).epsilon(1e-12));
  CHECK(ce_loss({{2, 0}, 1}, w, spec) == doctest::Approx(3.0 + std::log1p(std::exp(-3.0))).epsilon(1e-12));
  CHECK(predict(std::vector<double>{2, 0}, w, spec) == 0);
}

TEST_CASE("loss is clamped and finite") {
  const auto spec = linear(1, 2);
  const ParamVector w{1e4, -1e4, 0, 0};
  const Example ex{{1.0}, 1};
  const double loss = ce_loss(ex, w, spec);
  CHECK(std::isfinite(loss));
  CHECK(loss == doctest::Approx(-std::log(kProbFloor)));
  for (double g : ce_grad(ex, w, spec)) CHECK(g == 0.0);
}

TEST_CASE("dimension mismatches raise") {
  const auto spec = linear(3, 2);
  const auto w = init_model(spec);
  CHECK_THROWS_AS(ce_loss({{1, 2}, 0}, w, spec), DimensionError);
  CHECK_THROWS_AS(ce_grad({{1, 2, 3}, 0}, ParamVector(5), spec), DimensionError);
  CHECK_THROWS_AS(ce_loss({{1, 2, 3}, 2}, w, spec), DimensionError);
}

TEST_CASE("ce_grad matches central finite differences on 100 random cases") {
  Rng rng(42);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const bool use_mlp = i % 2 == 1;
    const std::size_t d = 2 + rng.below(6), c = 2 + rng.below(4), h = 2 + rng.below(5);
    const auto spec = use_mlp ? mlp(d, h, c, i) : linear(d, c, i);
    const auto w = random_vector(rng, spec.param_count(), -1.0, 1.0);
    worst = std::max(worst, test::fd_max_rel_error(random_example(rng, d, c), w, spec));
  }
  MESSAGE("worst relative error " << worst);
  CHECK(worst < 1e-4);
}

TEST_CASE("linear gradient equals the closed form (p - onehot) outer x") {
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const std::size_t d = 3 + rng.below(5), c = 2 + rng.below(5);
    const auto spec = linear(d, c);
    const auto w = random_vector(rng, spec.param_count());
    const auto ex = random_example(rng, d, c);
    const auto p = softmax(logits(ex.input, w, spec));
    const auto g = ce_grad(ex, w, spec);
    for (std::size_t k = 0; k < c; ++k) {
      const double r = p[k] - (k == ex.label ? 1.0 : 0.0);
      for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(g[k * d + j] - r * ex.input[j]) < 1e-10);
      CHECK(std::abs(g[c * d + k] - r) < 1e-10);
    }
  }
}

TEST_CASE("gradient vanishes as the correct class saturates") {
  const auto spec = linear(2, 3);
  const Example ex{{1.0, 0.5}, 2};
  double prev = INFINITY;
  for (double scale : {1.0, 5.0, 10.0, 20.0}) {
    const ParamVector w{0, 0, 0, 0, scale, scale, 0, 0, 0};
    const auto g = ce_grad(ex, w, spec);
    double norm = 0.0;
    for (double x : g) norm += x * x;
    norm = std::sqrt(norm);
    CHECK(norm < prev);
    prev = norm;
  }
  CHECK(prev < 1e-8);
}

TEST_CASE("Taylor residual shrinks quadratically") {
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    const auto spec = i % 2 ? mlp(5, 4, 3) : linear(5, 3);
    const auto w = random_vector(rng, spec.param_count());
    const auto ex = random_example(rng, 5, 3);
    const auto dir = random_vector(rng, spec.param_count());
    const auto g = ce_grad(ex, w, spec);
    const double l0 = ce_loss(ex, w, spec);
    auto residual = [&](double t) {
      ParamVector wt = w;
      double lin = 0.0;
      for (std::size_t k = 0; k < w.size(); ++k) {
        wt[k] += t * dir[k];
        lin += g[k] * t * dir[k];
      }
      return std::abs(ce_loss(ex, wt, spec) - l0 - lin);
    };
    const double r1 = residual(1e-2), r2 = residual(5e-3);
    CHECK(r2 <= 0.3 * r1);
  }
}

TEST_CASE("local_train edge cases") {
  const auto spec = linear(3, 2);
  const auto w0 = init_model(spec);
  const std::vector<Example> data{{{0.1, 0.2, 0.3}, 1}};

  SUBCASE("zero epochs is a no-op") {
    CHECK(local_train(data, w0, spec, {0, 4, 0.1}, 1) == w0);
  }
  SUBCASE("one example, one step") {
    const double lr = 0.3;
    const auto w1 = local_train(data, w0, spec, {1, 4, lr}, 1);
    const auto g = ce_grad(data[0], w0, spec);
    for (std::size_t k = 0; k < w0.size(); ++k) CHECK(w1[k] == doctest::Approx(w0[k] - lr * g[k]).epsilon(1e-14));
  }
  SUBCASE("empty data raises") {
    CHECK_THROWS(local_train(std::vector<Example>{}, w0, spec, {}, 1));
  }
}

TEST_CASE("local_train is deterministic per seed") {
  Rng rng(3);
  const auto spec = mlp(6, 5, 3);
  std::vector<Example> data;
  for (int i = 0; i < 70; ++i) data.push_back(random_example(rng, 6, 3));
  const auto w0 = init_model(spec);
  const TrainParams p{3, 8, 0.1};
  CHECK(local_train(data, w0, spec, p, 9) == local_train(data, w0, spec, p, 9));
  CHECK(local_train(data, w0, spec, p, 9) != local_train(data, w0, spec, p, 10));
}

TEST_CASE("separable blobs are learned") {
  Rng rng(8);
  std::vector<Example> data;
  for (int i = 0; i < 200; ++i) {
    const std::uint32_t y = i % 2;
    const double cx = y ? 0.8 : 0.2;
    data.push_back({{cx + 0.05 * rng.normal(), cx + 0.05 * rng.normal()}, y});
  }
  for (const auto& spec : {linear(2, 2), mlp(2, 4, 2)}) {
    const auto w = local_train(data, init_model(spec), spec, {20, 10, 0.5}, 1);
    CHECK(accuracy(data, w, spec) >= 0.99);
  }
}
