#include "flf/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flf/rng.hpp"

namespace flf {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLinearSoftmax:
      return "LinearSoftmax";
    case ModelKind::kMlp1:
      return "MLP1";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "LinearSoftmax") return ModelKind::kLinearSoftmax;
  if (s == "MLP1") return ModelKind::kMlp1;
  throw std::invalid_argument("unknown model kind: " + s);
}

std::size_t ModelSpec::param_count() const {
  const std::size_t d = input_dim, c = num_classes, h = hidden;
  if (kind == ModelKind::kLinearSoftmax) return d * c + c;
  return d * h + h + h * c + c;
}

void ModelSpec::validate() const {
  if (input_dim == 0) throw std::invalid_argument("model: input_dim must be positive");
  if (num_classes < 2) throw std::invalid_argument("model: need at least 2 classes");
  if (kind == ModelKind::kMlp1 && hidden == 0)
    throw std::invalid_argument("model: MLP1 needs a positive hidden width");
}

ParamVector init_model(const ModelSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, Stream::kModelInit));
  const double a = 1.0 / std::sqrt(static_cast<double>(spec.input_dim));
  ParamVector w(spec.param_count());
  for (auto& v : w) v = rng.uniform(-a, a);
  return w;
}

namespace {

void check_dims(std::span<const double> input, std::span<const double> w, const ModelSpec& spec) {
  if (input.size() != spec.input_dim)
    throw DimensionError("input has dimension " + std::to_string(input.size()) + ", model expects " +
                         std::to_string(spec.input_dim));
  if (w.size() != spec.param_count())
    throw DimensionError("parameter vector has length " + std::to_string(w.size()) +
                         ", model expects " + std::to_string(spec.param_count()));
}

// z[c] = b[c] + W[c,:] . x
void affine(std::span<const double> weights, std::span<const double> bias,
            std::span<const double> x, std::span<double> z) {
  const std::size_t in = x.size();
  for (std::size_t c = 0; c < z.size(); ++c) {
    const double* row = weights.data() + c * in;
    double acc = bias[c];
    for (std::size_t j = 0; j < in; ++j) acc += row[j] * x[j];
    z[c] = acc;
  }
}

struct Forward {
  std::vector<double> hidden;  // MLP1 activations
  std::vector<double> probs;
  double loss = 0.0;
  bool clamped = false;
};

Forward forward(std::span<const double> input, std::span<const double> w, const ModelSpec& spec,
                std::uint32_t label) {
  const std::size_t d = spec.input_dim, c = spec.num_classes, h = spec.hidden;
  Forward f;
  f.probs.resize(c);
  if (spec.kind == ModelKind::kLinearSoftmax) {
    affine(w.subspan(0, c * d), w.subspan(c * d, c), input, f.probs);
  } else {
    f.hidden.resize(h);
    affine(w.subspan(0, h * d), w.subspan(h * d, h), input, f.hidden);
    for (auto& a : f.hidden) a = std::tanh(a);
    const std::size_t off = h * d + h;
    affine(w.subspan(off, c * h), w.subspan(off + c * h, c), f.hidden, f.probs);
  }
  const double zmax = *std::max_element(f.probs.begin(), f.probs.end());
  double denom = 0.0;
  for (auto& z : f.probs) denom += std::exp(z - zmax);
  const double log_denom = std::log(denom);
  const double log_py = f.probs[label] - zmax - log_denom;
  for (auto& z : f.probs) z = std::exp(z - zmax - log_denom);
  if (log_py < std::log(kProbFloor)) {
    f.clamped = true;
    f.loss = -std::log(kProbFloor);
  } else {
    f.loss = -log_py;
  }
  return f;
}

}  // namespace

std::vector<double> logits(std::span<const double> input, std::span<const double> w,
                           const ModelSpec& spec) {
  check_dims(input, w, spec);
  const std::size_t d = spec.input_dim, c = spec.num_classes, h = spec.hidden;
  std::vector<double> z(c);
  if (spec.kind == ModelKind::kLinearSoftmax) {
    affine(w.subspan(0, c * d), w.subspan(c * d, c), input, z);
  } else {
    std::vector<double> a(h);
    affine(w.subspan(0, h * d), w.subspan(h * d, h), input, a);
    for (auto& v : a) v = std::tanh(v);
    const std::size_t off = h * d + h;
    affine(w.subspan(off, c * h), w.subspan(off + c * h, c), a, z);
  }
  return z;
}

std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> p(z.begin(), z.end());
  const double zmax = *std::max_element(p.begin(), p.end());
  double denom = 0.0;
  for (auto& v : p) {
    v = std::exp(v - zmax);
    denom += v;
  }
  for (auto& v : p) v /= denom;
  return p;
}

std::uint32_t predict(std::span<const double> input, std::span<const double> w,
                      const ModelSpec& spec) {
  const auto z = logits(input, w, spec);
  return static_cast<std::uint32_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

double ce_loss(const Example& example, std::span<const double> w, const ModelSpec& spec) {
  check_dims(example.input, w, spec);
  if (example.label >= spec.num_classes) throw DimensionError("label out of range");
  return forward(example.input, w, spec, example.label).loss;
}

double accumulate_ce_grad(const Example& example, std::span<const double> w,
                          const ModelSpec& spec, double scale, std::span<double> out) {
  check_dims(example.input, w, spec);
  if (example.label >= spec.num_classes) throw DimensionError("label out of range");
  if (out.size() != w.size()) throw DimensionError("gradient buffer has the wrong length");
  const Forward f = forward(example.input, w, spec, example.label);
  if (f.clamped) return f.loss;

  const std::size_t d = spec.input_dim, c = spec.num_classes, h = spec.hidden;
  std::vector<double> delta = f.probs;  // dL/dz = p - onehot(y)
  delta[example.label] -= 1.0;
  const auto& x = example.input;

  if (spec.kind == ModelKind::kLinearSoftmax) {
    for (std::size_t k = 0; k < c; ++k) {
      const double g = scale * delta[k];
      double* row = out.data() + k * d;
      for (std::size_t j = 0; j < d; ++j) row[j] += g * x[j];
      out[c * d + k] += g;
    }
    return f.loss;
  }

  const std::size_t off = h * d + h;
  const double* w2 = w.data() + off;
  std::vector<double> back(h, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    const double g = scale * delta[k];
    double* row = out.data() + off + k * h;
    for (std::size_t m = 0; m < h; ++m) {
      row[m] += g * f.hidden[m];
      back[m] += delta[k] * w2[k * h + m];
    }
    out[off + c * h + k] += g;
  }
  for (std::size_t m = 0; m < h; ++m) {
    const double a = f.hidden[m];
    const double g = scale * back[m] * (1.0 - a * a);
    double* row = out.data() + m * d;
    for (std::size_t j = 0; j < d; ++j) row[j] += g * x[j];
    out[h * d + m] += g;
  }
  return f.loss;
}

ParamVector ce_grad(const Example& example, std::span<const double> w, const ModelSpec& spec) {
  ParamVector g(w.size(), 0.0);
  accumulate_ce_grad(example, w, spec, 1.0, g);
  return g;
}

ParamVector local_train(std::span<const Example> data, std::span<const double> w0,
                        const ModelSpec& spec, const TrainParams& params, std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("local_train: empty training data");
  if (params.batch_size == 0) throw std::invalid_argument("local_train: batch_size must be positive");
  ParamVector w(w0.begin(), w0.end());
  if (w.size() != spec.param_count()) throw DimensionError("local_train: parameter length mismatch");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  ParamVector grad(w.size());
  Rng rng(seed);
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += params.batch_size) {
      const std::size_t end = std::min(order.size(), start + params.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = start; i < end; ++i)
        accumulate_ce_grad(data[order[i]], w, spec, scale, grad);
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= params.lr * grad[k];
    }
  }
  return w;
}

double accuracy(std::span<const Example> data, std::span<const double> w, const ModelSpec& spec) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : data) hits += predict(ex.input, w, spec) == ex.label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace flf
