#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flf {

/// Flattened parameters, gradients and model updates share this layout.
using ParamVector = std::vector<double>;

struct Example {
  std::vector<double> input;
  std::uint32_t label = 0;
};

enum class ModelKind { kLinearSoftmax, kMlp1 };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

/// Shape of a desk-scale classifier.
///
/// Parameter layout (row-major):
///   LinearSoftmax: W[C x d], b[C]
///   MLP1 (tanh hidden layer): W1[h x d], b1[h], W2[C x h], b2[C]
struct ModelSpec {
  ModelKind kind = ModelKind::kLinearSoftmax;
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  std::size_t hidden = 0;  // MLP1 only
  std::uint64_t seed = 0;

  std::size_t param_count() const;
  void validate() const;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Entries drawn from uniform(-1/sqrt(d), 1/sqrt(d)) with the model seed.
ParamVector init_model(const ModelSpec& spec);

/// Pre-softmax scores for one input.
std::vector<double> logits(std::span<const double> input, std::span<const double> w,
                           const ModelSpec& spec);
std::vector<double> softmax(std::span<const double> z);
std::uint32_t predict(std::span<const double> input, std::span<const double> w,
                      const ModelSpec& spec);

/// Smallest probability the loss takes the log of.
inline constexpr double kProbFloor = 1e-12;

/// -log softmax(example.label), with the probability clamped at kProbFloor.
double ce_loss(const Example& example, std::span<const double> w, const ModelSpec& spec);

/// Exact gradient of ce_loss with respect to all parameters. When the clamp
/// is active the loss is locally constant and the gradient is zero.
ParamVector ce_grad(const Example& example, std::span<const double> w, const ModelSpec& spec);

/// Adds scale * ce_grad(example, w) into out without allocating a fresh
/// vector. Returns the (clamped) loss.
double accumulate_ce_grad(const Example& example, std::span<const double> w,
                          const ModelSpec& spec, double scale, std::span<double> out);

struct TrainParams {
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  double lr = 0.05;
};

/// Plain mini-batch SGD (no momentum, no weight decay). Each epoch visits the
/// data in an order shuffled by `seed`; the last batch may be short.
ParamVector local_train(std::span<const Example> data, std::span<const double> w0,
                        const ModelSpec& spec, const TrainParams& params, std::uint64_t seed);

double accuracy(std::span<const Example> data, std::span<const double> w, const ModelSpec& spec);

}  // namespace flf
