#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "flf/model.hpp"
#include "flf/partition.hpp"

namespace flf {

/// Client-level confusion counts and the rates derived from them.
///   DACC = (TP + TN) / n,  FPR = FP / (FP + TN),  FNR = FN / (FN + TP)
/// A rate whose denominator is zero is reported as 0.
struct DetectionMetrics {
  std::size_t n = 0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double dacc = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
};

DetectionMetrics compute_detection_metrics(std::span<const ClientId> predicted,
                                           std::span<const ClientId> truth, std::size_t n);

/// Fraction of `targets` the model assigns to `target_label`.
double compute_asr(std::span<const double> w, std::span<const Example> targets,
                   std::uint32_t target_label, const ModelSpec& spec);

}  // namespace flf
