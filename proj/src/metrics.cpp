#include "flf/metrics.hpp"

#include <stdexcept>
#include <string>

namespace flf {

DetectionMetrics compute_detection_metrics(std::span<const ClientId> predicted,
                                           std::span<const ClientId> truth, std::size_t n) {
  std::vector<char> is_pred(n, 0), is_true(n, 0);
  for (auto c : predicted) {
    if (c >= n) throw std::out_of_range("metrics: predicted id " + std::to_string(c) + " out of range");
    is_pred[c] = 1;
  }
  for (auto c : truth) {
    if (c >= n) throw std::out_of_range("metrics: true id " + std::to_string(c) + " out of range");
    is_true[c] = 1;
  }
  DetectionMetrics m;
  m.n = n;
  for (std::size_t c = 0; c < n; ++c) {
    if (is_pred[c] && is_true[c]) ++m.tp;
    else if (is_pred[c]) ++m.fp;
    else if (is_true[c]) ++m.fn;
    else ++m.tn;
  }
  const auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  m.dacc = ratio(m.tp + m.tn, n);
  m.fpr = ratio(m.fp, m.fp + m.tn);
  m.fnr = ratio(m.fn, m.fn + m.tp);
  return m;
}

double compute_asr(std::span<const double> w, std::span<const Example> targets,
                   std::uint32_t target_label, const ModelSpec& spec) {
  if (targets.empty()) throw std::invalid_argument("compute_asr: no target inputs");
  std::size_t hits = 0;
  for (const auto& ex : targets) hits += predict(ex.input, w, spec) == target_label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(targets.size());
}

}  // namespace flf
