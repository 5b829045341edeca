#include "flf/aggregate.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace flf {

std::string to_string(AggKind kind) {
  switch (kind) {
    case AggKind::kFedAvg:
      return "FedAvg";
    case AggKind::kTrimmedMean:
      return "TrimmedMean";
    case AggKind::kCoordinateMedian:
      return "CoordinateMedian";
  }
  return "?";
}

AggKind agg_kind_from_string(const std::string& s) {
  if (s == "FedAvg") return AggKind::kFedAvg;
  if (s == "TrimmedMean") return AggKind::kTrimmedMean;
  if (s == "CoordinateMedian") return AggKind::kCoordinateMedian;
  throw std::invalid_argument("unknown aggregation rule: " + s);
}

ParamVector aggregate(const AggRule& rule, std::span<const ParamVector> updates) {
  if (updates.empty()) throw std::invalid_argument("aggregate: no updates");
  const std::size_t dim = updates.front().size();
  for (const auto& u : updates)
    if (u.size() != dim) throw DimensionError("aggregate: updates have different dimensions");
  const std::size_t n = updates.size();
  if (rule.kind == AggKind::kTrimmedMean && 2 * rule.trim_k >= n)
    throw std::invalid_argument("aggregate: trimmed mean needs 2k < number of updates");

  ParamVector out(dim);
  std::vector<double> column(n);
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t i = 0; i < n; ++i) column[i] = updates[i][j];
    std::sort(column.begin(), column.end());
    switch (rule.kind) {
      case AggKind::kFedAvg:
      case AggKind::kTrimmedMean: {
        const std::size_t k = rule.kind == AggKind::kTrimmedMean ? rule.trim_k : 0;
        double sum = 0.0;
        for (std::size_t i = k; i < n - k; ++i) sum += column[i];
        out[j] = sum / static_cast<double>(n - 2 * k);
        break;
      }
      case AggKind::kCoordinateMedian:
        out[j] = n % 2 == 1 ? column[n / 2] : 0.5 * (column[n / 2 - 1] + column[n / 2]);
        break;
    }
  }
  return out;
}

}  // namespace flf
