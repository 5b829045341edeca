#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "flf/model.hpp"

namespace flf {

enum class AggKind { kFedAvg, kTrimmedMean, kCoordinateMedian };

struct AggRule {
  AggKind kind = AggKind::kFedAvg;
  std::size_t trim_k = 0;  // TrimmedMean only
};

std::string to_string(AggKind kind);
AggKind agg_kind_from_string(const std::string& s);

/// Coordinate-wise aggregation of equally weighted updates.
///
/// Every rule sorts the values of each coordinate before reducing them, so the
/// result is bit-identical under any reordering of `updates`.
///   FedAvg:           mean
///   TrimmedMean(k):   mean after dropping the k largest and k smallest
///   CoordinateMedian: median; mean of the middle two for even counts
ParamVector aggregate(const AggRule& rule, std::span<const ParamVector> updates);

}  // namespace flf
