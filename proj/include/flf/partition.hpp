#pragma once

#include <cstdint>
#include <vector>

#include "flf/model.hpp"

namespace flf {

using ClientId = std::uint32_t;

struct PartitionConfig {
  std::size_t n_clients = 100;
  std::size_t num_groups = 10;  // equals the number of classes
  double rho = 0.5;             // non-iid degree in [1/C, 1]
  std::uint64_t seed = 1;

  void validate() const;
};

struct Partition {
  std::vector<std::size_t> group_of_client;
  std::vector<std::vector<std::size_t>> client_indices;  // indices into the source data
};

/// Label-skew partition: clients are split uniformly at random into C equal
/// groups; an example with label y goes to group y with probability rho and
/// to each other group with probability (1 - rho)/(C - 1), then to a client
/// of that group uniformly at random. Throws if a client ends up empty.
Partition partition_noniid_indices(const std::vector<Example>& data, const PartitionConfig& config);

std::vector<std::vector<Example>> partition_noniid(const std::vector<Example>& data,
                                                   const PartitionConfig& config);

}  // namespace flf
