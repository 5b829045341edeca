#include "flf/partition.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

#include "flf/rng.hpp"

namespace flf {

void PartitionConfig::validate() const {
  if (num_groups < 2) throw std::invalid_argument("partition: need at least 2 groups");
  if (n_clients < num_groups)
    throw std::invalid_argument("partition: n_clients (" + std::to_string(n_clients) +
                                ") is smaller than the number of groups (" +
                                std::to_string(num_groups) + ")");
  const double lo = 1.0 / static_cast<double>(num_groups);
  if (!(rho >= lo - 1e-12 && rho <= 1.0))
    throw std::invalid_argument("partition: rho must lie in [1/C, 1]");
}

Partition partition_noniid_indices(const std::vector<Example>& data, const PartitionConfig& config) {
  config.validate();
  const std::size_t n = config.n_clients, groups = config.num_groups;
  Rng rng(derive_seed(config.seed, Stream::kPartition));

  std::vector<ClientId> perm(n);
  std::iota(perm.begin(), perm.end(), ClientId{0});
  shuffle(perm, rng);
  Partition p;
  p.group_of_client.resize(n);
  std::vector<std::vector<ClientId>> members(groups);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t g = k * groups / n;
    p.group_of_client[perm[k]] = g;
    members[g].push_back(perm[k]);
  }

  p.client_indices.assign(n, {});
  const double other = (1.0 - config.rho) / static_cast<double>(groups - 1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t y = data[i].label;
    if (y >= groups) throw std::invalid_argument("partition: label exceeds group count");
    std::size_t g = y;
    const double u = rng.uniform01();
    if (u >= config.rho) {
      // Equal mass on each of the other C-1 groups.
      auto k = static_cast<std::size_t>((u - config.rho) / other);
      if (k >= groups - 1) k = groups - 2;
      g = k < y ? k : k + 1;
    }
    const auto& m = members[g];
    p.client_indices[m[rng.below(m.size())]].push_back(i);
  }
  for (std::size_t c = 0; c < n; ++c)
    if (p.client_indices[c].empty())
      throw std::runtime_error("partition: client " + std::to_string(c) +
                               " received no examples; enlarge the dataset or reduce n_clients");
  return p;
}

std::vector<std::vector<Example>> partition_noniid(const std::vector<Example>& data,
                                                   const PartitionConfig& config) {
  const auto p = partition_noniid_indices(data, config);
  std::vector<std::vector<Example>> out(p.client_indices.size());
  for (std::size_t c = 0; c < out.size(); ++c)
    for (auto i : p.client_indices[c]) out[c].push_back(data[i]);
  return out;
}

}  // namespace flf
