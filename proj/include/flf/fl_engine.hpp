#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "flf/aggregate.hpp"
#include "flf/attacks.hpp"
#include "flf/checkpoint_store.hpp"
#include "flf/model.hpp"
#include "flf/partition.hpp"

namespace flf {

struct TrainingConfig {
  std::size_t rounds = 200;
  double global_lr = 1.0;  // alpha_t, constant over rounds
  TrainParams local;
  double selection_fraction = 1.0;
  std::size_t checkpoint_every = 10;
  std::uint64_t seed = 1;
  std::size_t threads = 0;  // 0: hardware concurrency

  void validate() const;
};

/// Everything a federated run needs besides the global model itself.
struct FederatedTask {
  ModelSpec model;
  std::vector<std::vector<Example>> client_data;
  std::vector<Example> edge_set;    // Edge attack only
  std::vector<ClientId> malicious;  // ground truth, sorted
  AttackConfig attack;
  AggRule agg;
  TrainingConfig training;
  std::set<ClientId> excluded;  // never selected (recovery retraining)

  std::size_t n_clients() const { return client_data.size(); }
  bool is_malicious(ClientId c) const;
  void validate() const;
};

struct RoundPlan {
  std::uint64_t round = 0;
  std::vector<ClientId> selected;  // ascending
  double lr = 1.0;
  std::set<ClientId> attacking;    // malicious clients whose schedule fires this round

  bool attack_active() const { return !attacking.empty(); }
  void validate(std::size_t n_clients) const;
};

/// Uniform sample without replacement of max(1, round(fraction * |eligible|))
/// clients, drawn from the round's own seeded stream; returned ascending.
std::vector<ClientId> select_clients(const FederatedTask& task, std::uint64_t round);

RoundPlan plan_round(const FederatedTask& task, std::uint64_t round);

struct RoundResult {
  ParamVector new_global;
  std::vector<ClientId> clients;        // ascending, aligned with updates
  std::vector<ParamVector> updates;
};

/// One FL round: each selected client returns g = w_local - w_t (attackers
/// route through the attack module), then
///   w_{t+1} = w_t + lr * Agg(g, ascending client id).
/// Local training of the selected clients may run on several threads; the
/// result does not depend on scheduling.
RoundResult run_round(const FederatedTask& task, std::span<const double> w_t, const RoundPlan& plan);

struct TrainingResult {
  ParamVector initial_global;
  ParamVector final_global;
  std::vector<std::uint64_t> checkpoint_rounds;
  std::size_t attack_rounds = 0;  // rounds with at least one active attacker
};

/// Runs rounds 1..R from init_model(task.model). When `checkpoint_base` is
/// set, every round t with t % checkpoint_every == 0 is persisted as
/// (t, alpha_t, w_t, {g_t^(i)}). Store failures are rethrown with the round.
TrainingResult run_training(const FederatedTask& task,
                            const std::optional<std::filesystem::path>& checkpoint_base);

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace flf
