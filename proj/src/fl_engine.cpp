#include "flf/fl_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

#include "flf/rng.hpp"

namespace flf {

void TrainingConfig::validate() const {
  if (rounds == 0) throw std::invalid_argument("training: rounds must be positive");
  if (!(global_lr > 0.0) || !std::isfinite(global_lr))
    throw std::invalid_argument("training: global learning rate must be positive");
  if (!(local.lr > 0.0)) throw std::invalid_argument("training: local learning rate must be positive");
  if (local.batch_size == 0) throw std::invalid_argument("training: batch size must be positive");
  if (!(selection_fraction > 0.0 && selection_fraction <= 1.0))
    throw std::invalid_argument("training: selection fraction must lie in (0, 1]");
  if (checkpoint_every == 0) throw std::invalid_argument("training: checkpoint cadence must be positive");
}

bool FederatedTask::is_malicious(ClientId c) const {
  return std::binary_search(malicious.begin(), malicious.end(), c);
}

void FederatedTask::validate() const {
  model.validate();
  training.validate();
  if (client_data.empty()) throw std::invalid_argument("task: no clients");
  for (std::size_t c = 0; c < client_data.size(); ++c)
    if (client_data[c].empty()) throw std::invalid_argument("task: client " + std::to_string(c) + " has no data");
  if (!std::is_sorted(malicious.begin(), malicious.end()))
    throw std::invalid_argument("task: malicious ids must be sorted");
  for (auto c : malicious)
    if (c >= client_data.size()) throw std::invalid_argument("task: malicious id out of range");
  for (auto c : excluded)
    if (c >= client_data.size()) throw std::invalid_argument("task: excluded id out of range");
  if (excluded.size() >= client_data.size()) throw std::invalid_argument("task: every client is excluded");
  if (attack.kind == AttackKind::kEdge && !malicious.empty() && edge_set.empty())
    throw std::invalid_argument("task: Edge attack without an edge set");
  if (agg.kind == AggKind::kTrimmedMean) {
    const auto eligible = client_data.size() - excluded.size();
    const auto per_round = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(training.selection_fraction * static_cast<double>(eligible))));
    if (2 * agg.trim_k >= per_round) throw std::invalid_argument("task: trimmed mean needs 2k < clients per round");
  }
}

void RoundPlan::validate(std::size_t n_clients) const {
  if (selected.empty()) throw std::invalid_argument("round plan: empty client selection");
  if (!(lr > 0.0)) throw std::invalid_argument("round plan: learning rate must be positive");
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (selected[i] >= n_clients) throw std::invalid_argument("round plan: client id out of range");
    if (i > 0 && selected[i] <= selected[i - 1]) throw std::invalid_argument("round plan: selection not ascending");
  }
  for (auto c : attacking)
    if (!std::binary_search(selected.begin(), selected.end(), c))
      throw std::invalid_argument("round plan: attacker not selected");
}

std::vector<ClientId> select_clients(const FederatedTask& task, std::uint64_t round) {
  std::vector<ClientId> eligible;
  for (ClientId c = 0; c < task.n_clients(); ++c)
    if (!task.excluded.contains(c)) eligible.push_back(c);
  const auto k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(task.training.selection_fraction * static_cast<double>(eligible.size()))));
  if (k >= eligible.size()) return eligible;
  Rng rng(derive_seed(task.training.seed, Stream::kSelection, {round}));
  // Partial Fisher-Yates: the first k slots are a uniform sample.
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(eligible.size() - i));
    std::swap(eligible[i], eligible[j]);
  }
  eligible.resize(k);
  std::sort(eligible.begin(), eligible.end());
  return eligible;
}

RoundPlan plan_round(const FederatedTask& task, std::uint64_t round) {
  RoundPlan plan;
  plan.round = round;
  plan.lr = task.training.global_lr;
  plan.selected = select_clients(task, round);
  if (task.attack.kind != AttackKind::kNone) {
    for (auto c : plan.selected) {
      if (!task.is_malicious(c)) continue;
      const auto attacker_seed = derive_seed(task.training.seed, Stream::kAttackSchedule, {c});
      if (attack_active(round, task.attack.schedule, attacker_seed)) plan.attacking.insert(c);
    }
  }
  return plan;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < threads; ++t)
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
  }
  if (error) std::rethrow_exception(error);
}

RoundResult run_round(const FederatedTask& task, std::span<const double> w_t, const RoundPlan& plan) {
  plan.validate(task.n_clients());
  const auto& tr = task.training;
  const auto& atk = task.attack;
  const std::size_t n = plan.selected.size();

  RoundResult result;
  result.clients = plan.selected;
  result.updates.resize(n);

  parallel_for(n, tr.threads, [&](std::size_t k) {
    const ClientId c = plan.selected[k];
    const auto train_seed = derive_seed(tr.seed, Stream::kLocalTraining, {plan.round, c});
    const auto& data = task.client_data[c];
    ParamVector local;
    if (!plan.attacking.contains(c)) {
      local = local_train(data, w_t, task.model, tr.local, train_seed);
    } else if (atk.kind == AttackKind::kEdge) {
      local = local_train(poison_edge_data(data, task.edge_set, atk.target_label), w_t, task.model,
                          tr.local, train_seed);
    } else {
      Rng trigger_rng(derive_seed(tr.seed, Stream::kTrigger, {plan.round, c}));
      const double gamma = atk.kind == AttackKind::kScaling ? atk.gamma : 1.0;
      result.updates[k] = craft_scaling_update(w_t, data, task.model, atk.trigger, atk.target_label,
                                               gamma, tr.local, train_seed, trigger_rng);
      return;
    }
    for (std::size_t j = 0; j < local.size(); ++j) local[j] -= w_t[j];
    result.updates[k] = std::move(local);
  });

  // ALIE needs every active attacker's raw update before it can craft any.
  if (atk.kind == AttackKind::kAlie && plan.attacking.size() >= 2) {
    std::vector<std::size_t> slots;
    std::vector<ParamVector> raw;
    for (std::size_t k = 0; k < n; ++k)
      if (plan.attacking.contains(plan.selected[k])) {
        slots.push_back(k);
        raw.push_back(result.updates[k]);
      }
    auto crafted = alie_clamp(raw, atk.alie_z);
    for (std::size_t i = 0; i < slots.size(); ++i) result.updates[slots[i]] = std::move(crafted[i]);
  }

  const auto agg = aggregate(task.agg, result.updates);
  result.new_global.assign(w_t.begin(), w_t.end());
  for (std::size_t j = 0; j < agg.size(); ++j) result.new_global[j] += plan.lr * agg[j];
  return result;
}

namespace {

std::vector<float> to_float(std::span<const double> v) {
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  return out;
}

}  // namespace

TrainingResult run_training(const FederatedTask& task,
                            const std::optional<std::filesystem::path>& checkpoint_base) {
  task.validate();
  std::optional<CheckpointStore> store;
  if (checkpoint_base) store = CheckpointStore::create(*checkpoint_base);

  TrainingResult out;
  out.initial_global = init_model(task.model);
  ParamVector w = out.initial_global;
  for (std::uint64_t t = 1; t <= task.training.rounds; ++t) {
    const auto plan = plan_round(task, t);
    if (plan.attack_active()) ++out.attack_rounds;
    auto r = run_round(task, w, plan);
    if (store && t % task.training.checkpoint_every == 0) {
      Checkpoint cp;
      cp.round = t;
      cp.lr = plan.lr;
      cp.global_model = to_float(w);
      for (std::size_t k = 0; k < r.clients.size(); ++k)
        cp.updates.push_back({r.clients[k], to_float(r.updates[k])});
      try {
        store->save(cp);
      } catch (const std::exception& e) {
        throw CheckpointError("round " + std::to_string(t) + ": " + e.what());
      }
      out.checkpoint_rounds.push_back(t);
    }
    w = std::move(r.new_global);
  }
  out.final_global = std::move(w);
  return out;
}

}  // namespace flf
