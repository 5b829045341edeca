#include "flf/experiment.hpp"

#include <algorithm>
#include <stdexcept>

#include "flf/rng.hpp"

namespace flf {

namespace {

std::vector<Example> load_file(const std::string& path, const SyntheticSpec& s, bool edge) {
  auto f = read_examples(path);
  if (f.input_dim != s.input_dim() || f.num_classes != s.num_classes)
    throw ConfigError("dataset: " + path + " has d=" + std::to_string(f.input_dim) + " C=" +
                      std::to_string(f.num_classes) + ", expected d=" + std::to_string(s.input_dim()) +
                      " C=" + std::to_string(s.num_classes));
  if (!edge)
    for (const auto& ex : f.examples)
      if (ex.label >= s.num_classes) throw ConfigError("dataset: " + path + " has an out-of-range label");
  return std::move(f.examples);
}

}  // namespace

Dataset load_dataset(const DatasetConfig& config) {
  if (!config.from_files()) return generate_synthetic(config.synthetic);
  const auto& s = config.synthetic;
  Dataset d;
  d.grid_h = s.grid_h;
  d.grid_w = s.grid_w;
  d.num_classes = s.num_classes;
  d.train = load_file(config.train_path, s, false);
  d.test = load_file(config.test_path, s, false);
  if (!config.edge_train_path.empty()) d.edge_train = load_file(config.edge_train_path, s, true);
  if (!config.edge_test_path.empty()) d.edge_test = load_file(config.edge_test_path, s, true);
  return d;
}

Prepared prepare(const ExperimentConfig& config) {
  config.validate();
  Prepared p;
  p.data = load_dataset(config.dataset);
  p.partition = partition_noniid_indices(p.data.train, config.partition);

  auto& task = p.task;
  task.model = config.model;
  task.client_data.resize(config.partition.n_clients);
  for (std::size_t c = 0; c < config.partition.n_clients; ++c)
    for (auto idx : p.partition.client_indices[c]) task.client_data[c].push_back(p.data.train[idx]);
  task.edge_set = p.data.edge_train;
  const auto m = config.attack.malicious_count(config.partition.n_clients);
  for (std::size_t c = 0; c < m; ++c) task.malicious.push_back(static_cast<ClientId>(c));
  task.attack = config.attack;
  task.agg = config.aggregation;
  task.training = config.training;
  if (config.attack.kind == AttackKind::kEdge && task.edge_set.empty())
    throw ConfigError("dataset: the Edge attack needs a non-empty edge training set");
  task.validate();
  return p;
}

std::vector<Example> target_inputs(const ExperimentConfig& config, const Dataset& data) {
  if (config.attack.kind == AttackKind::kEdge) return data.edge_test;
  std::vector<Example> out;
  Rng rng(derive_seed(config.forensics.probe_seed, Stream::kTrigger));
  for (const auto& ex : data.test) {
    if (ex.label == config.attack.target_label) continue;
    out.push_back({embed_trigger(ex.input, config.attack.trigger, rng), ex.label});
  }
  return out;
}

std::vector<Example> target_sources(const ExperimentConfig& config, const Dataset& data) {
  if (config.attack.kind == AttackKind::kEdge) return {};
  std::vector<Example> out;
  for (const auto& ex : data.test)
    if (ex.label != config.attack.target_label) out.push_back(ex);
  return out;
}

ModelEval evaluate_model(const ExperimentConfig& config, const Dataset& data, std::span<const double> w) {
  ModelEval e;
  e.test_accuracy = accuracy(data.test, w, config.model);
  const auto targets = target_inputs(config, data);
  e.asr = targets.empty() ? 0.0 : compute_asr(w, targets, config.attack.target_label, config.model);
  return e;
}

bool attack_induced(const ExperimentConfig& config, std::span<const Example> targets,
                    std::span<const Example> sources, std::size_t i, std::span<const double> w) {
  const auto y = config.attack.target_label;
  if (predict(targets[i].input, w, config.model) != y) return false;
  return sources.empty() || predict(sources[i].input, w, config.model) != y;
}

std::optional<std::size_t> pick_target(const ExperimentConfig& config, std::span<const Example> targets,
                                       std::span<const Example> sources, std::span<const double> w) {
  if (!sources.empty() && sources.size() != targets.size())
    throw std::invalid_argument("pick_target: sources must match targets");
  for (std::size_t i = 0; i < targets.size(); ++i)
    if (attack_induced(config, targets, sources, i, w)) return i;
  return std::nullopt;
}

ProbeInput make_nontarget_probe(const ExperimentConfig& config, const Dataset& data,
                                std::span<const double> w, std::uint32_t label, std::uint64_t salt) {
  if (config.forensics.nontarget_probe == ProbeKind::kTrueNonTarget) {
    for (const auto& ex : data.test)
      if (ex.label == label && predict(ex.input, w, config.model) == label)
        return {ex, ProbeKind::kTrueNonTarget};
    throw std::runtime_error("no correctly classified test input of label " + std::to_string(label));
  }
  const auto seed = salt == 0 ? config.forensics.probe_seed : derive_seed(config.forensics.probe_seed, Stream::kProbe, {salt});
  return gen_random_nontarget(data.input_dim(), label, seed);
}

std::vector<ClientInfo> client_info(const ExperimentConfig& config, const Prepared& prepared) {
  const auto& train = prepared.data.train;
  const auto y = config.attack.target_label;
  const double global_share =
      static_cast<double>(std::count_if(train.begin(), train.end(), [&](const Example& e) { return e.label == y; })) /
      static_cast<double>(train.size());
  std::vector<ClientInfo> out;
  for (std::size_t c = 0; c < prepared.task.n_clients(); ++c) {
    const auto& local = prepared.task.client_data[c];
    ClientInfo info;
    info.client = static_cast<ClientId>(c);
    info.malicious = prepared.task.is_malicious(info.client);
    info.n_examples = local.size();
    info.n_target_label = static_cast<std::size_t>(
        std::count_if(local.begin(), local.end(), [&](const Example& e) { return e.label == y; }));
    info.category_one = !info.malicious && static_cast<double>(info.n_target_label) >
                                               global_share * static_cast<double>(info.n_examples);
    out.push_back(info);
  }
  return out;
}

std::string to_string(Outcome o) {
  return o == Outcome::kDetected ? "detected" : "no_misclassified_target";
}

std::vector<Checkpoint> load_all(const CheckpointStore& store) {
  std::vector<Checkpoint> out;
  out.reserve(store.size());
  for (const auto& cp : store) out.push_back(cp);
  return out;
}

ExperimentResult analyze(const ExperimentConfig& config, const Prepared& prepared,
                         const CheckpointStore& store, std::span<const double> final_model) {
  ExperimentResult r;
  r.config = config;
  r.final_model.assign(final_model.begin(), final_model.end());
  r.eval = evaluate_model(config, prepared.data, final_model);
  r.clients = client_info(config, prepared);
  r.checkpoint_rounds = store.rounds();

  const auto targets = target_inputs(config, prepared.data);
  r.target_index = pick_target(config, targets, target_sources(config, prepared.data), final_model);
  if (!r.target_index) {
    r.outcome = Outcome::kNoMisclassifiedTarget;
    return r;
  }
  r.outcome = Outcome::kDetected;
  const auto y = config.attack.target_label;
  const ProbeInput target{{targets[*r.target_index].input, y}, ProbeKind::kTargetMisclassified};
  const auto nontarget = make_nontarget_probe(config, prepared.data, final_model, y);
  r.pairs = influence_pairs(store, target, nontarget, config.model, config.partition.n_clients);

  const auto mcs = config.forensics.min_cluster_size;
  r.detection = detect_malicious(r.pairs, mcs);
  r.single_score = detect_single_score(r.pairs, mcs);
  const auto& truth = prepared.task.malicious;
  const auto n = config.partition.n_clients;
  r.metrics = compute_detection_metrics(r.detection->predicted, truth, n);
  r.single_score_metrics = compute_detection_metrics(r.single_score->predicted, truth, n);
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& work_dir) {
  const auto prepared = prepare(config);
  std::filesystem::create_directories(work_dir);
  const auto base = work_dir / "checkpoints.flfc";
  const auto training = run_training(prepared.task, base);
  const auto store = CheckpointStore::open(base);
  auto r = analyze(config, prepared, store, training.final_global);
  r.attack_rounds = training.attack_rounds;
  return r;
}

RecoveryResult recover_retrain(const ExperimentConfig& config, const std::set<ClientId>& excluded,
                               std::optional<ModelEval> before) {
  for (auto c : excluded)
    if (c >= config.partition.n_clients)
      throw std::out_of_range("recover: client " + std::to_string(c) + " does not exist");
  if (excluded.size() >= config.partition.n_clients)
    throw std::invalid_argument("recover: every client is excluded");

  auto prepared = prepare(config);
  RecoveryResult r;
  r.excluded.assign(excluded.begin(), excluded.end());
  if (before) {
    r.before = *before;
  } else {
    const auto original = run_training(prepared.task, std::nullopt);
    r.before = evaluate_model(config, prepared.data, original.final_global);
  }
  prepared.task.excluded = excluded;
  const auto retrained = run_training(prepared.task, std::nullopt);
  r.after = evaluate_model(config, prepared.data, retrained.final_global);
  r.model = retrained.final_global;
  return r;
}

ProbeStudy classify_probes(const ExperimentConfig& config, const Prepared& prepared,
                           std::span<const Checkpoint> checkpoints, std::span<const double> final_model) {
  const auto& spec = config.model;
  const auto y = config.attack.target_label;
  const auto k = config.forensics.probes_per_class;
  const auto n = config.partition.n_clients;
  ProbeStudy study;

  auto run_case = [&](bool is_target, std::size_t index, const std::vector<double>& input,
                      std::uint32_t predicted, std::uint64_t salt) {
    const ProbeInput probe{{input, predicted}, ProbeKind::kTargetMisclassified};
    const auto other = make_nontarget_probe(config, prepared.data, final_model, predicted, salt);
    const auto pairs = influence_pairs(checkpoints, probe, other, spec, n);
    const auto cls = classify_probe(pairs, config.forensics.min_cluster_size, config.forensics.alpha);
    study.cases.push_back({is_target, index, predicted, cls.verdict, cls.potential_ratios});
  };

  const auto targets = target_inputs(config, prepared.data);
  const auto sources = target_sources(config, prepared.data);
  for (std::size_t i = 0; i < targets.size() && study.n_target < k; ++i) {
    if (!attack_induced(config, targets, sources, i, final_model)) continue;
    run_case(true, i, targets[i].input, y, 1 + study.n_target);
    ++study.n_target;
  }
  const auto& test = prepared.data.test;
  for (std::size_t i = 0; i < test.size() && study.n_nontarget < k; ++i) {
    const auto p = predict(test[i].input, final_model, spec);
    if (p == test[i].label) continue;
    run_case(false, i, test[i].input, p, 1 + k + study.n_nontarget);
    ++study.n_nontarget;
  }

  std::size_t t_ok = 0, nt_ok = 0;
  for (const auto& c : study.cases) {
    if (c.is_target && c.verdict == ProbeVerdict::kTargetInput) ++t_ok;
    if (!c.is_target && c.verdict == ProbeVerdict::kNonTargetInput) ++nt_ok;
  }
  if (study.n_target) study.target_accuracy = static_cast<double>(t_ok) / static_cast<double>(study.n_target);
  if (study.n_nontarget)
    study.nontarget_accuracy = static_cast<double>(nt_ok) / static_cast<double>(study.n_nontarget);
  return study;
}

}  // namespace flf
