#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "flf/config.hpp"
#include "flf/detection.hpp"
#include "flf/metrics.hpp"

namespace flf {

/// Data, partition and the federated task of one configuration.
struct Prepared {
  Dataset data;
  Partition partition;
  FederatedTask task;
};

/// Generates (or loads) the dataset. File-backed datasets must agree with the
/// configured grid and class count.
Dataset load_dataset(const DatasetConfig& config);

Prepared prepare(const ExperimentConfig& config);

/// Inputs the attacker wants classified as the target label, with their true
/// labels: edge-case test inputs for the Edge attack, otherwise triggered
/// copies of the test inputs whose true label differs from the target.
std::vector<Example> target_inputs(const ExperimentConfig& config, const Dataset& data);

/// The untriggered originals of target_inputs, index for index; empty for the
/// Edge attack, whose inputs have no clean counterpart.
std::vector<Example> target_sources(const ExperimentConfig& config, const Dataset& data);

struct ModelEval {
  double test_accuracy = 0.0;
  double asr = 0.0;
};

ModelEval evaluate_model(const ExperimentConfig& config, const Dataset& data, std::span<const double> w);

/// Index (into target_inputs) of the first target input predicted as the
/// target label whose clean source (when given) is not; nullopt when the
/// attack never took hold.
std::optional<std::size_t> pick_target(const ExperimentConfig& config, std::span<const Example> targets,
                                       std::span<const Example> sources, std::span<const double> w);

/// True when target i is predicted as the target label and, for triggered
/// inputs, its clean source is not.
bool attack_induced(const ExperimentConfig& config, std::span<const Example> targets,
                    std::span<const Example> sources, std::size_t i, std::span<const double> w);

/// Non-target probe carrying `label`: a random uniform input, or the first
/// test input of that class the model gets right.
ProbeInput make_nontarget_probe(const ExperimentConfig& config, const Dataset& data,
                                std::span<const double> w, std::uint32_t label, std::uint64_t salt = 0);

/// Ground truth per client, for scoring and for the report.
struct ClientInfo {
  ClientId client = 0;
  bool malicious = false;
  bool category_one = false;  // benign with a larger target-label share than the whole training set
  std::size_t n_examples = 0;
  std::size_t n_target_label = 0;
};

std::vector<ClientInfo> client_info(const ExperimentConfig& config, const Prepared& prepared);

enum class Outcome { kDetected, kNoMisclassifiedTarget };
std::string to_string(Outcome o);

struct ExperimentResult {
  ExperimentConfig config;
  Outcome outcome = Outcome::kNoMisclassifiedTarget;
  ModelEval eval;
  std::size_t attack_rounds = 0;
  std::vector<std::uint64_t> checkpoint_rounds;
  std::vector<ClientInfo> clients;
  std::optional<std::size_t> target_index;
  std::vector<InfluencePair> pairs;
  std::optional<DetectionReport> detection;
  std::optional<DetectionReport> single_score;
  std::optional<DetectionMetrics> metrics;
  std::optional<DetectionMetrics> single_score_metrics;
  ParamVector final_model;
};

/// Full pipeline: data, training with checkpoints under `work_dir`, target
/// pick, probes, influence pairs, detection and metrics. A run in which no
/// target input is misclassified stops after training with outcome
/// kNoMisclassifiedTarget.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& work_dir);

/// Forensics on an existing checkpoint store and final model.
ExperimentResult analyze(const ExperimentConfig& config, const Prepared& prepared,
                         const CheckpointStore& store, std::span<const double> final_model);

struct RecoveryResult {
  std::vector<ClientId> excluded;
  ModelEval before;
  ModelEval after;
  ParamVector model;
};

/// Retrains from scratch without `excluded`. `before` is the evaluation of
/// the original model; when absent the original training is rerun.
RecoveryResult recover_retrain(const ExperimentConfig& config, const std::set<ClientId>& excluded,
                               std::optional<ModelEval> before = std::nullopt);

struct ProbeCase {
  bool is_target = false;    // ground truth
  std::size_t index = 0;     // into target_inputs (target) or the test set (non-target)
  std::uint32_t predicted = 0;
  ProbeVerdict verdict = ProbeVerdict::kNonTargetInput;
  std::vector<double> potential_ratios;
};

struct ProbeStudy {
  std::vector<ProbeCase> cases;
  std::size_t n_target = 0, n_nontarget = 0;
  double target_accuracy = 0.0;     // share of target probes flagged TargetInput
  double nontarget_accuracy = 0.0;  // share of non-target probes flagged NonTargetInput
};

/// Classifies up to probes_per_class misclassified target inputs and
/// misclassified clean test inputs (each with its predicted label).
ProbeStudy classify_probes(const ExperimentConfig& config, const Prepared& prepared,
                           std::span<const Checkpoint> checkpoints, std::span<const double> final_model);

std::vector<Checkpoint> load_all(const CheckpointStore& store);

}  // namespace flf
