#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "flf/aggregate.hpp"
#include "flf/attacks.hpp"
#include "flf/dataset.hpp"
#include "flf/fl_engine.hpp"
#include "flf/influence.hpp"
#include "flf/model.hpp"
#include "flf/partition.hpp"

namespace flf {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dataset source: the synthetic generator, or example files in the text
/// format of write_examples. Files, when given, override the generator.
struct DatasetConfig {
  SyntheticSpec synthetic;
  std::string train_path;
  std::string test_path;
  std::string edge_train_path;
  std::string edge_test_path;

  bool from_files() const { return !train_path.empty(); }
};

struct ForensicsConfig {
  ProbeKind nontarget_probe = ProbeKind::kTrueNonTarget;
  std::size_t min_cluster_size = 7;
  double alpha = 0.2;  // classify_probe band
  std::uint64_t probe_seed = 1;
  std::size_t probes_per_class = 20;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  PartitionConfig partition;
  ModelSpec model;
  TrainingConfig training;
  AggRule aggregation;
  AttackConfig attack;
  ForensicsConfig forensics;

  /// Cross-module consistency: grid and class counts line up, the trigger
  /// fits, every sub-config is valid.
  void validate() const;
  /// Replaces every seed with one derived from `seed`.
  void override_seed(std::uint64_t seed);
};

/// The defaults of the desk-scale scenario (trigger grid and model shape
/// already synced to the dataset).
ExperimentConfig default_config();

nlohmann::json to_json(const ExperimentConfig& config);
/// Strict: unknown keys and wrongly typed values raise ConfigError naming the
/// offending key path. Missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& config);

}  // namespace flf
