#include "flf/config.hpp"

#include <concepts>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace flf {

using nlohmann::json;

namespace {

std::string schedule_mode_name(AttackSchedule::Mode m) {
  return m == AttackSchedule::Mode::kEvery ? "every" : "probability";
}

// Reads one JSON object, remembering which keys were consumed so that the
// leftovers can be rejected.
class Section {
 public:
  Section(const json& parent, const std::string& key, const std::string& path)
      : path_(path.empty() ? key : path + "." + key) {
    if (!parent.contains(key)) return;
    node_ = &parent.at(key);
    if (!node_->is_object()) fail(path_, "expected an object");
  }
  explicit Section(const json& root) : node_(&root) {
    if (!root.is_object()) fail("<root>", "expected an object");
  }

  const json* node() const { return node_; }
  const std::string& path() const { return path_; }
  void claim(const std::string& key) { known_.insert(key); }

  template <std::unsigned_integral T>
  void get(const std::string& key, T& out) {
    if (const json* v = take(key)) {
      // Values built in code are signed even when non-negative.
      const bool non_negative = v->is_number_unsigned() || (v->is_number_integer() && v->get<std::int64_t>() >= 0);
      if (!non_negative || v->get<std::uint64_t>() > std::numeric_limits<T>::max())
        fail(at(key), "expected a non-negative integer in range");
      out = v->get<T>();
    }
  }
  void get(const std::string& key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) fail(at(key), "expected a number");
      out = v->get<double>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) fail(at(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  void get(const std::string& key, std::vector<double>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) fail(at(key), "expected an array of numbers");
      std::vector<double> r;
      for (const auto& e : *v) {
        if (!e.is_number()) fail(at(key), "expected an array of numbers");
        r.push_back(e.get<double>());
      }
      out = std::move(r);
    }
  }
  template <class Enum, class Parse>
  void get_enum(const std::string& key, Enum& out, Parse parse) {
    std::string name;
    get(key, name);
    if (name.empty()) return;
    try {
      out = parse(name);
    } catch (const std::exception& e) {
      fail(at(key), e.what());
    }
  }

  void finish() const {
    if (!node_) return;
    for (const auto& [k, _] : node_->items())
      if (!known_.count(k)) fail(at(k), "unknown key");
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ConfigError("config: " + where + ": " + what);
  }

 private:
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const json* take(const std::string& key) {
    known_.insert(key);
    if (!node_ || !node_->contains(key)) return nullptr;
    return &node_->at(key);
  }

  const json* node_ = nullptr;
  std::string path_;
  std::set<std::string> known_;
};

void sync_shapes(ExperimentConfig& c) {
  const auto& s = c.dataset.synthetic;
  c.model.input_dim = s.input_dim();
  c.model.num_classes = s.num_classes;
  c.partition.num_groups = s.num_classes;
  c.attack.trigger.grid_h = s.grid_h;
  c.attack.trigger.grid_w = s.grid_w;
}

}  // namespace

void ExperimentConfig::validate() const {
  const auto& s = dataset.synthetic;
  if (s.grid_h == 0 || s.grid_w == 0) throw ConfigError("config: dataset grid must be non-empty");
  if (s.num_classes < 2) throw ConfigError("config: dataset.num_classes must be >= 2");
  if (!dataset.from_files()) {
    if (s.n_train == 0 || s.n_test == 0) throw ConfigError("config: dataset needs train and test examples");
    if (!(s.noise >= 0.0) || !(s.mean_lo <= s.mean_hi))
      throw ConfigError("config: dataset noise/mean range invalid");
  } else if (dataset.test_path.empty()) {
    throw ConfigError("config: dataset.test_path is required with dataset.train_path");
  }
  if (model.input_dim != s.input_dim())
    throw ConfigError("config: model input_dim does not match grid_h * grid_w");
  if (model.num_classes != s.num_classes)
    throw ConfigError("config: model num_classes does not match dataset.num_classes");
  if (partition.num_groups != s.num_classes)
    throw ConfigError("config: partition groups must equal the number of classes");
  if (attack.trigger.grid_h != s.grid_h || attack.trigger.grid_w != s.grid_w)
    throw ConfigError("config: trigger grid does not match the dataset grid");
  if (attack.kind == AttackKind::kEdge && !dataset.from_files() && s.n_edge_train == 0)
    throw ConfigError("config: Edge attack needs dataset.n_edge_train > 0");
  if (forensics.min_cluster_size < 2) throw ConfigError("config: forensics.min_cluster_size must be >= 2");
  if (!(forensics.alpha > 0.0 && forensics.alpha <= 1.0))
    throw ConfigError("config: forensics.alpha must lie in (0, 1]");
  if (forensics.nontarget_probe == ProbeKind::kTargetMisclassified)
    throw ConfigError("config: forensics.nontarget_probe must be a non-target kind");
  try {
    model.validate();
    partition.validate();
    training.validate();
    attack.validate(partition.n_clients, s.num_classes);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (aggregation.kind == AggKind::kTrimmedMean && aggregation.trim_k == 0)
    throw ConfigError("config: TrimmedMean needs aggregation.trim_k > 0");
}

void ExperimentConfig::override_seed(std::uint64_t seed) {
  // Each consumer derives its own stream from the master seed, so one value
  // can drive every component without correlating their draws.
  dataset.synthetic.seed = seed;
  partition.seed = seed;
  model.seed = seed;
  training.seed = seed;
  forensics.probe_seed = seed;
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  sync_shapes(c);
  return c;
}

json to_json(const ExperimentConfig& c) {
  const auto& s = c.dataset.synthetic;
  json j;
  j["dataset"] = {{"grid_h", s.grid_h},
                  {"grid_w", s.grid_w},
                  {"num_classes", s.num_classes},
                  {"n_train", s.n_train},
                  {"n_test", s.n_test},
                  {"n_edge_train", s.n_edge_train},
                  {"n_edge_test", s.n_edge_test},
                  {"mean_lo", s.mean_lo},
                  {"mean_hi", s.mean_hi},
                  {"density", s.density},
                  {"noise", s.noise},
                  {"seed", s.seed},
                  {"train_path", c.dataset.train_path},
                  {"test_path", c.dataset.test_path},
                  {"edge_train_path", c.dataset.edge_train_path},
                  {"edge_test_path", c.dataset.edge_test_path}};
  j["partition"] = {{"n_clients", c.partition.n_clients}, {"rho", c.partition.rho}, {"seed", c.partition.seed}};
  j["model"] = {{"kind", to_string(c.model.kind)}, {"hidden", c.model.hidden}, {"seed", c.model.seed}};
  j["training"] = {{"rounds", c.training.rounds},
                   {"global_lr", c.training.global_lr},
                   {"local_lr", c.training.local.lr},
                   {"batch_size", c.training.local.batch_size},
                   {"epochs", c.training.local.epochs},
                   {"selection_fraction", c.training.selection_fraction},
                   {"checkpoint_every", c.training.checkpoint_every},
                   {"aggregation", to_string(c.aggregation.kind)},
                   {"trim_k", c.aggregation.trim_k},
                   {"seed", c.training.seed},
                   {"threads", c.training.threads}};
  j["attack"] = {{"kind", to_string(c.attack.kind)},
                 {"malicious_fraction", c.attack.malicious_fraction},
                 {"target_label", c.attack.target_label},
                 {"gamma", c.attack.gamma},
                 {"alie_z", c.attack.alie_z},
                 {"schedule", schedule_mode_name(c.attack.schedule.mode)},
                 {"every", c.attack.schedule.every},
                 {"probability", c.attack.schedule.probability},
                 {"trigger_location", to_string(c.attack.trigger.location)},
                 {"trigger_size", c.attack.trigger.size},
                 {"trigger_values", c.attack.trigger.values}};
  j["forensics"] = {{"nontarget_probe", to_string(c.forensics.nontarget_probe)},
                    {"min_cluster_size", c.forensics.min_cluster_size},
                    {"alpha", c.forensics.alpha},
                    {"probe_seed", c.forensics.probe_seed},
                    {"probes_per_class", c.forensics.probes_per_class}};
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c = default_config();
  Section root(j);

  root.claim("dataset");
  Section ds(j, "dataset", "");
  auto& s = c.dataset.synthetic;
  ds.get("grid_h", s.grid_h);
  ds.get("grid_w", s.grid_w);
  ds.get("num_classes", s.num_classes);
  ds.get("n_train", s.n_train);
  ds.get("n_test", s.n_test);
  ds.get("n_edge_train", s.n_edge_train);
  ds.get("n_edge_test", s.n_edge_test);
  ds.get("mean_lo", s.mean_lo);
  ds.get("mean_hi", s.mean_hi);
  ds.get("density", s.density);
  ds.get("noise", s.noise);
  ds.get("seed", s.seed);
  ds.get("train_path", c.dataset.train_path);
  ds.get("test_path", c.dataset.test_path);
  ds.get("edge_train_path", c.dataset.edge_train_path);
  ds.get("edge_test_path", c.dataset.edge_test_path);
  ds.finish();
  sync_shapes(c);

  root.claim("partition");
  Section pt(j, "partition", "");
  pt.get("n_clients", c.partition.n_clients);
  pt.get("rho", c.partition.rho);
  pt.get("seed", c.partition.seed);
  pt.finish();

  root.claim("model");
  Section md(j, "model", "");
  md.get_enum("kind", c.model.kind, model_kind_from_string);
  md.get("hidden", c.model.hidden);
  md.get("seed", c.model.seed);
  md.finish();

  root.claim("training");
  Section tr(j, "training", "");
  tr.get("rounds", c.training.rounds);
  tr.get("global_lr", c.training.global_lr);
  tr.get("local_lr", c.training.local.lr);
  tr.get("batch_size", c.training.local.batch_size);
  tr.get("epochs", c.training.local.epochs);
  tr.get("selection_fraction", c.training.selection_fraction);
  tr.get("checkpoint_every", c.training.checkpoint_every);
  tr.get_enum("aggregation", c.aggregation.kind, agg_kind_from_string);
  tr.get("trim_k", c.aggregation.trim_k);
  tr.get("seed", c.training.seed);
  tr.get("threads", c.training.threads);
  tr.finish();

  root.claim("attack");
  Section at(j, "attack", "");
  at.get_enum("kind", c.attack.kind, attack_kind_from_string);
  at.get("malicious_fraction", c.attack.malicious_fraction);
  at.get("target_label", c.attack.target_label);
  at.get("gamma", c.attack.gamma);
  at.get("alie_z", c.attack.alie_z);
  at.get_enum("schedule", c.attack.schedule.mode, [](const std::string& m) {
    if (m == "every") return AttackSchedule::Mode::kEvery;
    if (m == "probability") return AttackSchedule::Mode::kProbability;
    throw std::invalid_argument("unknown schedule '" + m + "' (every, probability)");
  });
  at.get("every", c.attack.schedule.every);
  at.get("probability", c.attack.schedule.probability);
  at.get_enum("trigger_location", c.attack.trigger.location, trigger_location_from_string);
  at.get("trigger_size", c.attack.trigger.size);
  at.get("trigger_values", c.attack.trigger.values);
  at.finish();

  root.claim("forensics");
  Section fo(j, "forensics", "");
  fo.get_enum("nontarget_probe", c.forensics.nontarget_probe, probe_kind_from_string);
  fo.get("min_cluster_size", c.forensics.min_cluster_size);
  fo.get("alpha", c.forensics.alpha);
  fo.get("probe_seed", c.forensics.probe_seed);
  fo.get("probes_per_class", c.forensics.probes_per_class);
  fo.finish();

  root.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& config) {
  std::ofstream out(path);
  if (!out) throw ConfigError("config: cannot write " + path.string());
  out << to_json(config).dump(2) << '\n';
  if (!out) throw ConfigError("config: write failed for " + path.string());
}

}  // namespace flf
