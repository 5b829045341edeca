#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "flf/config.hpp"
#include "flf/experiment.hpp"
#include "flf/report.hpp"

namespace fs = std::filesystem;
using flf::Record;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Experiment configuration (JSON)");
  app->add_option("--seed", c.seed, "Override every seed in the configuration");
  app->add_option("--out", c.out, "Output directory")->capture_default_str();
}

// --config wins; otherwise a config.json left in --out by an earlier stage;
// otherwise the built-in defaults.
flf::ExperimentConfig effective_config(const Common& c) {
  flf::ExperimentConfig cfg;
  if (!c.config.empty())
    cfg = flf::load_config(c.config);
  else if (fs::exists(fs::path(c.out) / "config.json"))
    cfg = flf::load_config(fs::path(c.out) / "config.json");
  else
    cfg = flf::default_config();
  if (c.seed) cfg.override_seed(*c.seed);
  cfg.validate();
  return cfg;
}

fs::path prepare_out(const Common& c, const flf::ExperimentConfig& cfg) {
  const fs::path out(c.out);
  fs::create_directories(out);
  flf::save_config(out / "config.json", cfg);
  return out;
}

void save_model(const fs::path& path, const flf::ParamVector& w) {
  std::ofstream os(path);
  os << nlohmann::json{{"params", w}}.dump() << '\n';
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

flf::ParamVector load_model(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string() + " (run `train` first)");
  return nlohmann::json::parse(is).at("params").get<flf::ParamVector>();
}

std::optional<Record> find_record(const std::vector<Record>& recs, const std::string& kind) {
  for (const auto& r : recs)
    if (r.value("record", std::string()) == kind) return r;
  return std::nullopt;
}

void emit(const fs::path& out, const std::string& name, const std::vector<Record>& recs) {
  flf::write_ndjson(out / name, recs);
  std::cout << flf::summary_table(recs);
}

int cmd_partition(const Common& c) {
  const auto cfg = effective_config(c);
  const auto out = prepare_out(c, cfg);
  const auto p = flf::prepare(cfg);
  const auto d = p.data.input_dim();
  const auto C = p.data.num_classes;
  flf::write_examples(out / "train.txt", p.data.train, d, C);
  flf::write_examples(out / "test.txt", p.data.test, d, C);
  flf::write_examples(out / "edge_train.txt", p.data.edge_train, d, C);
  flf::write_examples(out / "edge_test.txt", p.data.edge_test, d, C);
  std::vector<Record> recs;
  const auto info = flf::client_info(cfg, p);
  for (std::size_t i = 0; i < info.size(); ++i)
    recs.push_back({{"record", "partition"},
                    {"client", info[i].client},
                    {"group", p.partition.group_of_client[i]},
                    {"n_examples", info[i].n_examples},
                    {"label_histogram", flf::label_histogram(p.task.client_data[i], C)},
                    {"malicious", info[i].malicious},
                    {"category_one", info[i].category_one}});
  flf::write_ndjson(out / "partition.ndjson", recs);
  std::cout << "partitioned " << p.data.train.size() << " examples over " << info.size() << " clients into "
            << out.string() << '\n';
  return 0;
}

int cmd_train(const Common& c) {
  const auto cfg = effective_config(c);
  const auto out = prepare_out(c, cfg);
  const auto p = flf::prepare(cfg);
  const auto result = flf::run_training(p.task, out / "checkpoints.flfc");
  save_model(out / "final_model.json", result.final_global);
  const auto eval = flf::evaluate_model(cfg, p.data, result.final_global);
  const std::vector<Record> recs{{{"record", "training"},
                                  {"test_accuracy", eval.test_accuracy},
                                  {"asr", eval.asr},
                                  {"attack_rounds", result.attack_rounds},
                                  {"checkpoint_rounds", result.checkpoint_rounds}}};
  flf::write_ndjson(out / "training.ndjson", recs);
  std::printf("trained %zu rounds: test accuracy %.6g, ASR %.6g, %zu checkpoints\n", cfg.training.rounds,
              eval.test_accuracy, eval.asr, result.checkpoint_rounds.size());
  return 0;
}

int cmd_forensics(const Common& c) {
  const auto cfg = effective_config(c);
  const auto out = prepare_out(c, cfg);
  const auto p = flf::prepare(cfg);
  const auto store = flf::CheckpointStore::open(out / "checkpoints.flfc");
  const auto w = load_model(out / "final_model.json");
  const auto r = flf::analyze(cfg, p, store, w);
  std::vector<Record> recs;
  recs.push_back({{"record", "probe"},
                  {"outcome", flf::to_string(r.outcome)},
                  {"target_index", r.target_index ? Record(*r.target_index) : Record(nullptr)},
                  {"nontarget_probe", flf::to_string(cfg.forensics.nontarget_probe)}});
  for (const auto& pr : r.pairs)
    recs.push_back({{"record", "score"}, {"client", pr.client}, {"s", pr.s}, {"s_prime", pr.s_prime},
                    {"rounds_counted", pr.rounds_counted}});
  flf::write_ndjson(out / "scores.ndjson", recs);
  if (r.outcome == flf::Outcome::kNoMisclassifiedTarget) {
    std::cout << "no target input is misclassified; nothing to trace\n";
    return 2;
  }
  std::cout << "scored " << r.pairs.size() << " clients from target input #" << *r.target_index << '\n';
  return 0;
}

int cmd_detect(const Common& c) {
  const auto cfg = effective_config(c);
  const auto out = prepare_out(c, cfg);
  const auto scores = flf::read_ndjson(out / "scores.ndjson");
  const auto probe = find_record(scores, "probe");
  if (probe && probe->at("outcome") != "detected") {
    std::cout << "no target input is misclassified; nothing to detect\n";
    return 2;
  }
  const auto p = flf::prepare(cfg);
  flf::ExperimentResult r;
  r.config = cfg;
  r.outcome = flf::Outcome::kDetected;
  r.final_model = load_model(out / "final_model.json");
  r.eval = flf::evaluate_model(cfg, p.data, r.final_model);
  r.clients = flf::client_info(cfg, p);
  if (probe && probe->at("target_index").is_number()) r.target_index = probe->at("target_index").get<std::size_t>();
  for (const auto& s : scores)
    if (s.value("record", std::string()) == "score")
      r.pairs.push_back({s.at("client").get<flf::ClientId>(), s.at("s").get<double>(),
                         s.at("s_prime").get<double>(), s.at("rounds_counted").get<std::size_t>()});
  const auto mcs = cfg.forensics.min_cluster_size;
  r.detection = flf::detect_malicious(r.pairs, mcs);
  r.single_score = flf::detect_single_score(r.pairs, mcs);
  r.metrics = flf::compute_detection_metrics(r.detection->predicted, p.task.malicious, cfg.partition.n_clients);
  r.single_score_metrics =
      flf::compute_detection_metrics(r.single_score->predicted, p.task.malicious, cfg.partition.n_clients);
  emit(out, "detection.ndjson", flf::experiment_records(r));
  return 0;
}

int cmd_classify(const Common& c) {
  const auto cfg = effective_config(c);
  const auto out = prepare_out(c, cfg);
  const auto p = flf::prepare(cfg);
  const auto store = flf::CheckpointStore::open(out / "checkpoints.flfc");
  const auto cps = flf::load_all(store);
  const auto w = load_model(out / "final_model.json");
  emit(out, "probes.ndjson", flf::probe_records(flf::classify_probes(cfg, p, cps, w)));
  return 0;
}

std::set<flf::ClientId> parse_ids(const std::string& s) {
  std::set<flf::ClientId> ids;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) ids.insert(static_cast<flf::ClientId>(std::stoul(tok)));
  return ids;
}

int cmd_recover(const Common& c, const std::string& exclude) {
  const auto cfg = effective_config(c);
  const auto out = prepare_out(c, cfg);
  std::set<flf::ClientId> excluded;
  if (!exclude.empty()) {
    excluded = parse_ids(exclude);
  } else {
    const auto det = flf::read_ndjson(out / "detection.ndjson");
    const auto summary = find_record(det, "summary");
    if (!summary || !summary->contains("predicted")) throw std::runtime_error("detection.ndjson has no prediction");
    for (const auto& id : summary->at("predicted")) excluded.insert(id.get<flf::ClientId>());
  }
  std::optional<flf::ModelEval> before;
  if (fs::exists(out / "training.ndjson"))
    if (const auto t = find_record(flf::read_ndjson(out / "training.ndjson"), "training"))
      before = flf::ModelEval{t->at("test_accuracy").get<double>(), t->at("asr").get<double>()};
  emit(out, "recovery.ndjson", flf::recovery_records(flf::recover_retrain(cfg, excluded, before)));
  return 0;
}

int cmd_report(const Common& c) {
  const fs::path out(c.out);
  std::vector<Record> all;
  for (const char* name : {"seeds.ndjson", "detection.ndjson", "probes.ndjson", "recovery.ndjson"})
    if (fs::exists(out / name))
      for (auto& r : flf::read_ndjson(out / name)) all.push_back(std::move(r));
  if (all.empty()) throw std::runtime_error("no reports found in " + out.string());
  const auto table = flf::summary_table(all);
  std::ofstream(out / "report.txt") << table;
  std::cout << table;
  return 0;
}

std::vector<Record> run_one(const flf::ExperimentConfig& cfg, const fs::path& out, bool with_probes,
                            bool with_recovery) {
  fs::create_directories(out);
  flf::save_config(out / "config.json", cfg);
  const auto r = flf::run_experiment(cfg, out);
  save_model(out / "final_model.json", r.final_model);
  flf::write_ndjson(out / "training.ndjson", {{{"record", "training"},
                                                {"test_accuracy", r.eval.test_accuracy},
                                                {"asr", r.eval.asr},
                                                {"attack_rounds", r.attack_rounds},
                                                {"checkpoint_rounds", r.checkpoint_rounds}}});
  auto recs = flf::experiment_records(r);
  flf::write_ndjson(out / "detection.ndjson", recs);
  if (r.outcome == flf::Outcome::kDetected) {
    if (with_probes) {
      const auto p = flf::prepare(cfg);
      const auto cps = flf::load_all(flf::CheckpointStore::open(out / "checkpoints.flfc"));
      const auto pr = flf::probe_records(flf::classify_probes(cfg, p, cps, r.final_model));
      flf::write_ndjson(out / "probes.ndjson", pr);
      recs.insert(recs.end(), pr.begin(), pr.end());
    }
    if (with_recovery) {
      const std::set<flf::ClientId> excluded(r.detection->predicted.begin(), r.detection->predicted.end());
      if (excluded.size() < cfg.partition.n_clients) {
        const auto rr = flf::recovery_records(flf::recover_retrain(cfg, excluded, r.eval));
        flf::write_ndjson(out / "recovery.ndjson", rr);
        recs.insert(recs.end(), rr.begin(), rr.end());
      }
    }
  }
  const auto table = flf::summary_table(recs);
  std::ofstream(out / "report.txt") << table;
  return recs;
}

int cmd_run_all(const Common& c, std::size_t seeds, bool probes, bool recovery) {
  auto cfg = effective_config(c);
  const fs::path out(c.out);
  if (seeds <= 1) {
    std::cout << flf::summary_table(run_one(cfg, out, probes, recovery));
    return 0;
  }
  // Multi-seed summary: seeds base, base+1, ... each in its own directory.
  const std::uint64_t base = c.seed.value_or(cfg.training.seed);
  std::vector<std::uint64_t> used;
  std::map<std::string, std::vector<double>> series;
  std::vector<Record> per_seed;
  for (std::size_t i = 0; i < seeds; ++i) {
    const auto s = base + i;
    cfg.override_seed(s);
    const auto recs = run_one(cfg, out / ("seed_" + std::to_string(s)), probes, recovery);
    used.push_back(s);
    const auto summary = find_record(recs, "summary");
    Record row = {{"record", "seed"}, {"seed", s}, {"outcome", summary->at("outcome")},
                  {"test_accuracy", summary->at("test_accuracy")}, {"asr", summary->at("asr")}};
    series["test_accuracy"].push_back(summary->at("test_accuracy").get<double>());
    series["asr"].push_back(summary->at("asr").get<double>());
    if (summary->contains("metrics")) {
      row["metrics"] = summary->at("metrics");
      for (const char* k : {"dacc", "fpr", "fnr"}) series[k].push_back(summary->at("metrics").at(k).get<double>());
    }
    per_seed.push_back(row);
    std::cout << "seed " << s << ": " << row.dump() << '\n';
  }
  Record mean = Record::object(), sd = Record::object();
  for (const auto& [k, v] : series) {
    double m = 0.0, ss = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    for (double x : v) ss += (x - m) * (x - m);
    mean[k] = m;
    sd[k] = std::sqrt(ss / static_cast<double>(v.size()));
  }
  per_seed.push_back({{"record", "seeds_summary"}, {"seeds", used}, {"mean", mean}, {"std", sd}});
  flf::write_ndjson(out / "seeds.ndjson", per_seed);
  const auto table = flf::summary_table(per_seed);
  std::ofstream(out / "report.txt") << table;
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forensic tracing of malicious clients in simulated federated learning"};
  app.require_subcommand(1);

  Common common;
  std::string exclude;
  std::size_t seeds = 1;
  bool no_probes = false, no_recovery = false;

  auto* partition = app.add_subcommand("partition", "Generate the dataset and the non-iid client partition");
  auto* train = app.add_subcommand("train", "Run federated training and write checkpoints");
  auto* forensics = app.add_subcommand("forensics", "Compute influence scores for the picked target input");
  auto* detect = app.add_subcommand("detect", "Cluster the scores and flag malicious clients");
  auto* classify = app.add_subcommand("classify-probe", "Classify misclassified inputs as target or non-target");
  auto* recover = app.add_subcommand("recover", "Retrain without the flagged clients");
  auto* report = app.add_subcommand("report", "Print the summary table of the reports in --out");
  auto* run_all = app.add_subcommand("run-all", "Whole pipeline in one process");
  for (auto* sub : {partition, train, forensics, detect, classify, recover, report, run_all}) add_common(sub, common);
  recover->add_option("--exclude", exclude, "Comma-separated client ids (default: the detected set)");
  run_all->add_option("--seeds", seeds, "Number of consecutive seeds to run")->check(CLI::PositiveNumber);
  run_all->add_flag("--no-probes", no_probes, "Skip probe classification");
  run_all->add_flag("--no-recovery", no_recovery, "Skip recovery retraining");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*partition) return cmd_partition(common);
    if (*train) return cmd_train(common);
    if (*forensics) return cmd_forensics(common);
    if (*detect) return cmd_detect(common);
    if (*classify) return cmd_classify(common);
    if (*recover) return cmd_recover(common, exclude);
    if (*report) return cmd_report(common);
    if (*run_all) return cmd_run_all(common, seeds, !no_probes, !no_recovery);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
