#include "flf/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "flf/config.hpp"

namespace flf {

namespace {

double round6(double x) {
  if (!std::isfinite(x)) return x;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return std::strtod(buf, nullptr);
}

std::string fmt6(const Record& v) {
  if (v.is_null()) return "-";
  if (v.is_number_float()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v.get<double>());
    return buf;
  }
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

Record opt(const std::optional<double>& d) { return d ? Record(*d) : Record(nullptr); }

std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

}  // namespace

Record round_numbers(const Record& j) {
  if (j.is_number_float()) {
    const double d = j.get<double>();
    return std::isfinite(d) ? Record(round6(d)) : Record(nullptr);
  }
  if (j.is_array()) {
    Record out = Record::array();
    for (const auto& e : j) out.push_back(round_numbers(e));
    return out;
  }
  if (j.is_object()) {
    Record out = Record::object();
    for (const auto& [k, v] : j.items()) out[k] = round_numbers(v);
    return out;
  }
  return j;
}

void write_ndjson(const std::filesystem::path& path, const std::vector<Record>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("report: cannot write " + path.string());
  for (const auto& r : records) out << round_numbers(r).dump() << '\n';
  if (!out) throw std::runtime_error("report: write failed for " + path.string());
}

std::vector<Record> read_ndjson(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("report: cannot open " + path.string());
  std::vector<Record> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(Record::parse(line));
    } catch (const Record::parse_error& e) {
      throw std::runtime_error("report: " + path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

Record to_record(const DetectionMetrics& m) {
  return {{"n", m.n}, {"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn},
          {"dacc", m.dacc}, {"fpr", m.fpr}, {"fnr", m.fnr}};
}

Record to_record(const ModelEval& e) { return {{"test_accuracy", e.test_accuracy}, {"asr", e.asr}}; }

Record to_record(const DetectionReport& r) {
  Record clusters = Record::array();
  for (const auto& c : r.clusters)
    clusters.push_back({{"id", c.id}, {"members", c.members}, {"sum_s", c.sum_s},
                        {"sum_s_prime", c.sum_s_prime}, {"mean_s", c.mean_s},
                        {"potential", c.potential}, {"ratio", opt(c.ratio)}, {"malicious", c.malicious}});
  Record outliers = Record::array();
  for (const auto& o : r.outliers)
    outliers.push_back({{"client", o.client}, {"s", o.s}, {"s_prime", o.s_prime},
                        {"ratio", opt(o.ratio)}, {"malicious", o.malicious}});
  return {{"mode", to_string(r.mode)},
          {"min_cluster_size", r.min_cluster_size},
          {"duplicated", r.duplicated},
          {"s_span_zero", r.s_span_zero},
          {"sp_span_zero", r.sp_span_zero},
          {"threshold", opt(r.threshold)},
          {"predicted", r.predicted},
          {"clusters", clusters},
          {"outliers", outliers},
          {"notes", r.notes}};
}

std::vector<Record> experiment_records(const ExperimentResult& r) {
  std::vector<Record> out;
  out.push_back({{"record", "config"}, {"config", to_json(r.config)}});

  std::map<ClientId, int> cluster_of;
  std::map<ClientId, bool> flagged, flagged_single;
  if (r.detection) {
    for (const auto& c : r.detection->clusters)
      for (auto m : c.members) cluster_of[m] = c.id;
    for (auto c : r.detection->predicted) flagged[c] = true;
  }
  if (r.single_score)
    for (auto c : r.single_score->predicted) flagged_single[c] = true;
  std::map<ClientId, const InfluencePair*> pair_of;
  for (const auto& p : r.pairs) pair_of[p.client] = &p;

  for (const auto& c : r.clients) {
    Record rec = {{"record", "client"},
                  {"client", c.client},
                  {"malicious", c.malicious},
                  {"category", c.malicious ? "malicious" : (c.category_one ? "benign_I" : "benign_II")},
                  {"n_examples", c.n_examples},
                  {"n_target_label", c.n_target_label}};
    if (auto it = pair_of.find(c.client); it != pair_of.end()) {
      rec["s"] = it->second->s;
      rec["s_prime"] = it->second->s_prime;
      rec["rounds_counted"] = it->second->rounds_counted;
      rec["cluster"] = cluster_of.count(c.client) ? cluster_of[c.client] : -1;
      rec["flagged"] = flagged.count(c.client) > 0;
      rec["flagged_single_score"] = flagged_single.count(c.client) > 0;
    }
    out.push_back(rec);
  }

  if (r.detection) {
    for (const auto& c : r.detection->clusters)
      out.push_back({{"record", "cluster"}, {"id", c.id}, {"size", c.members.size()}, {"members", c.members},
                     {"sum_s", c.sum_s}, {"sum_s_prime", c.sum_s_prime}, {"mean_s", c.mean_s},
                     {"potential", c.potential}, {"ratio", opt(c.ratio)}, {"malicious", c.malicious}});
    for (const auto& o : r.detection->outliers)
      out.push_back({{"record", "outlier"}, {"client", o.client}, {"s", o.s}, {"s_prime", o.s_prime},
                     {"ratio", opt(o.ratio)}, {"malicious", o.malicious}});
  }

  Record summary = {{"record", "summary"},
                    {"outcome", to_string(r.outcome)},
                    {"test_accuracy", r.eval.test_accuracy},
                    {"asr", r.eval.asr},
                    {"attack_rounds", r.attack_rounds},
                    {"checkpoint_rounds", r.checkpoint_rounds},
                    {"target_index", r.target_index ? Record(*r.target_index) : Record(nullptr)}};
  if (r.detection) {
    summary["threshold"] = opt(r.detection->threshold);
    summary["predicted"] = r.detection->predicted;
    summary["duplicated"] = r.detection->duplicated;
    summary["notes"] = r.detection->notes;
  }
  if (r.metrics) summary["metrics"] = to_record(*r.metrics);
  if (r.single_score_metrics) summary["single_score_metrics"] = to_record(*r.single_score_metrics);
  out.push_back(summary);
  return out;
}

std::vector<Record> recovery_records(const RecoveryResult& r) {
  const double rel = r.before.asr > 0.0 ? (r.before.asr - r.after.asr) / r.before.asr : 0.0;
  return {{{"record", "recovery"},
           {"excluded", r.excluded},
           {"before", to_record(r.before)},
           {"after", to_record(r.after)},
           {"asr_relative_reduction", rel},
           {"accuracy_drop", r.before.test_accuracy - r.after.test_accuracy}}};
}

std::vector<Record> probe_records(const ProbeStudy& s) {
  std::vector<Record> out;
  for (const auto& c : s.cases)
    out.push_back({{"record", "probe"}, {"truth", c.is_target ? "target" : "non_target"}, {"index", c.index},
                   {"predicted_label", c.predicted}, {"verdict", to_string(c.verdict)},
                   {"potential_ratios", c.potential_ratios}});
  out.push_back({{"record", "probe_summary"}, {"n_target", s.n_target}, {"n_non_target", s.n_nontarget},
                 {"target_accuracy", s.target_accuracy}, {"non_target_accuracy", s.nontarget_accuracy}});
  return out;
}

std::string summary_table(const std::vector<Record>& records) {
  std::ostringstream os;
  std::size_t n_clients = 0, n_flagged = 0;
  std::map<std::string, std::size_t> flagged_by_cat, total_by_cat;
  for (const auto& r : records) {
    if (!r.contains("record") || r["record"] != "client") continue;
    ++n_clients;
    const auto cat = r.value("category", std::string("?"));
    ++total_by_cat[cat];
    if (r.value("flagged", false)) {
      ++n_flagged;
      ++flagged_by_cat[cat];
    }
  }

  for (const auto& r : records) {
    const auto kind = r.value("record", std::string());
    if (kind == "summary") {
      os << "experiment\n";
      os << "  " << pad("outcome", 22) << fmt6(r["outcome"]) << '\n';
      os << "  " << pad("test accuracy", 22) << fmt6(r["test_accuracy"]) << '\n';
      os << "  " << pad("attack success rate", 22) << fmt6(r["asr"]) << '\n';
      if (r.contains("threshold")) os << "  " << pad("threshold", 22) << fmt6(r["threshold"]) << '\n';
      for (const char* key : {"metrics", "single_score_metrics"}) {
        if (!r.contains(key)) continue;
        const auto& m = r[key];
        os << "  " << pad(std::string(key) == "metrics" ? "two-score" : "single-score", 22)
           << "DACC " << fmt6(m["dacc"]) << "  FPR " << fmt6(m["fpr"]) << "  FNR " << fmt6(m["fnr"])
           << "  (TP " << m["tp"] << " FP " << m["fp"] << " TN " << m["tn"] << " FN " << m["fn"] << ")\n";
      }
    } else if (kind == "cluster") {
      os << "  cluster " << pad(fmt6(r["id"]), 4) << "size " << pad(fmt6(r["size"]), 5) << "mean s "
         << pad(fmt6(r["mean_s"]), 13) << "ratio " << pad(fmt6(r["ratio"]), 13)
         << (r.value("malicious", false) ? "MALICIOUS" : "") << '\n';
    } else if (kind == "recovery") {
      os << "recovery (" << r["excluded"].size() << " clients excluded)\n";
      os << "  " << pad("", 16) << pad("before", 12) << "after\n";
      os << "  " << pad("test accuracy", 16) << pad(fmt6(r["before"]["test_accuracy"]), 12)
         << fmt6(r["after"]["test_accuracy"]) << '\n';
      os << "  " << pad("ASR", 16) << pad(fmt6(r["before"]["asr"]), 12) << fmt6(r["after"]["asr"]) << '\n';
    } else if (kind == "probe_summary") {
      os << "probe classification\n";
      os << "  target probes      " << fmt6(r["n_target"]) << "  accuracy " << fmt6(r["target_accuracy"]) << '\n';
      os << "  non-target probes  " << fmt6(r["n_non_target"]) << "  accuracy "
         << fmt6(r["non_target_accuracy"]) << '\n';
    } else if (kind == "seeds_summary") {
      os << "multi-seed summary (" << r["seeds"].size() << " seeds)\n";
      for (const auto& [k, v] : r["mean"].items())
        os << "  " << pad(k, 22) << "mean " << pad(fmt6(v), 12) << "std " << fmt6(r["std"][k]) << '\n';
    }
  }
  if (n_clients) {
    os << "clients: " << n_clients << ", flagged: " << n_flagged << '\n';
    for (const auto& [cat, total] : total_by_cat)
      os << "  " << pad(cat, 12) << flagged_by_cat[cat] << " / " << total << " flagged\n";
  }
  return os.str();
}

}  // namespace flf
