#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "flf/experiment.hpp"

namespace flf {

using Record = nlohmann::json;

/// Rounds every floating-point value in `j` to 6 significant digits, so the
/// serialized report does not depend on the last bits of a computation.
Record round_numbers(const Record& j);

void write_ndjson(const std::filesystem::path& path, const std::vector<Record>& records);
std::vector<Record> read_ndjson(const std::filesystem::path& path);

Record to_record(const DetectionMetrics& m);
Record to_record(const ModelEval& e);
Record to_record(const DetectionReport& r);

/// Record types (field "record"):
///   config   the full configuration, for replay
///   client   one per client: truth, s, s', rounds counted, verdicts
///   cluster / outlier   the two-score detection's intermediates
///   summary  outcome, model quality and detection metrics
std::vector<Record> experiment_records(const ExperimentResult& r);
std::vector<Record> recovery_records(const RecoveryResult& r);
std::vector<Record> probe_records(const ProbeStudy& s);

/// Human-readable table built from any mix of the records above.
std::string summary_table(const std::vector<Record>& records);

}  // namespace flf
