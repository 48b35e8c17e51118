#pragma once

// JSON and CSV forms of models, reports and synthetic laws. Malformed input
// raises SchemaError (structure) or ParseError (syntax).

#include <filesystem>
#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "eofair/calibration.hpp"
#include "eofair/data.hpp"
#include "eofair/estimators.hpp"
#include "eofair/experiments.hpp"
#include "eofair/metrics.hpp"
#include "eofair/oracle.hpp"

namespace eofair {

using Json = nlohmann::json;

std::string mode_name(ScoreMode mode);
/// "aware" or "blind"; anything else is a ConfigError.
ScoreMode parse_mode(const std::string& name);

Json to_json(const ScoreModel& model);
ScoreModel score_model_from_json(const Json& j);

Json to_json(const GroupStatistics& stats);
GroupStatistics group_statistics_from_json(const Json& j);

Json to_json(const FairClassifier& clf);
FairClassifier fair_classifier_from_json(const Json& j);

Json to_json(const EvaluationReport& report);
Json to_json(const SplitResult& splits);

Json to_json(const SyntheticDistribution& dist);
SyntheticDistribution distribution_from_json(const Json& j);

Json to_json(const OracleSolution& sol);
Json to_json(const BenchmarkReport& report);
Json to_json(const SweepReport& report);

/// One line per (n, N) with the aggregated columns.
void write_consistency_csv(const ConsistencyResult& result, std::ostream& out);
/// One line per (n, N, repeat).
void write_consistency_cells_csv(const ConsistencyResult& result, std::ostream& out);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const Json& j, const std::filesystem::path& path);

}  // namespace eofair
