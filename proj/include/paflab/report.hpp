#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "paflab/bench.hpp"
#include "paflab/config.hpp"
#include "paflab/experiment.hpp"
#include "paflab/probe.hpp"
#include "paflab/training.hpp"

namespace paflab {

/// Insertion-ordered so that reports serialize deterministically.
using JsonValue = nlohmann::ordered_json;

inline constexpr int kReportSchemaVersion = 1;

/// Git revision the binary was built from, or "unknown".
std::string build_id();
/// UTC ISO-8601 timestamp. Honors SOURCE_DATE_EPOCH for reproducible output.
std::string created_at();

JsonValue model_config_json(const ModelConfig& c);
JsonValue config_json(const ExperimentConfig& c);
JsonValue trace_json(const ProbeTrace& t);
JsonValue training_json(std::string_view label, const TrainResult& r);
JsonValue timing_json(const ModeTiming& t);
JsonValue criterion_json(const Criterion& c);
JsonValue grad_check_json(std::string_view label, const GradCheckReport& r);

/// schema_version, command, build_id, created_at and the config echo; the
/// caller appends traces, training, timing, criteria and summary.
JsonValue report_header(std::string_view command, const JsonValue& config);

/// Pretty-printed with a trailing newline. Throws IoError.
void write_report(const std::filesystem::path& path, const JsonValue& report);
/// Throws IoError.
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace paflab
