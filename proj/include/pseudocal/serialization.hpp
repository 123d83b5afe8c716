#pragma once

#include "pseudocal/report.hpp"
#include "pseudocal/scalers.hpp"
#include "pseudocal/synthetic.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>

namespace pseudocal::io {

using Json = nlohmann::json;

/// Every document carries this in its "schema_version" field.
inline constexpr int kSchemaVersion = 1;

Json to_json(const synth::ShiftSpec& spec);
synth::ShiftSpec shift_spec_from_json(const Json& j);

Json to_json(const synth::SyntheticTask& task);
synth::SyntheticTask task_from_json(const Json& j);

Json to_json(const synth::TrainConfig& config);
synth::TrainConfig train_config_from_json(const Json& j);

/// kind "classifier"; the training history is included when present.
Json to_json(const synth::TrainedClassifier& model);
synth::TrainedClassifier classifier_from_json(const Json& j);

/// kind "ensemble" with a "members" array of classifier documents.
Json to_json(const synth::EnsembleModel& model);

/// Loads either a classifier or an ensemble document.
std::unique_ptr<Model> model_from_json(const Json& j);

Json to_json(const Calibrator& calibrator);
Calibrator calibrator_from_json(const Json& j);

Json to_json(const MixupConfig& cfg);

/// Wall-clock time is only written when include_timing is set, so documents
/// from identical inputs are byte-identical.
Json to_json(const report::ExperimentResult& result, bool include_timing = false);
Json to_json(const report::MethodSummary& summary);

Json read_json(const std::filesystem::path& path);
/// Writes j.dump(2) plus a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace pseudocal::io
