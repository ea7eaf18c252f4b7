#pragma once

// Versioned JSON/CSV file formats: worlds, interaction logs, datasets, model
// checkpoints, metric reports and consumption histograms.

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "temptrec/core_model.hpp"
#include "temptrec/estimation.hpp"
#include "temptrec/simharness.hpp"

namespace temptrec {

inline constexpr int kFormatVersion = 1;

nlohmann::json to_json(const World& world);
World world_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const InteractionRecord& record);
InteractionRecord record_from_json(const nlohmann::json& doc);
nlohmann::json log_to_json(const InteractionLog& log);
InteractionLog log_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const Dataset& dataset);
Dataset dataset_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& doc);

// Checkpoint: every parameter block plus the training config and seed.
nlohmann::json checkpoint_to_json(const EstimatedModel& model, const TrainConfig& config);
EstimatedModel model_from_checkpoint(const nlohmann::json& doc, TrainConfig* config = nullptr);

nlohmann::json to_json(const MetricsReport& report);

// Long format: scenario,info_level,policy,replication,metric,value
void write_report_csv(std::ostream& out, const MetricsReport& report, bool header = true);
// One row per bin: policy,u_lo,u_hi,v_lo,v_hi,count
void write_histogram_csv(std::ostream& out, const MetricsReport& report);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& doc);

// Throws InputError unless doc["format"] == format and the version is supported.
void check_format(const nlohmann::json& doc, const std::string& format);

}  // namespace temptrec
