#pragma once

#include <string>

#include "tgnet/run_config.hpp"

#include "json.hpp"

namespace tgnet {

// Subcommand implementations. They throw ConfigError/DataError/NumericError;
// the CLI maps those onto exit codes 2/3/4.

void cmd_ingest(const RunConfig& cfg, const std::string& out_dir);
void cmd_synth(const RunConfig& cfg, const std::string& out_dir);
void cmd_train(const RunConfig& cfg, const std::string& out_dir);
nlohmann::json cmd_eval(const RunConfig& cfg, const std::string& out_dir);
void cmd_export_tge(const RunConfig& cfg, const std::string& out_dir);
nlohmann::json cmd_repro(const RunConfig& cfg, const std::string& out_dir,
                         int n_seeds);

// Joins relative paths onto out_dir (creating it); absolute paths and an
// empty out_dir pass through.
std::string out_path(const std::string& out_dir, const std::string& file);

// Evaluation core shared by cmd_eval and cmd_repro.
nlohmann::json evaluate_model(TGNetModel& model, const RunConfig& cfg,
                              const DemandTensor& pickup,
                              const DemandTensor& dropoff,
                              const HolidayCalendar& calendar);

}  // namespace tgnet
