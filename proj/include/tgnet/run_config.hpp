#pragma once

#include <optional>
#include <string>

#include "tgnet/evaluation.hpp"
#include "tgnet/grid.hpp"
#include "tgnet/model.hpp"
#include "tgnet/synthgen.hpp"
#include "tgnet/training.hpp"

#include "json.hpp"

namespace tgnet {

struct EvalConfig {
  double k = 11.0;
  std::vector<double> quantiles = {0.99, 0.95};
  int min_bucket = 20;
  DayTypeMode day_type_mode = DayTypeMode::kTwoWay;

  void validate() const;
  nlohmann::json to_json() const;
  static EvalConfig from_json(const nlohmann::json& j);
};

struct RunPaths {
  std::string logs_csv = "logs.csv";
  std::string holidays;  // optional
  std::string pickup_tensor = "pickup.stgd";
  std::string dropoff_tensor = "dropoff.stgd";
  std::string checkpoint = "model.tgck";
  std::string history_csv = "history.csv";
  std::string report_json = "report.json";
  std::string tge_csv = "tge_vectors.csv";
  std::string labels_json = "labels.json";
  std::string synth_config;  // external synth config file

  nlohmann::json to_json() const;
  static RunPaths from_json(const nlohmann::json& j);
};

// One JSON document drives every command; CLI flags override single fields.
struct RunConfig {
  int config_version = 1;
  GridSpec grid;
  int utc_offset = 0;
  TGNetConfig model;
  TrainConfig train;
  EvalConfig eval;
  RunPaths paths;
  std::optional<nlohmann::json> synth_inline;
  std::string preset;
  // CLI --seed override; never serialized.
  std::optional<std::uint64_t> cli_seed;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::string& path);
  void save(const std::string& path) const;

  HolidayCalendar load_calendar() const;
  // Calendar key width for this grid's interval length.
  int key_dim() const { return 86400 / grid.interval_len + 9; }
};

nlohmann::json grid_to_json(const GridSpec& spec);
GridSpec grid_from_json(const nlohmann::json& j);

}  // namespace tgnet
