#include "tgnet/run_config.hpp"

#include <fstream>

#include "tgnet/error.hpp"
#include "tgnet/io.hpp"
#include "tgnet/time_util.hpp"

namespace tgnet {

void EvalConfig::validate() const {
  if (k < 0.0) throw ConfigError("eval threshold k must be >= 0");
  if (min_bucket < 1) throw ConfigError("min_bucket must be >= 1");
  for (double q : quantiles)
    if (q <= 0.0 || q > 1.0)
      throw ConfigError("atypical quantiles must be in (0, 1]");
}

nlohmann::json EvalConfig::to_json() const {
  return {{"k", k},
          {"quantiles", quantiles},
          {"min_bucket", min_bucket},
          {"day_type_mode", day_type_mode_name(day_type_mode)}};
}

EvalConfig EvalConfig::from_json(const nlohmann::json& j) {
  EvalConfig c;
  c.k = j.value("k", c.k);
  c.quantiles = j.value("quantiles", c.quantiles);
  c.min_bucket = j.value("min_bucket", c.min_bucket);
  if (j.contains("day_type_mode"))
    c.day_type_mode =
        day_type_mode_from_name(j.at("day_type_mode").get<std::string>());
  c.validate();
  return c;
}

nlohmann::json RunPaths::to_json() const {
  return {{"logs_csv", logs_csv},
          {"holidays", holidays},
          {"pickup_tensor", pickup_tensor},
          {"dropoff_tensor", dropoff_tensor},
          {"checkpoint", checkpoint},
          {"history_csv", history_csv},
          {"report_json", report_json},
          {"tge_csv", tge_csv},
          {"labels_json", labels_json},
          {"synth_config", synth_config}};
}

RunPaths RunPaths::from_json(const nlohmann::json& j) {
  RunPaths p;
  p.logs_csv = j.value("logs_csv", p.logs_csv);
  p.holidays = j.value("holidays", p.holidays);
  p.pickup_tensor = j.value("pickup_tensor", p.pickup_tensor);
  p.dropoff_tensor = j.value("dropoff_tensor", p.dropoff_tensor);
  p.checkpoint = j.value("checkpoint", p.checkpoint);
  p.history_csv = j.value("history_csv", p.history_csv);
  p.report_json = j.value("report_json", p.report_json);
  p.tge_csv = j.value("tge_csv", p.tge_csv);
  p.labels_json = j.value("labels_json", p.labels_json);
  p.synth_config = j.value("synth_config", p.synth_config);
  return p;
}

nlohmann::json grid_to_json(const GridSpec& spec) {
  return {{"bbox", {spec.lat_min, spec.lat_max, spec.lon_min, spec.lon_max}},
          {"rows", spec.rows},
          {"cols", spec.cols},
          {"interval_len", spec.interval_len},
          {"period_start", format_iso8601_utc(spec.period_start)},
          {"period_end", format_iso8601_utc(spec.period_end)}};
}

GridSpec grid_from_json(const nlohmann::json& j) {
  GridSpec spec;
  if (j.contains("bbox")) {
    const auto& b = j.at("bbox");
    spec.lat_min = b.at(0).get<double>();
    spec.lat_max = b.at(1).get<double>();
    spec.lon_min = b.at(2).get<double>();
    spec.lon_max = b.at(3).get<double>();
  }
  spec.rows = j.value("rows", spec.rows);
  spec.cols = j.value("cols", spec.cols);
  spec.interval_len = j.value("interval_len", spec.interval_len);
  if (j.contains("period_start"))
    spec.period_start =
        parse_iso8601_utc(j.at("period_start").get<std::string>());
  if (j.contains("period_end"))
    spec.period_end = parse_iso8601_utc(j.at("period_end").get<std::string>());
  return spec;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = {{"config_version", config_version},
                      {"grid", grid_to_json(grid)},
                      {"utc_offset", utc_offset},
                      {"model", model.to_json()},
                      {"train", train.to_json()},
                      {"eval", eval.to_json()},
                      {"paths", paths.to_json()}};
  if (synth_inline) j["synth"] = *synth_inline;
  if (!preset.empty()) j["preset"] = preset;
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  c.config_version = j.value("config_version", 1);
  if (c.config_version != 1)
    throw ConfigError("unrecognized config_version " +
                      std::to_string(c.config_version));
  if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"));
  c.utc_offset = j.value("utc_offset", 0);
  if (j.contains("model")) c.model = TGNetConfig::from_json(j.at("model"));
  if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
  if (j.contains("eval")) c.eval = EvalConfig::from_json(j.at("eval"));
  if (j.contains("paths")) c.paths = RunPaths::from_json(j.at("paths"));
  if (j.contains("synth")) c.synth_inline = j.at("synth");
  c.preset = j.value("preset", "");
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("bad JSON in " + path + ": " + e.what());
  }
  return from_json(j);
}

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  out << to_json().dump(2) << "\n";
  if (!out) throw DataError("failed writing " + path);
}

HolidayCalendar RunConfig::load_calendar() const {
  if (paths.holidays.empty()) {
    HolidayCalendar cal;
    cal.utc_offset = utc_offset;
    return cal;
  }
  return read_holidays(paths.holidays, utc_offset);
}

}  // namespace tgnet
