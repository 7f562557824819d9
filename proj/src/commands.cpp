#include "tgnet/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "tgnet/error.hpp"
#include "tgnet/io.hpp"
#include "tgnet/time_util.hpp"

namespace tgnet {

namespace fs = std::filesystem;

std::string out_path(const std::string& out_dir, const std::string& file) {
  if (out_dir.empty() || fs::path(file).is_absolute()) return file;
  fs::create_directories(out_dir);
  return (fs::path(out_dir) / file).string();
}

namespace {

struct Dataset {
  DemandTensor pickup;
  DemandTensor dropoff;
  HolidayCalendar calendar;
};

Dataset load_dataset(const RunConfig& cfg) {
  cfg.grid.validate();
  Dataset d;
  d.pickup = read_tensor(cfg.paths.pickup_tensor, cfg.grid);
  d.dropoff = read_tensor(cfg.paths.dropoff_tensor, cfg.grid);
  if (d.pickup.kind != Kind::kPickup)
    throw DataError(cfg.paths.pickup_tensor + " does not hold pickup counts");
  if (d.dropoff.kind != Kind::kDropoff)
    throw DataError(cfg.paths.dropoff_tensor + " does not hold dropoff counts");
  d.calendar = cfg.load_calendar();
  return d;
}

TGNetConfig model_config_for_grid(const RunConfig& cfg) {
  TGNetConfig mc = cfg.model;
  mc.key_dim = cfg.key_dim();
  mc.validate();
  return mc;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw DataError("failed writing " + path);
}

}  // namespace

void cmd_ingest(const RunConfig& cfg, const std::string& out_dir) {
  cfg.grid.validate();
  const std::vector<DemandLog> logs = read_logs_csv(cfg.paths.logs_csv);
  const RasterizeResult pickup = rasterize(logs, cfg.grid, Kind::kPickup);
  const RasterizeResult dropoff = rasterize(logs, cfg.grid, Kind::kDropoff);
  const std::string pickup_path = out_path(out_dir, cfg.paths.pickup_tensor);
  const std::string dropoff_path = out_path(out_dir, cfg.paths.dropoff_tensor);
  write_tensor(pickup_path, pickup.tensor);
  write_tensor(dropoff_path, dropoff.tensor);
  std::printf("ingested %zu logs -> %s (%llu pickups, %zu dropped), %s "
              "(%llu dropoffs, %zu dropped)\n",
              logs.size(), pickup_path.c_str(),
              static_cast<unsigned long long>(pickup.tensor.total()),
              pickup.n_dropped, dropoff_path.c_str(),
              static_cast<unsigned long long>(dropoff.tensor.total()),
              dropoff.n_dropped);
}

void cmd_synth(const RunConfig& cfg, const std::string& out_dir) {
  SynthConfig synth;
  if (!cfg.preset.empty()) {
    if (cfg.preset == "nyc-taxi-like")
      synth = SynthConfig::nyc_taxi_like(cfg.train.seed);
    else if (cfg.preset == "context-events-small")
      synth = SynthConfig::context_events_small(cfg.train.seed);
    else
      throw ConfigError("unknown synth preset: '" + cfg.preset + "'");
  } else if (!cfg.paths.synth_config.empty()) {
    std::ifstream in(cfg.paths.synth_config);
    if (!in)
      throw DataError("cannot open synth config: " + cfg.paths.synth_config);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw ConfigError("bad JSON in " + cfg.paths.synth_config + ": " +
                        e.what());
    }
    synth = SynthConfig::from_json(j);
  } else if (cfg.synth_inline) {
    synth = SynthConfig::from_json(*cfg.synth_inline);
  } else {
    throw ConfigError(
        "synth needs --preset, paths.synth_config, or an inline synth block");
  }
  if (cfg.cli_seed) synth.seed = *cfg.cli_seed;

  const SynthOutput data = generate(synth);
  write_tensor(out_path(out_dir, cfg.paths.pickup_tensor), data.pickup);
  write_tensor(out_path(out_dir, cfg.paths.dropoff_tensor), data.dropoff);

  std::vector<DemandLog> logs = export_logs(data.pickup, synth.seed);
  const std::vector<DemandLog> dropoff_logs =
      export_logs(data.dropoff, synth.seed);
  logs.insert(logs.end(), dropoff_logs.begin(), dropoff_logs.end());
  write_logs_csv(out_path(out_dir, cfg.paths.logs_csv), logs);

  nlohmann::json events = nlohmann::json::array();
  const int n = data.pickup.spec.n_cells();
  for (int t = 0; t < data.pickup.spec.n_intervals(); ++t)
    for (int cell = 0; cell < n; ++cell)
      if (data.labels.event_mask[static_cast<std::size_t>(t) * n + cell])
        events.push_back({t, cell});
  write_json(out_path(out_dir, cfg.paths.labels_json),
             {{"events", events},
              {"context_slot", data.labels.context_slot},
              {"context_day_type", data.labels.context_day_type}});

  const std::string holidays_path =
      out_path(out_dir, cfg.paths.holidays.empty() ? "holidays.txt"
                                                   : cfg.paths.holidays);
  write_holidays(holidays_path, synth.holidays);

  // Ready-to-train config pointing at the generated files.
  RunConfig next = cfg;
  next.grid = data.pickup.spec;
  next.utc_offset = synth.utc_offset;
  next.paths.holidays = holidays_path;
  next.paths.pickup_tensor = out_path(out_dir, cfg.paths.pickup_tensor);
  next.paths.dropoff_tensor = out_path(out_dir, cfg.paths.dropoff_tensor);
  next.paths.logs_csv = out_path(out_dir, cfg.paths.logs_csv);
  next.paths.labels_json = out_path(out_dir, cfg.paths.labels_json);
  // outputs of later commands stay relative so their --out-dir decides
  next.synth_inline = synth.to_json();
  next.save(out_path(out_dir, "run_config.json"));
  std::printf("synth dataset written under %s (P=%d, N=%d)\n",
              out_dir.empty() ? "." : out_dir.c_str(),
              data.pickup.spec.n_intervals(), n);
}

void cmd_train(const RunConfig& cfg, const std::string& out_dir) {
  const Dataset data = load_dataset(cfg);
  const TGNetConfig mc = model_config_for_grid(cfg);
  TGNetModel model(mc, cfg.grid.rows, cfg.grid.cols, cfg.train.seed);
  const DataSplit split =
      make_examples(data.pickup, data.dropoff, data.calendar, mc.t_demand,
                    mc.t_dropoff, cfg.train.f_train, cfg.train.f_val,
                    cfg.train.f_test);
  const TrainHistory history = train(model, split, cfg.train);
  const std::string ckpt = out_path(out_dir, cfg.paths.checkpoint);
  model.save(ckpt);
  write_history_csv(out_path(out_dir, cfg.paths.history_csv), history);
  std::printf("trained %zu epochs (best %d%s), %zu parameters -> %s\n",
              history.epochs.size(), history.best_epoch,
              history.early_stopped ? ", early stop" : "",
              model.param_count(), ckpt.c_str());
}

namespace {

struct ScoredTest {
  std::vector<Sample> samples;
  std::vector<double> persistence;
  std::vector<double> historical;
};

ScoredTest score_test_set(TGNetModel& model, const RunConfig& cfg,
                          const DataSplit& split,
                          const HistoricalAverage& hist_avg) {
  ScoredTest scored;
  const int n = split.n_nodes();
  const ExamplePart& part = split.test;
  const int batch_size = std::max(1, cfg.train.batch_size);
  std::vector<int> order(part.targets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  for (std::size_t at = 0; at < order.size();
       at += static_cast<std::size_t>(batch_size)) {
    const std::size_t end =
        std::min(order.size(), at + static_cast<std::size_t>(batch_size));
    const std::vector<int> subset(order.begin() + at, order.begin() + end);
    const BatchInputs in = assemble_batch(split, part, subset);
    const Tensor preds = model.predict_raw(in);
    for (std::size_t e = 0; e < subset.size(); ++e) {
      const int idx = subset[e];
      const int target = part.targets[idx];
      const TemporalKey& key = part.keys[idx];
      for (int i = 0; i < n; ++i) {
        Sample s;
        s.target = target;
        s.region = i;
        s.truth = static_cast<double>(split.demand->at(target, i));
        s.pred = preds.data[e * n + i];
        s.slot = key.slot();
        s.dt = day_type(key, cfg.eval.day_type_mode);
        scored.samples.push_back(s);
        scored.persistence.push_back(
            baseline_persistence(*split.demand, target, i));
        scored.historical.push_back(hist_avg.predict(i, s.slot, s.dt));
      }
    }
  }
  return scored;
}

nlohmann::json metrics_or_null(const std::vector<double>& preds,
                               const std::vector<double>& truths, double k) {
  try {
    return compute_metrics(preds, truths, k).to_json();
  } catch (const DataError&) {
    return nullptr;  // nothing survived the threshold filter
  }
}

nlohmann::json slice_json(const ScoredTest& scored,
                          const std::vector<std::size_t>& sel, double k) {
  std::vector<double> p_model, p_pers, p_hist, truths;
  for (std::size_t s : sel) {
    p_model.push_back(scored.samples[s].pred);
    p_pers.push_back(scored.persistence[s]);
    p_hist.push_back(scored.historical[s]);
    truths.push_back(scored.samples[s].truth);
  }
  return {{"n_selected", sel.size()},
          {"model", metrics_or_null(p_model, truths, k)},
          {"persistence", metrics_or_null(p_pers, truths, k)},
          {"historical_average", metrics_or_null(p_hist, truths, k)}};
}

std::string slice_name(double q) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "top_%gpct", (1.0 - q) * 100.0);
  return buf;
}

}  // namespace

nlohmann::json evaluate_model(TGNetModel& model, const RunConfig& cfg,
                              const DemandTensor& pickup,
                              const DemandTensor& dropoff,
                              const HolidayCalendar& calendar) {
  const TGNetConfig& mc = model.config();
  if (model.grid_rows() != cfg.grid.rows || model.grid_cols() != cfg.grid.cols)
    throw ConfigError("checkpoint grid dims do not match the configured grid");
  DataSplit split =
      make_examples(pickup, dropoff, calendar, mc.t_demand, mc.t_dropoff,
                    cfg.train.f_train, cfg.train.f_val, cfg.train.f_test);
  // The model's training-time policy governs window scaling.
  split.demand_scale = model.demand_scale;
  split.dropoff_scale = model.dropoff_scale;
  if (split.test.targets.empty()) throw DataError("empty test split");

  const int train_end = split.train.targets.empty()
                            ? std::max(mc.t_demand, mc.t_dropoff)
                            : split.train.targets.back() + 1;
  std::vector<TemporalKey> train_keys;
  train_keys.reserve(train_end);
  for (int t = 0; t < train_end; ++t)
    train_keys.push_back(temporal_key(t, pickup.spec, calendar));

  const HistoricalAverage hist_avg(pickup, train_end, train_keys,
                                   cfg.eval.day_type_mode);
  const ScoredTest scored = score_test_set(model, cfg, split, hist_avg);

  std::vector<double> p_model, p_pers, p_hist, truths;
  for (std::size_t s = 0; s < scored.samples.size(); ++s) {
    p_model.push_back(scored.samples[s].pred);
    p_pers.push_back(scored.persistence[s]);
    p_hist.push_back(scored.historical[s]);
    truths.push_back(scored.samples[s].truth);
  }

  nlohmann::json atypical = nlohmann::json::object();
  for (double q : cfg.eval.quantiles) {
    const AtypicalThresholds th = fit_atypical_thresholds(
        pickup, train_end, train_keys, q, cfg.eval.min_bucket,
        cfg.eval.day_type_mode);
    atypical[slice_name(q)] =
        slice_json(scored, select_atypical(scored.samples, th), cfg.eval.k);
  }

  return {{"k", cfg.eval.k},
          {"n_test_examples", split.test.targets.size()},
          {"n_test_samples", scored.samples.size()},
          {"split",
           {{"n_train", split.train.targets.size()},
            {"n_val", split.val.targets.size()},
            {"n_test", split.test.targets.size()}}},
          {"overall",
           {{"model", metrics_or_null(p_model, truths, cfg.eval.k)},
            {"persistence", metrics_or_null(p_pers, truths, cfg.eval.k)},
            {"historical_average",
             metrics_or_null(p_hist, truths, cfg.eval.k)}}},
          {"atypical", atypical},
          {"param_count", model.param_count()}};
}

nlohmann::json cmd_eval(const RunConfig& cfg, const std::string& out_dir) {
  const Dataset data = load_dataset(cfg);
  TGNetModel model = TGNetModel::load(cfg.paths.checkpoint);
  const nlohmann::json report =
      evaluate_model(model, cfg, data.pickup, data.dropoff, data.calendar);
  const std::string path = out_path(out_dir, cfg.paths.report_json);
  write_json(path, report);
  std::printf("report -> %s\n", path.c_str());
  return report;
}

void cmd_export_tge(const RunConfig& cfg, const std::string& out_dir) {
  TGNetModel model = TGNetModel::load(cfg.paths.checkpoint);
  const int slots = model.config().key_dim - 9;
  if (slots < 1) throw ConfigError("model key_dim leaves no time-of-day slots");
  const std::string path = out_path(out_dir, cfg.paths.tge_csv);
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  out << "slot,day_of_week,holiday,before_holiday";
  for (int d = 0; d < model.config().tge_dim; ++d) out << ",v" << d;
  out << "\n";
  char buf[64];
  for (int slot = 0; slot < slots; ++slot) {
    for (int dow = 0; dow < 7; ++dow) {
      for (int holiday = 0; holiday < 2; ++holiday) {
        TemporalKey key;
        key.slots = slots;
        key.bits.assign(static_cast<std::size_t>(slots) + 9, 0);
        key.bits[slot] = 1;
        key.bits[slots + dow] = 1;
        key.bits[slots + 7] = static_cast<std::uint8_t>(holiday);
        const std::vector<double> v = model.tge_vector(key);
        out << slot << "," << dow << "," << holiday << ",0";
        for (double x : v) {
          std::snprintf(buf, sizeof(buf), ",%.17g", x);
          out << buf;
        }
        out << "\n";
      }
    }
  }
  if (!out) throw DataError("failed writing " + path);
  std::printf("tge vectors -> %s\n", path.c_str());
}

nlohmann::json cmd_repro(const RunConfig& cfg, const std::string& out_dir,
                         int n_seeds) {
  if (n_seeds < 1) throw ConfigError("n_seeds must be >= 1");
  const Dataset data = load_dataset(cfg);
  const TGNetConfig mc = model_config_for_grid(cfg);

  std::vector<nlohmann::json> reports;
  for (int i = 0; i < n_seeds; ++i) {
    const std::uint64_t seed = Rng::mix(cfg.train.seed, 0xabcd00 + i);
    TGNetModel model(mc, cfg.grid.rows, cfg.grid.cols, seed);
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    const DataSplit split =
        make_examples(data.pickup, data.dropoff, data.calendar, mc.t_demand,
                      mc.t_dropoff, tc.f_train, tc.f_val, tc.f_test);
    train(model, split, tc);
    reports.push_back(
        evaluate_model(model, cfg, data.pickup, data.dropoff, data.calendar));
  }

  auto aggregate = [&](auto&& get) -> nlohmann::json {
    double mean = 0.0;
    std::vector<double> vals;
    for (const auto& r : reports) vals.push_back(get(r));
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    const double std_dev =
        vals.size() > 1 ? std::sqrt(var / static_cast<double>(vals.size() - 1))
                        : 0.0;
    return {{"mean", mean}, {"std", std_dev}, {"values", vals}};
  };

  nlohmann::json agg = {
      {"n_seeds", n_seeds},
      {"master_seed", cfg.train.seed},
      {"rmse", aggregate([](const nlohmann::json& r) {
         return r.at("overall").at("model").at("rmse").get<double>();
       })},
      {"mape", aggregate([](const nlohmann::json& r) {
         return r.at("overall").at("model").at("mape").get<double>();
       })}};
  for (double q : cfg.eval.quantiles) {
    const std::string name = slice_name(q);
    agg["atypical_rmse"][name] = aggregate([&](const nlohmann::json& r) {
      const auto& m = r.at("atypical").at(name).at("model");
      return m.is_null() ? std::numeric_limits<double>::quiet_NaN()
                         : m.at("rmse").get<double>();
    });
  }
  agg["runs"] = reports;

  const std::string path = out_path(out_dir, "repro.json");
  write_json(path, agg);
  std::printf("aggregate over %d seeds -> %s\n", n_seeds, path.c_str());
  return agg;
}

}  // namespace tgnet
