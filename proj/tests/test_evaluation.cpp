#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tgnet/commands.hpp"
#include "tgnet/error.hpp"
#include "tgnet/evaluation.hpp"
#include "tgnet/rng.hpp"
#include "tgnet/synthgen.hpp"
#include "tgnet/training.hpp"

using namespace tgnet;

namespace {

// scalar-loop reference for both metrics
void naive_metrics(const std::vector<double>& preds,
                   const std::vector<double>& truths, double k, double& rmse,
                   double& mape, std::size_t& kept) {
  double sq = 0.0, ape = 0.0;
  kept = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (truths[i] < k) continue;
    sq += (preds[i] - truths[i]) * (preds[i] - truths[i]);
    ape += std::abs(preds[i] - truths[i]) / truths[i];
    ++kept;
  }
  rmse = std::sqrt(sq / static_cast<double>(kept));
  mape = ape / static_cast<double>(kept) * 100.0;
}

}  // namespace

TEST_CASE("metrics reproduce the worked single-sample examples") {
  const MetricsResult low = compute_metrics({3.0}, {1.0}, 1.0);
  CHECK(low.mape == 200.0);
  CHECK(low.rmse == 2.0);

  const MetricsResult high = compute_metrics({500.0}, {1000.0}, 1.0);
  CHECK(high.mape == 50.0);
  CHECK(high.rmse == 500.0);

  const MetricsResult zero = compute_metrics({5.0, 7.0}, {5.0, 7.0}, 1.0);
  CHECK(zero.rmse == 0.0);
  CHECK(zero.mape == 0.0);
}

TEST_CASE("threshold filter matches a filter-then-average oracle") {
  Rng rng(3);
  std::vector<double> preds, truths;
  for (int i = 0; i < 500; ++i) {
    truths.push_back(static_cast<double>(rng.below(40)));
    preds.push_back(truths.back() + rng.uniform(-5.0, 5.0));
  }
  const double k = 11.0;
  const MetricsResult r = compute_metrics(preds, truths, k);
  double rmse, mape;
  std::size_t kept;
  naive_metrics(preds, truths, k, rmse, mape, kept);
  CHECK(r.n_evaluated == kept);
  CHECK(r.n_evaluated + r.n_filtered_out == preds.size());
  CHECK(r.rmse == doctest::Approx(rmse).epsilon(1e-12));
  CHECK(r.mape == doctest::Approx(mape).epsilon(1e-12));
}

TEST_CASE("metrics equal the naive loop to 1e-12 on 1000 random vectors") {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<double> preds(n), truths(n);
    for (std::size_t i = 0; i < n; ++i) {
      truths[i] = rng.uniform(0.0, 100.0);
      preds[i] = rng.uniform(0.0, 100.0);
    }
    truths[rng.below(n)] = 60.0;  // guarantee one kept pair
    const double k = rng.uniform(0.0, 50.0);
    const MetricsResult r = compute_metrics(preds, truths, k);
    double rmse, mape;
    std::size_t kept;
    naive_metrics(preds, truths, k, rmse, mape, kept);
    CHECK(std::abs(r.rmse - rmse) <= 1e-12 * std::max(1.0, rmse));
    CHECK(std::abs(r.mape - mape) <= 1e-12 * std::max(1.0, mape));
  }
}

TEST_CASE("an empty filtered set raises, and raising k never keeps more") {
  CHECK_THROWS_AS(compute_metrics({1.0, 2.0}, {3.0, 4.0}, 11.0), DataError);
  Rng rng(7);
  std::vector<double> preds, truths;
  for (int i = 0; i < 200; ++i) {
    truths.push_back(static_cast<double>(rng.below(30)));
    preds.push_back(truths.back());
  }
  std::size_t prev = truths.size();
  for (double k : {0.0, 5.0, 11.0, 20.0}) {
    const MetricsResult r = compute_metrics(preds, truths, k);
    CHECK(r.n_evaluated <= prev);
    prev = r.n_evaluated;
  }
}

TEST_CASE("rmse is symmetric at k=0; mape deliberately is not") {
  Rng rng(9);
  std::vector<double> a, b;
  for (int i = 0; i < 64; ++i) {
    a.push_back(rng.uniform(1.0, 50.0));
    b.push_back(rng.uniform(1.0, 50.0));
  }
  CHECK(compute_metrics(a, b, 0.0).rmse ==
        doctest::Approx(compute_metrics(b, a, 0.0).rmse).epsilon(1e-15));
}

TEST_CASE("nearest-rank quantile: definition cases") {
  std::vector<double> v(100);
  for (int i = 0; i < 100; ++i) v[i] = i + 1;
  CHECK(nearest_rank_quantile(v, 0.95) == 95.0);
  CHECK(nearest_rank_quantile(v, 0.99) == 99.0);
  CHECK(nearest_rank_quantile(v, 1.0) == 100.0);
  CHECK(nearest_rank_quantile({42.0}, 0.5) == 42.0);
}

TEST_CASE("day types: two-way and three-way") {
  TemporalKey key;
  key.slots = 48;
  key.bits.assign(57, 0);
  key.bits[5] = 1;
  key.bits[48 + 2] = 1;  // Wednesday
  CHECK(day_type(key, DayTypeMode::kTwoWay) == 0);
  CHECK(day_type(key, DayTypeMode::kThreeWay) == 0);
  key.bits[48 + 7] = 1;  // holiday on a weekday
  CHECK(day_type(key, DayTypeMode::kTwoWay) == 1);
  CHECK(day_type(key, DayTypeMode::kThreeWay) == 2);
  key.bits[48 + 7] = 0;
  key.bits[48 + 2] = 0;
  key.bits[48 + 5] = 1;  // Saturday
  CHECK(day_type(key, DayTypeMode::kTwoWay) == 1);
  CHECK(day_type(key, DayTypeMode::kThreeWay) == 1);
}

namespace {

struct FittedThresholds {
  SynthConfig cfg;
  SynthOutput data;
  std::vector<TemporalKey> keys;
  int train_end = 0;
};

FittedThresholds threshold_fixture(bool with_events) {
  FittedThresholds f;
  f.cfg = SynthConfig::context_events_small(21);
  f.cfg.deterministic = true;
  if (!with_events) f.cfg.events.clear();
  f.data = generate(f.cfg);
  const GridSpec spec = f.data.pickup.spec;
  f.train_end = spec.n_intervals() * 4 / 5;
  const HolidayCalendar cal = f.cfg.calendar();
  for (int t = 0; t < spec.n_intervals(); ++t)
    f.keys.push_back(temporal_key(t, spec, cal));
  return f;
}

}  // namespace

TEST_CASE("atypical thresholds: constants, nesting, bucket fallback") {
  SUBCASE("constant series: threshold equals the constant, nothing exceeds") {
    SynthConfig cfg;
    cfg.rows = 2;
    cfg.cols = 2;
    cfg.n_days = 7;
    cfg.base_rate = 9.0;
    cfg.deterministic = true;
    const SynthOutput data = generate(cfg);
    const HolidayCalendar cal = cfg.calendar();
    std::vector<TemporalKey> keys;
    for (int t = 0; t < data.pickup.spec.n_intervals(); ++t)
      keys.push_back(temporal_key(t, data.pickup.spec, cal));
    const AtypicalThresholds th = fit_atypical_thresholds(
        data.pickup, data.pickup.spec.n_intervals(), keys, 0.99, 5,
        DayTypeMode::kTwoWay);
    std::vector<Sample> samples;
    for (int t = 0; t < data.pickup.spec.n_intervals(); ++t)
      for (int i = 0; i < 4; ++i)
        samples.push_back({t, i, static_cast<double>(data.pickup.at(t, i)),
                           0.0, keys[t].slot(),
                           day_type(keys[t], DayTypeMode::kTwoWay)});
    CHECK(select_atypical(samples, th).empty());
  }

  SUBCASE("top-1% thresholds dominate top-5% bucket-wise, selections nest") {
    FittedThresholds f = threshold_fixture(true);
    const AtypicalThresholds t99 = fit_atypical_thresholds(
        f.data.pickup, f.train_end, f.keys, 0.99, 20, DayTypeMode::kTwoWay);
    const AtypicalThresholds t95 = fit_atypical_thresholds(
        f.data.pickup, f.train_end, f.keys, 0.95, 20, DayTypeMode::kTwoWay);
    for (std::size_t i = 0; i < t99.values.size(); ++i)
      CHECK(t99.values[i] >= t95.values[i]);

    std::vector<Sample> samples;
    const int n = f.cfg.rows * f.cfg.cols;
    for (int t = f.train_end; t < f.data.pickup.spec.n_intervals(); ++t)
      for (int i = 0; i < n; ++i)
        samples.push_back({t, i, static_cast<double>(f.data.pickup.at(t, i)),
                           0.0, f.keys[t].slot(),
                           day_type(f.keys[t], DayTypeMode::kTwoWay)});
    const auto sel99 = select_atypical(samples, t99);
    const auto sel95 = select_atypical(samples, t95);
    for (std::size_t s : sel99)
      CHECK(std::find(sel95.begin(), sel95.end(), s) != sel95.end());
  }

  SUBCASE("sparse buckets fall back to the per-region quantile") {
    FittedThresholds f = threshold_fixture(false);
    // ask for more samples per bucket than any bucket can have
    const AtypicalThresholds th = fit_atypical_thresholds(
        f.data.pickup, f.train_end, f.keys, 0.95, 1000000,
        DayTypeMode::kTwoWay);
    for (int region = 0; region < f.cfg.rows * f.cfg.cols; ++region) {
      std::vector<double> all;
      for (int t = 0; t < f.train_end; ++t)
        all.push_back(static_cast<double>(f.data.pickup.at(t, region)));
      const double fallback = nearest_rank_quantile(all, 0.95);
      for (int slot = 0; slot < 48; ++slot)
        for (int dt = 0; dt < 2; ++dt)
          CHECK(th.at(region, slot, dt) == fallback);
    }
  }
}

TEST_CASE("injected spikes are selected and background is not") {
  FittedThresholds clean = threshold_fixture(false);
  const AtypicalThresholds th = fit_atypical_thresholds(
      clean.data.pickup, clean.data.pickup.spec.n_intervals(), clean.keys,
      0.99, 20, DayTypeMode::kTwoWay);

  SynthConfig spiked_cfg = clean.cfg;
  SynthEvent event;
  event.cell = 5;
  event.start = clean.train_end + 10;
  event.duration = 4;
  event.magnitude = 400.0;
  spiked_cfg.events = {event};
  const SynthOutput spiked = generate(spiked_cfg);

  const int n = spiked_cfg.rows * spiked_cfg.cols;
  std::vector<Sample> samples;
  std::vector<bool> truth_label;
  for (int t = clean.train_end; t < spiked.pickup.spec.n_intervals(); ++t) {
    for (int i = 0; i < n; ++i) {
      samples.push_back({t, i, static_cast<double>(spiked.pickup.at(t, i)),
                         0.0, clean.keys[t].slot(),
                         day_type(clean.keys[t], DayTypeMode::kTwoWay)});
      truth_label.push_back(
          spiked.labels.event_mask[static_cast<std::size_t>(t) * n + i] != 0);
    }
  }
  const auto selected = select_atypical(samples, th);
  std::vector<bool> got(samples.size(), false);
  for (std::size_t s : selected) got[s] = true;
  for (std::size_t s = 0; s < samples.size(); ++s)
    CHECK(got[s] == truth_label[s]);
}

TEST_CASE("baselines: persistence and historical average exactness") {
  SUBCASE("persistence is exact on a constant series") {
    SynthConfig cfg;
    cfg.rows = 2;
    cfg.cols = 2;
    cfg.n_days = 2;
    cfg.base_rate = 17.0;
    cfg.deterministic = true;
    const SynthOutput data = generate(cfg);
    for (int t = 1; t < data.pickup.spec.n_intervals(); ++t)
      for (int i = 0; i < 4; ++i)
        CHECK(baseline_persistence(data.pickup, t, i) ==
              static_cast<double>(data.pickup.at(t, i)));
  }

  SUBCASE("historical average is exact on periodic deterministic data") {
    FittedThresholds f = threshold_fixture(false);
    const HistoricalAverage avg(f.data.pickup, f.train_end, f.keys,
                                DayTypeMode::kTwoWay);
    // every test-range context also appears in the train range
    for (int t = f.train_end; t < f.data.pickup.spec.n_intervals(); ++t)
      for (int i = 0; i < f.cfg.rows * f.cfg.cols; ++i)
        CHECK(avg.predict(i, f.keys[t].slot(),
                          day_type(f.keys[t], DayTypeMode::kTwoWay)) ==
              doctest::Approx(static_cast<double>(f.data.pickup.at(t, i)))
                  .epsilon(1e-12));
  }
}

TEST_CASE("a trained model beats both trivial baselines on eventful data") {
  const SynthConfig cfg = SynthConfig::context_events_small(33);
  const SynthOutput data = generate(cfg);
  const HolidayCalendar cal = cfg.calendar();

  TGNetConfig mc;
  mc.t_demand = 8;
  mc.t_dropoff = 16;
  mc.n_gn_layers = 3;
  mc.nf = 8;
  mc.width_ratios = {1, 2, 1};
  mc.tge_dim = 8;
  mc.dropoff_layers = 2;
  mc.dropoff_width = 8;
  mc.head_width = 16;
  mc.bn_momentum = 0.9;  // desk-scale run: stats must converge in ~100 updates
  TGNetModel model(mc, cfg.rows, cfg.cols, 1234);

  const DataSplit split = make_examples(data.pickup, data.dropoff, cal,
                                        mc.t_demand, mc.t_dropoff, 0.64, 0.16,
                                        0.20);
  TrainConfig tc;
  tc.max_epochs = 60;
  tc.patience = 10;
  tc.batch_size = 64;
  tc.lr0 = 0.005;  // 0.01 overshoots the tiny scaled targets at this width
  tc.seed = 77;
  train(model, split, tc);

  RunConfig rc;
  rc.grid = data.pickup.spec;
  rc.utc_offset = cfg.utc_offset;
  const nlohmann::json report =
      evaluate_model(model, rc, data.pickup, data.dropoff, cal);
  const double model_rmse =
      report.at("overall").at("model").at("rmse").get<double>();
  const double pers_rmse =
      report.at("overall").at("persistence").at("rmse").get<double>();
  const double hist_rmse =
      report.at("overall").at("historical_average").at("rmse").get<double>();
  MESSAGE("rmse model ", model_rmse, " persistence ", pers_rmse,
          " historical ", hist_rmse);
  CHECK(model_rmse < pers_rmse);
  CHECK(model_rmse < hist_rmse);
}
