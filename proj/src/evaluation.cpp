#include "tgnet/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "tgnet/error.hpp"

namespace tgnet {

nlohmann::json MetricsResult::to_json() const {
  return {{"rmse", rmse},
          {"mape", mape},
          {"n_evaluated", n_evaluated},
          {"n_filtered_out", n_filtered_out},
          {"k", threshold_k}};
}

MetricsResult compute_metrics(const std::vector<double>& preds,
                              const std::vector<double>& truths, double k) {
  if (preds.size() != truths.size())
    throw ConfigError("metrics: prediction/truth length mismatch");
  MetricsResult r;
  r.threshold_k = k;
  double sq = 0.0;
  double ape = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (truths[i] < k) {
      ++r.n_filtered_out;
      continue;
    }
    const double err = preds[i] - truths[i];
    sq += err * err;
    ape += std::abs(err) / truths[i];
    ++r.n_evaluated;
  }
  if (r.n_evaluated == 0)
    throw DataError("empty evaluation: no truth value reaches threshold k");
  r.rmse = std::sqrt(sq / static_cast<double>(r.n_evaluated));
  r.mape = ape / static_cast<double>(r.n_evaluated) * 100.0;
  return r;
}

double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile of empty set");
  if (q <= 0.0 || q > 1.0) throw ConfigError("quantile level must be in (0, 1]");
  std::sort(values.begin(), values.end());
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(values.size())));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

int day_type(const TemporalKey& key, DayTypeMode mode) {
  if (mode == DayTypeMode::kTwoWay)
    return (key.weekend() || key.holiday()) ? 1 : 0;
  if (key.holiday()) return 2;
  return key.weekend() ? 1 : 0;
}

int day_type_count(DayTypeMode mode) {
  return mode == DayTypeMode::kTwoWay ? 2 : 3;
}

const char* day_type_mode_name(DayTypeMode mode) {
  return mode == DayTypeMode::kTwoWay ? "two_way" : "three_way";
}

DayTypeMode day_type_mode_from_name(const std::string& s) {
  if (s == "two_way") return DayTypeMode::kTwoWay;
  if (s == "three_way") return DayTypeMode::kThreeWay;
  throw ConfigError("unknown day type mode: '" + s + "'");
}

AtypicalThresholds fit_atypical_thresholds(
    const DemandTensor& tensor, int train_intervals,
    const std::vector<TemporalKey>& interval_keys, double q, int min_bucket,
    DayTypeMode mode) {
  if (interval_keys.size() < static_cast<std::size_t>(train_intervals))
    throw ConfigError("need one temporal key per training interval");
  const int n = tensor.spec.n_cells();
  const int slots = interval_keys.empty() ? 48 : interval_keys.front().slots;
  const int ndt = day_type_count(mode);

  AtypicalThresholds th;
  th.q = q;
  th.n_regions = n;
  th.slots = slots;
  th.mode = mode;
  th.values.assign(static_cast<std::size_t>(n) * slots * ndt, 0.0);

  // region -> bucket -> values
  std::vector<std::vector<std::vector<double>>> buckets(
      n, std::vector<std::vector<double>>(static_cast<std::size_t>(slots) * ndt));
  std::vector<std::vector<double>> region_all(n);
  for (int t = 0; t < train_intervals; ++t) {
    const TemporalKey& key = interval_keys[t];
    const int bucket = key.slot() * ndt + day_type(key, mode);
    for (int i = 0; i < n; ++i) {
      const double v = static_cast<double>(tensor.at(t, i));
      buckets[i][bucket].push_back(v);
      region_all[i].push_back(v);
    }
  }
  for (int i = 0; i < n; ++i) {
    const double fallback = nearest_rank_quantile(region_all[i], q);
    for (int bkt = 0; bkt < slots * ndt; ++bkt) {
      const auto& vals = buckets[i][bkt];
      th.values[static_cast<std::size_t>(i) * slots * ndt + bkt] =
          vals.size() < static_cast<std::size_t>(min_bucket)
              ? fallback
              : nearest_rank_quantile(vals, q);
    }
  }
  return th;
}

std::vector<std::size_t> select_atypical(const std::vector<Sample>& samples,
                                         const AtypicalThresholds& thresholds) {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const Sample& sample = samples[s];
    if (sample.truth >
        thresholds.at(sample.region, sample.slot, sample.dt))
      out.push_back(s);
  }
  return out;
}

double baseline_persistence(const DemandTensor& demand, int target,
                            int region) {
  if (target < 1) throw DataError("persistence baseline needs one past interval");
  return static_cast<double>(demand.at(target - 1, region));
}

HistoricalAverage::HistoricalAverage(
    const DemandTensor& tensor, int train_intervals,
    const std::vector<TemporalKey>& interval_keys, DayTypeMode mode)
    : n_regions_(tensor.spec.n_cells()),
      slots_(interval_keys.empty() ? 48 : interval_keys.front().slots),
      mode_(mode) {
  if (interval_keys.size() < static_cast<std::size_t>(train_intervals))
    throw ConfigError("need one temporal key per training interval");
  const int ndt = day_type_count(mode_);
  sums_.assign(static_cast<std::size_t>(n_regions_) * slots_ * ndt, 0.0);
  counts_.assign(sums_.size(), 0);
  region_mean_.assign(n_regions_, 0.0);
  std::vector<std::size_t> region_counts(n_regions_, 0);
  for (int t = 0; t < train_intervals; ++t) {
    const TemporalKey& key = interval_keys[t];
    const int bucket = key.slot() * ndt + day_type(key, mode_);
    for (int i = 0; i < n_regions_; ++i) {
      const double v = static_cast<double>(tensor.at(t, i));
      const std::size_t at =
          static_cast<std::size_t>(i) * slots_ * ndt + bucket;
      sums_[at] += v;
      ++counts_[at];
      region_mean_[i] += v;
      ++region_counts[i];
    }
  }
  for (int i = 0; i < n_regions_; ++i)
    if (region_counts[i] > 0)
      region_mean_[i] /= static_cast<double>(region_counts[i]);
}

double HistoricalAverage::predict(int region, int slot, int dt) const {
  const std::size_t at =
      (static_cast<std::size_t>(region) * slots_ + slot) * day_type_count(mode_) +
      dt;
  if (counts_[at] == 0) return region_mean_[region];
  return sums_[at] / static_cast<double>(counts_[at]);
}

}  // namespace tgnet
