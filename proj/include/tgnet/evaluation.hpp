#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tgnet/grid.hpp"

#include "json.hpp"

namespace tgnet {

// Threshold-filtered forecasting metrics: pairs whose truth is below k are
// excluded before averaging.
struct MetricsResult {
  double rmse = 0.0;
  double mape = 0.0;  // percent
  std::size_t n_evaluated = 0;
  std::size_t n_filtered_out = 0;
  double threshold_k = 0.0;

  nlohmann::json to_json() const;
};

// Throws DataError when no pair survives the filter.
MetricsResult compute_metrics(const std::vector<double>& preds,
                              const std::vector<double>& truths, double k);

// q-quantile as the ceil(q*n)-th order statistic, no interpolation.
double nearest_rank_quantile(std::vector<double> values, double q);

enum class DayTypeMode { kTwoWay, kThreeWay };

// Two-way: workday vs weekend-or-holiday. Three-way: workday / weekend /
// holiday (holiday wins over weekend).
int day_type(const TemporalKey& key, DayTypeMode mode);
int day_type_count(DayTypeMode mode);
const char* day_type_mode_name(DayTypeMode mode);
DayTypeMode day_type_mode_from_name(const std::string& s);

// Contextual demand thresholds per (region, time-of-day slot, day type),
// fit as empirical quantiles of the training split. Sparse buckets fall back
// to the region's all-context quantile.
struct AtypicalThresholds {
  double q = 0.99;
  int n_regions = 0;
  int slots = 48;
  DayTypeMode mode = DayTypeMode::kTwoWay;
  std::vector<double> values;  // [region][slot][daytype]

  double at(int region, int slot, int dt) const {
    return values[(static_cast<std::size_t>(region) * slots + slot) *
                      day_type_count(mode) +
                  dt];
  }
};

AtypicalThresholds fit_atypical_thresholds(
    const DemandTensor& tensor, int train_intervals,
    const std::vector<TemporalKey>& interval_keys, double q, int min_bucket,
    DayTypeMode mode);

// One scored forecast target.
struct Sample {
  int target = 0;  // interval index
  int region = 0;
  double truth = 0.0;
  double pred = 0.0;
  int slot = 0;
  int dt = 0;
};

// Indices of samples whose truth strictly exceeds their bucket threshold.
std::vector<std::size_t> select_atypical(const std::vector<Sample>& samples,
                                         const AtypicalThresholds& thresholds);

// Last-interval copy baseline.
double baseline_persistence(const DemandTensor& demand, int target,
                            int region);

// Mean of training values sharing (region, slot, day type).
class HistoricalAverage {
 public:
  HistoricalAverage(const DemandTensor& tensor, int train_intervals,
                    const std::vector<TemporalKey>& interval_keys,
                    DayTypeMode mode);
  double predict(int region, int slot, int dt) const;

 private:
  int n_regions_;
  int slots_;
  DayTypeMode mode_;
  std::vector<double> sums_;
  std::vector<std::size_t> counts_;
  std::vector<double> region_mean_;
};

}  // namespace tgnet
