#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tgnet/grid.hpp"

#include "json.hpp"

namespace tgnet {

struct SynthEvent {
  int cell = 0;
  int start = 0;     // interval index of the pickup surge
  int duration = 1;  // intervals
  double magnitude = 0.0;
};

struct Hotspot {
  double row = 0.0;
  double col = 0.0;
  double radius = 1.0;
  double intensity = 1.0;  // added factor at the center
};

// Seeded generator for demand-log datasets with known temporal contexts,
// spatial structure, and labeled surge events. Drop-off surges lead pickup
// surges by `dropoff_lag` intervals.
struct SynthConfig {
  int rows = 4;
  int cols = 4;
  int n_days = 14;
  int interval_len = 1800;
  double base_rate = 20.0;
  std::vector<double> region_base;    // optional per-cell base, size rows*cols
  std::vector<double> daily_profile;  // per-slot multiplier; empty -> flat
  double weekday_mult = 1.0;
  double weekend_mult = 1.0;
  double holiday_mult = 1.0;
  std::vector<Hotspot> hotspots;
  std::vector<SynthEvent> events;
  int dropoff_lag = 2;
  double dropoff_coupling = 1.0;
  double dropoff_base_scale = 1.0;
  bool deterministic = false;  // counts = round(lambda) instead of Poisson
  std::uint64_t seed = 0;
  std::vector<std::int64_t> holidays;  // local day numbers
  int utc_offset = 0;
  std::int64_t period_start = 1704067200;  // 2024-01-01, a Monday
  double lat_min = 0.0, lat_max = 0.08;
  double lon_min = 0.0, lon_max = 0.16;

  void validate() const;
  GridSpec grid_spec() const;
  HolidayCalendar calendar() const;
  int slots() const { return 86400 / interval_len; }

  // Mean of the noise-free rate field over all cells and intervals.
  double expected_mean() const;
  // Rate components, exposed for oracle tests.
  double base_field(int cell) const;
  double rate_pickup(int cell, int t) const;
  double rate_dropoff(int cell, int t) const;

  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);

  // NYC-taxi-like statistics on a 10x20 grid (overall mean ~38.8).
  static SynthConfig nyc_taxi_like(std::uint64_t seed);
  // Small grid with strong day-type rates and daily surge events coupled to
  // leading drop-offs; the workhorse for desk-scale experiments.
  static SynthConfig context_events_small(std::uint64_t seed);
};

struct SynthLabels {
  std::vector<std::uint8_t> event_mask;  // P x N, 1 where a surge is active
  std::vector<int> context_slot;         // per interval
  std::vector<int> context_day_type;     // per interval, 0 workday, 1 rest
};

struct SynthOutput {
  DemandTensor pickup;
  DemandTensor dropoff;
  SynthLabels labels;
};

SynthOutput generate(const SynthConfig& cfg);

// One log per count unit, timestamps uniform in the interval, positions
// uniform inside the cell (with a margin so rasterize round-trips exactly).
std::vector<DemandLog> export_logs(const DemandTensor& tensor,
                                   std::uint64_t seed);

}  // namespace tgnet
