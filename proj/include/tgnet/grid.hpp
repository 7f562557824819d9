#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "tgnet/graph.hpp"
#include "tgnet/tensor.hpp"

namespace tgnet {

enum class Kind : std::uint32_t { kPickup = 0, kDropoff = 1 };

const char* kind_name(Kind k);
Kind kind_from_name(const std::string& s);

struct DemandLog {
  std::int64_t timestamp = 0;  // UTC seconds
  double lat = 0.0;
  double lon = 0.0;
  Kind kind = Kind::kPickup;
};

// Rectangular tessellation plus the time discretization. Cell indices are
// row-major: row 0 at the min-latitude edge, col 0 at the min-longitude edge.
struct GridSpec {
  double lat_min = 0.0, lat_max = 1.0;
  double lon_min = 0.0, lon_max = 1.0;
  int rows = 1;
  int cols = 1;
  int interval_len = 1800;  // seconds
  std::int64_t period_start = 0;
  std::int64_t period_end = 0;

  int n_cells() const { return rows * cols; }
  int n_intervals() const {
    return static_cast<int>((period_end - period_start) / interval_len);
  }

  void validate() const;  // throws ConfigError

  // -1 when out of bounds. Points on a cell's max edge belong to the next
  // cell; the global max edges belong to the last cell.
  int cell_index(double lat, double lon) const;
  // -1 when outside [period_start, period_start + P*interval_len).
  int interval_index(std::int64_t ts) const;
};

struct DemandTensor {
  GridSpec spec;
  Kind kind = Kind::kPickup;
  std::vector<std::uint32_t> values;  // P x N, row-major by time

  std::uint32_t at(int t, int cell) const {
    return values[static_cast<std::size_t>(t) * spec.n_cells() + cell];
  }
  std::uint32_t& at(int t, int cell) {
    return values[static_cast<std::size_t>(t) * spec.n_cells() + cell];
  }
  std::uint64_t total() const;
};

struct RasterizeResult {
  DemandTensor tensor;
  std::size_t n_dropped = 0;  // out-of-bounds or out-of-period logs
};

RasterizeResult rasterize(const std::vector<DemandLog>& logs,
                          const GridSpec& spec, Kind kind);

RegionGraph build_graph(const GridSpec& spec);

// Calendar indicator vector: one-hot time-of-day slots, one-hot day-of-week
// (Monday first), holiday bit, day-before-holiday bit. 57 dims for 30-minute
// intervals.
struct TemporalKey {
  int slots = 48;
  std::vector<std::uint8_t> bits;  // slots + 7 + 1 + 1

  int dim() const { return static_cast<int>(bits.size()); }
  int slot() const;
  int day_of_week() const;  // 0 = Monday
  bool holiday() const { return bits[slots + 7] != 0; }
  bool before_holiday() const { return bits[slots + 8] != 0; }
  bool weekend() const { return day_of_week() >= 5; }
};

struct HolidayCalendar {
  std::set<std::int64_t> days;  // local day numbers
  int utc_offset = 0;           // seconds added to UTC to get local time

  bool contains_day(std::int64_t day) const { return days.count(day) != 0; }
};

TemporalKey temporal_key(int t, const GridSpec& spec,
                         const HolidayCalendar& calendar);

// Global max scaling fit on the training prefix of the series.
struct ScalePolicy {
  double max_value = 1.0;

  double apply(double x) const { return x / max_value; }
  double invert(double y) const { return y * max_value; }
};

// Max over the first `train_intervals` rows; all-zero data degrades to the
// identity policy with a warning on stderr.
ScalePolicy fit_scale(const DemandTensor& tensor, int train_intervals);

// N x T window matrix, row i = [x_t, x_{t-1}, ..., x_{t-T+1}] scaled by
// `scale`. Throws DataError when the window underflows the series.
Tensor node_features(const DemandTensor& tensor, int t, int window,
                     const ScalePolicy& scale);

}  // namespace tgnet
