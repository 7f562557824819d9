#include "tgnet/grid.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>

#include "tgnet/error.hpp"
#include "tgnet/time_util.hpp"

namespace tgnet {

const char* kind_name(Kind k) {
  return k == Kind::kPickup ? "pickup" : "dropoff";
}

Kind kind_from_name(const std::string& s) {
  if (s == "pickup") return Kind::kPickup;
  if (s == "dropoff") return Kind::kDropoff;
  throw DataError("unknown demand kind: '" + s + "'");
}

void GridSpec::validate() const {
  if (rows < 1 || cols < 1) throw ConfigError("grid dims must be >= 1");
  if (!(lat_max > lat_min) || !(lon_max > lon_min))
    throw ConfigError("grid bbox has zero or negative area");
  if (interval_len <= 0) throw ConfigError("interval_len must be positive");
  if (period_end <= period_start)
    throw ConfigError("period_end must be after period_start");
  if (n_intervals() < 1)
    throw ConfigError("period shorter than one interval");
}

int GridSpec::cell_index(double lat, double lon) const {
  if (lat < lat_min || lat > lat_max || lon < lon_min || lon > lon_max)
    return -1;
  int r = static_cast<int>((lat - lat_min) / (lat_max - lat_min) * rows);
  int c = static_cast<int>((lon - lon_min) / (lon_max - lon_min) * cols);
  if (r >= rows) r = rows - 1;  // global max edge
  if (c >= cols) c = cols - 1;
  return r * cols + c;
}

int GridSpec::interval_index(std::int64_t ts) const {
  if (ts < period_start) return -1;
  const std::int64_t t = (ts - period_start) / interval_len;
  if (t >= n_intervals()) return -1;
  return static_cast<int>(t);
}

std::uint64_t DemandTensor::total() const {
  std::uint64_t s = 0;
  for (std::uint32_t v : values) s += v;
  return s;
}

RasterizeResult rasterize(const std::vector<DemandLog>& logs,
                          const GridSpec& spec, Kind kind) {
  spec.validate();
  RasterizeResult out;
  out.tensor.spec = spec;
  out.tensor.kind = kind;
  out.tensor.values.assign(
      static_cast<std::size_t>(spec.n_intervals()) * spec.n_cells(), 0);

  // Integer increments commute, so a parallel pass with atomic adds would be
  // deterministic too; at desk scale the serial loop wins.
  std::size_t dropped = 0;
  for (const DemandLog& log : logs) {
    if (log.kind != kind) continue;
    const int cell = spec.cell_index(log.lat, log.lon);
    const int t = spec.interval_index(log.timestamp);
    if (cell < 0 || t < 0) {
      ++dropped;
      continue;
    }
    ++out.tensor.at(t, cell);
  }
  out.n_dropped = dropped;
  return out;
}

RegionGraph build_lattice_graph(int rows, int cols) {
  RegionGraph g;
  g.n_nodes = rows * cols;
  g.neighbors.resize(g.n_nodes);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      auto& nb = g.neighbors[r * cols + c];
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const int nr = r + dr;
          const int nc = c + dc;
          if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
          nb.push_back(nr * cols + nc);
        }
      }
      // row-major scan emits sorted indices already
    }
  }
  return g;
}

RegionGraph build_graph(const GridSpec& spec) {
  return build_lattice_graph(spec.rows, spec.cols);
}

TemporalKey temporal_key(int t, const GridSpec& spec,
                         const HolidayCalendar& calendar) {
  if (86400 % spec.interval_len != 0)
    throw ConfigError("interval_len must divide 86400 for temporal keys");
  const int slots = 86400 / spec.interval_len;
  if (t < 0 || t >= spec.n_intervals())
    throw DataError("interval index outside period");

  const std::int64_t utc = spec.period_start +
                           static_cast<std::int64_t>(t) * spec.interval_len;
  const std::int64_t local = utc + calendar.utc_offset;
  const std::int64_t day = floor_div(local, 86400);
  const std::int64_t sod = local - day * 86400;

  TemporalKey key;
  key.slots = slots;
  key.bits.assign(static_cast<std::size_t>(slots) + 9, 0);
  key.bits[static_cast<std::size_t>(sod / spec.interval_len)] = 1;
  // 1970-01-01 was a Thursday; shift so Monday = 0.
  const int dow = static_cast<int>(((day % 7) + 7 + 3) % 7);
  key.bits[static_cast<std::size_t>(slots + dow)] = 1;
  if (calendar.contains_day(day)) key.bits[static_cast<std::size_t>(slots) + 7] = 1;
  if (calendar.contains_day(day + 1))
    key.bits[static_cast<std::size_t>(slots) + 8] = 1;
  return key;
}

int TemporalKey::slot() const {
  for (int i = 0; i < slots; ++i)
    if (bits[i]) return i;
  return -1;
}

int TemporalKey::day_of_week() const {
  for (int i = 0; i < 7; ++i)
    if (bits[slots + i]) return i;
  return -1;
}

ScalePolicy fit_scale(const DemandTensor& tensor, int train_intervals) {
  if (train_intervals < 0 || train_intervals > tensor.spec.n_intervals())
    throw ConfigError("train interval range outside tensor");
  std::uint32_t max_v = 0;
  const std::size_t n =
      static_cast<std::size_t>(train_intervals) * tensor.spec.n_cells();
  for (std::size_t i = 0; i < n; ++i)
    if (tensor.values[i] > max_v) max_v = tensor.values[i];
  ScalePolicy policy;
  if (max_v == 0) {
    std::fprintf(stderr,
                 "warning: all-zero training data for %s tensor; scaling "
                 "disabled\n",
                 kind_name(tensor.kind));
    policy.max_value = 1.0;
  } else {
    policy.max_value = static_cast<double>(max_v);
  }
  return policy;
}

Tensor node_features(const DemandTensor& tensor, int t, int window,
                     const ScalePolicy& scale) {
  if (window < 1) throw ConfigError("window length must be >= 1");
  if (t - window + 1 < 0) throw DataError("window underflows series start");
  if (t >= tensor.spec.n_intervals())
    throw DataError("window end outside series");
  const int n = tensor.spec.n_cells();
  Tensor out{static_cast<std::size_t>(n), static_cast<std::size_t>(window)};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < window; ++j)
      out.at(i, j) = scale.apply(static_cast<double>(tensor.at(t - j, i)));
  return out;
}

}  // namespace tgnet
