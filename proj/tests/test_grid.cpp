#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tgnet/error.hpp"
#include "tgnet/grid.hpp"
#include "tgnet/rng.hpp"
#include "tgnet/time_util.hpp"

using namespace tgnet;

namespace {

GridSpec small_spec(int rows, int cols, int intervals) {
  GridSpec spec;
  spec.lat_min = 40.0;
  spec.lat_max = 40.2;
  spec.lon_min = -74.2;
  spec.lon_max = -73.8;
  spec.rows = rows;
  spec.cols = cols;
  spec.interval_len = 1800;
  spec.period_start = 1704067200;  // 2024-01-01 Monday 00:00 UTC
  spec.period_end = spec.period_start + static_cast<std::int64_t>(intervals) * 1800;
  return spec;
}

// Independent point classifier: scan every cell and interval explicitly.
int brute_force_cell(const GridSpec& s, double lat, double lon) {
  if (lat < s.lat_min || lat > s.lat_max || lon < s.lon_min || lon > s.lon_max)
    return -1;
  const double dlat = (s.lat_max - s.lat_min) / s.rows;
  const double dlon = (s.lon_max - s.lon_min) / s.cols;
  for (int r = 0; r < s.rows; ++r) {
    for (int c = 0; c < s.cols; ++c) {
      const double lo_lat = s.lat_min + r * dlat;
      const double hi_lat = r == s.rows - 1 ? s.lat_max : s.lat_min + (r + 1) * dlat;
      const double lo_lon = s.lon_min + c * dlon;
      const double hi_lon = c == s.cols - 1 ? s.lon_max : s.lon_min + (c + 1) * dlon;
      const bool in_lat = lat >= lo_lat && (r == s.rows - 1 ? lat <= hi_lat : lat < hi_lat);
      const bool in_lon = lon >= lo_lon && (c == s.cols - 1 ? lon <= hi_lon : lon < hi_lon);
      if (in_lat && in_lon) return r * s.cols + c;
    }
  }
  return -1;
}

}  // namespace

TEST_CASE("rasterize: single log at the bbox center of a 1x1 grid") {
  GridSpec spec = small_spec(1, 1, 1);
  DemandLog log;
  log.timestamp = spec.period_start + 900;
  log.lat = (spec.lat_min + spec.lat_max) / 2;
  log.lon = (spec.lon_min + spec.lon_max) / 2;
  log.kind = Kind::kPickup;
  const RasterizeResult r = rasterize({log}, spec, Kind::kPickup);
  REQUIRE(r.tensor.values.size() == 1);
  CHECK(r.tensor.at(0, 0) == 1);
  CHECK(r.n_dropped == 0);
}

TEST_CASE("rasterize: no logs gives an all-zero tensor of full shape") {
  GridSpec spec = small_spec(3, 4, 5);
  const RasterizeResult r = rasterize({}, spec, Kind::kPickup);
  CHECK(r.tensor.values.size() == 5u * 12u);
  CHECK(r.tensor.total() == 0);
}

TEST_CASE("rasterize matches a brute-force point-in-cell oracle") {
  GridSpec spec = small_spec(2, 2, 2);
  Rng rng(99);
  std::vector<DemandLog> logs;
  for (int i = 0; i < 200; ++i) {
    DemandLog log;
    // includes out-of-bounds and out-of-period entries on purpose
    log.timestamp = spec.period_start - 600 + static_cast<std::int64_t>(rng.below(2 * 1800 + 1200));
    log.lat = rng.uniform(spec.lat_min - 0.02, spec.lat_max + 0.02);
    log.lon = rng.uniform(spec.lon_min - 0.04, spec.lon_max + 0.04);
    log.kind = i % 3 == 0 ? Kind::kDropoff : Kind::kPickup;
    logs.push_back(log);
  }
  const RasterizeResult r = rasterize(logs, spec, Kind::kPickup);

  std::vector<std::uint32_t> expected(2 * 4, 0);
  std::size_t expect_dropped = 0;
  std::size_t n_pickup = 0;
  for (const DemandLog& log : logs) {
    if (log.kind != Kind::kPickup) continue;
    ++n_pickup;
    const int cell = brute_force_cell(spec, log.lat, log.lon);
    const std::int64_t dt = log.timestamp - spec.period_start;
    const int t = dt >= 0 && dt < 2 * 1800 ? static_cast<int>(dt / 1800) : -1;
    if (cell < 0 || t < 0) {
      ++expect_dropped;
      continue;
    }
    ++expected[t * 4 + cell];
  }
  CHECK(r.n_dropped == expect_dropped);
  for (int t = 0; t < 2; ++t)
    for (int cell = 0; cell < 4; ++cell)
      CHECK(r.tensor.at(t, cell) == expected[t * 4 + cell]);
  // conservation
  CHECK(r.tensor.total() + r.n_dropped == n_pickup);
}

TEST_CASE("rasterize: boundary points on max edges stay in the last cell") {
  GridSpec spec = small_spec(2, 2, 1);
  DemandLog log;
  log.timestamp = spec.period_start;
  log.lat = spec.lat_max;
  log.lon = spec.lon_max;
  const RasterizeResult r = rasterize({log}, spec, Kind::kPickup);
  CHECK(r.tensor.at(0, 3) == 1);
}

TEST_CASE("rasterize rejects a zero-area bbox") {
  GridSpec spec = small_spec(1, 1, 1);
  spec.lon_max = spec.lon_min;
  CHECK_THROWS_AS(rasterize({}, spec, Kind::kPickup), ConfigError);
}

TEST_CASE("build_graph: 1x1, 2x2, 3x3 lattices") {
  const RegionGraph g1 = build_lattice_graph(1, 1);
  CHECK(g1.n_nodes == 1);
  CHECK(g1.neighbors[0].empty());

  const RegionGraph g2 = build_lattice_graph(2, 2);
  for (int i = 0; i < 4; ++i) CHECK(g2.degree(i) == 3);

  const RegionGraph g3 = build_lattice_graph(3, 3);
  CHECK(g3.degree(4) == 8);  // center
  for (int corner : {0, 2, 6, 8}) CHECK(g3.degree(corner) == 3);
  for (int edge : {1, 3, 5, 7}) CHECK(g3.degree(edge) == 5);
  // hand enumeration of the center's neighbors
  CHECK(g3.neighbors[4] == std::vector<int>{0, 1, 2, 3, 5, 6, 7, 8});
}

TEST_CASE("graph symmetry and neighbor-count formula over a lattice sweep") {
  for (int rows : {1, 2, 3, 5, 17, 64}) {
    for (int cols : {1, 2, 4, 9, 64}) {
      const RegionGraph g = build_lattice_graph(rows, cols);
      REQUIRE(g.n_nodes == rows * cols);
      for (int i = 0; i < g.n_nodes; ++i) {
        const int r = i / cols, c = i % cols;
        const int expect = ((r > 0) + (r < rows - 1) + 1) *
                               ((c > 0) + (c < cols - 1) + 1) - 1;
        CHECK(g.degree(i) == expect);
        CHECK(std::is_sorted(g.neighbors[i].begin(), g.neighbors[i].end()));
        for (int j : g.neighbors[i]) {
          CHECK(j != i);  // no self loops
          CHECK(std::count(g.neighbors[j].begin(), g.neighbors[j].end(), i) == 1);
        }
      }
    }
  }
}

TEST_CASE("temporal_key: Monday midnight reference bits") {
  GridSpec spec = small_spec(1, 1, 48 * 7);
  HolidayCalendar cal;
  const TemporalKey key = temporal_key(0, spec, cal);
  REQUIRE(key.dim() == 57);
  CHECK(key.slot() == 0);
  CHECK(key.day_of_week() == 0);  // Monday
  CHECK_FALSE(key.holiday());
  CHECK_FALSE(key.before_holiday());
}

TEST_CASE("temporal_key: Sunday 23:30 before a Monday holiday") {
  GridSpec spec = small_spec(1, 1, 48 * 8);
  HolidayCalendar cal;
  const std::int64_t monday2 = floor_div(spec.period_start, 86400) + 7;
  cal.days.insert(monday2);
  const int t = 6 * 48 + 47;  // Sunday, last slot of the first week
  const TemporalKey key = temporal_key(t, spec, cal);
  CHECK(key.slot() == 47);
  CHECK(key.day_of_week() == 6);
  CHECK_FALSE(key.holiday());
  CHECK(key.before_holiday());
  // and the holiday interval itself carries the holiday bit
  const TemporalKey hol = temporal_key(7 * 48, spec, cal);
  CHECK(hol.holiday());
}

TEST_CASE("temporal_key block structure holds across a full week") {
  GridSpec spec = small_spec(1, 1, 48 * 7);
  HolidayCalendar cal;
  cal.days.insert(floor_div(spec.period_start, 86400) + 3);
  for (int t = 0; t < 48 * 7; ++t) {
    const TemporalKey key = temporal_key(t, spec, cal);
    int tod_ones = 0, dow_ones = 0;
    for (int i = 0; i < 48; ++i) tod_ones += key.bits[i];
    for (int i = 48; i < 55; ++i) dow_ones += key.bits[i];
    CHECK(tod_ones == 1);
    CHECK(dow_ones == 1);
    CHECK(key.slot() == t % 48);
    CHECK(key.day_of_week() == (t / 48) % 7);
  }
}

TEST_CASE("temporal_key honors the calendar's utc offset") {
  GridSpec spec = small_spec(1, 1, 48);
  HolidayCalendar cal;
  cal.utc_offset = 9 * 3600;  // UTC+9
  const TemporalKey key = temporal_key(0, spec, cal);
  CHECK(key.slot() == 18);  // 09:00 local
}

TEST_CASE("temporal_key rejects interval lengths that do not divide a day") {
  GridSpec spec = small_spec(1, 1, 10);
  spec.interval_len = 1700;
  spec.period_end = spec.period_start + 17000;
  HolidayCalendar cal;
  CHECK_THROWS_AS(temporal_key(0, spec, cal), ConfigError);
}

TEST_CASE("fit_scale and node_features") {
  GridSpec spec = small_spec(1, 2, 4);
  DemandTensor tensor;
  tensor.spec = spec;
  tensor.kind = Kind::kPickup;
  // 4 intervals x 2 cells, row-major by time
  tensor.values = {10, 0, 50, 20, 25, 5, 100, 40};

  SUBCASE("max over the training prefix only") {
    const ScalePolicy policy = fit_scale(tensor, 3);
    CHECK(policy.max_value == 50.0);
    CHECK(policy.apply(25.0) == doctest::Approx(0.5));
  }
  SUBCASE("the worked example: max 100, x 50 -> 0.5") {
    const ScalePolicy policy = fit_scale(tensor, 4);
    CHECK(policy.max_value == 100.0);
    CHECK(policy.apply(50.0) == 0.5);
  }
  SUBCASE("all-zero training data degrades to the identity") {
    DemandTensor zero = tensor;
    std::fill(zero.values.begin(), zero.values.end(), 0u);
    const ScalePolicy policy = fit_scale(zero, 4);
    CHECK(policy.max_value == 1.0);
    CHECK(policy.apply(3.0) == 3.0);
  }
  SUBCASE("window extraction, most recent first") {
    ScalePolicy identity;
    const Tensor w = node_features(tensor, 2, 3, identity);
    REQUIRE(w.rows() == 2);
    REQUIRE(w.cols() == 3);
    // row 0 = cell 0: [x_2, x_1, x_0]
    CHECK(w.at(0, 0) == 25.0);
    CHECK(w.at(0, 1) == 50.0);
    CHECK(w.at(0, 2) == 10.0);
    CHECK(w.at(1, 0) == 5.0);
    CHECK(w.at(1, 1) == 20.0);
    CHECK(w.at(1, 2) == 0.0);
  }
  SUBCASE("window underflow raises") {
    ScalePolicy identity;
    CHECK_THROWS_AS(node_features(tensor, 1, 3, identity), DataError);
  }
  SUBCASE("T=1 equals the tensor row") {
    ScalePolicy identity;
    const Tensor w = node_features(tensor, 3, 1, identity);
    CHECK(w.at(0, 0) == 100.0);
    CHECK(w.at(1, 0) == 40.0);
  }
}

TEST_CASE("node_features matches naive indexing on random (t, T) pairs") {
  GridSpec spec = small_spec(2, 3, 40);
  DemandTensor tensor;
  tensor.spec = spec;
  tensor.kind = Kind::kPickup;
  Rng rng(5);
  tensor.values.resize(40u * 6u);
  for (auto& v : tensor.values) v = static_cast<std::uint32_t>(rng.below(500));
  const ScalePolicy policy = fit_scale(tensor, 30);

  for (int trial = 0; trial < 1000; ++trial) {
    const int window = 1 + static_cast<int>(rng.below(10));
    const int t = window - 1 + static_cast<int>(rng.below(40 - window + 1));
    const Tensor w = node_features(tensor, t, window, policy);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < window; ++j)
        CHECK(w.at(i, j) == tensor.at(t - j, i) / policy.max_value);
  }
}

TEST_CASE("scale round-trip is identity to within one ulp") {
  // x/max*max is not always exactly x in IEEE arithmetic (x=7, max=100 is a
  // counterexample), so the round-trip contract is <= 1 ulp, not bit equality.
  Rng rng(17);
  for (int trial = 0; trial < 5000; ++trial) {
    const double max_v = static_cast<double>(1 + rng.below(3000));
    const double x = static_cast<double>(rng.below(4000));
    ScalePolicy policy;
    policy.max_value = max_v;
    const double back = policy.invert(policy.apply(x));
    CHECK(back == doctest::Approx(x).epsilon(1e-15));
    CHECK(std::abs(back - x) <= std::abs(std::nexttoward(x, 2 * x) - x));
  }
  ScalePolicy policy;
  policy.max_value = 100.0;
  const double y = policy.invert(policy.apply(7.0));
  CHECK(y != 7.0);  // documents the IEEE counterexample
  CHECK(std::nextafter(y, 0.0) == 7.0);
}
