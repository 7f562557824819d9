#include "tgnet/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include "tgnet/error.hpp"
#include "tgnet/rng.hpp"
#include "tgnet/time_util.hpp"

namespace tgnet {

void SynthConfig::validate() const {
  if (rows < 1 || cols < 1) throw ConfigError("synth grid dims must be >= 1");
  if (n_days < 1) throw ConfigError("n_days must be >= 1");
  if (interval_len <= 0 || 86400 % interval_len != 0)
    throw ConfigError("interval_len must divide 86400");
  if (base_rate < 0.0) throw ConfigError("base_rate must be >= 0");
  if (!region_base.empty() &&
      region_base.size() != static_cast<std::size_t>(rows) * cols)
    throw ConfigError("region_base must have one entry per cell");
  for (double r : region_base)
    if (r < 0.0) throw ConfigError("region rates must be >= 0");
  if (!daily_profile.empty() &&
      daily_profile.size() != static_cast<std::size_t>(slots()))
    throw ConfigError("daily_profile must have one entry per slot");
  if (dropoff_lag < 0) throw ConfigError("dropoff_lag must be >= 0");
  const int p = n_days * slots();
  for (const SynthEvent& e : events) {
    if (e.cell < 0 || e.cell >= rows * cols)
      throw ConfigError("event cell outside grid");
    if (e.start < 0 || e.duration < 1 || e.start + e.duration > p)
      throw ConfigError("event outside period");
    if (e.magnitude < 0.0) throw ConfigError("event magnitude must be >= 0");
  }
}

GridSpec SynthConfig::grid_spec() const {
  GridSpec spec;
  spec.lat_min = lat_min;
  spec.lat_max = lat_max;
  spec.lon_min = lon_min;
  spec.lon_max = lon_max;
  spec.rows = rows;
  spec.cols = cols;
  spec.interval_len = interval_len;
  spec.period_start = period_start;
  spec.period_end = period_start + static_cast<std::int64_t>(n_days) * 86400;
  return spec;
}

HolidayCalendar SynthConfig::calendar() const {
  HolidayCalendar cal;
  cal.utc_offset = utc_offset;
  cal.days.insert(holidays.begin(), holidays.end());
  return cal;
}

double SynthConfig::base_field(int cell) const {
  const int r = cell / cols;
  const int c = cell % cols;
  double factor = 1.0;
  for (const Hotspot& h : hotspots) {
    const double dr = r - h.row;
    const double dc = c - h.col;
    factor += h.intensity *
              std::exp(-(dr * dr + dc * dc) / (2.0 * h.radius * h.radius));
  }
  const double base = region_base.empty() ? base_rate : region_base[cell];
  return base * factor;
}

namespace {

struct IntervalContext {
  double profile = 1.0;
  double day_mult = 1.0;
  int slot = 0;
  int day_type = 0;  // 0 workday, 1 weekend-or-holiday
};

IntervalContext interval_context(const SynthConfig& cfg, int t) {
  IntervalContext ctx;
  const std::int64_t local =
      cfg.period_start + static_cast<std::int64_t>(t) * cfg.interval_len +
      cfg.utc_offset;
  const std::int64_t day = floor_div(local, 86400);
  ctx.slot = static_cast<int>((local - day * 86400) / cfg.interval_len);
  ctx.profile = cfg.daily_profile.empty() ? 1.0 : cfg.daily_profile[ctx.slot];
  const int dow = static_cast<int>(((day % 7) + 7 + 3) % 7);  // Monday = 0
  const bool holiday =
      std::find(cfg.holidays.begin(), cfg.holidays.end(), day) !=
      cfg.holidays.end();
  if (holiday) {
    ctx.day_mult = cfg.holiday_mult;
    ctx.day_type = 1;
  } else if (dow >= 5) {
    ctx.day_mult = cfg.weekend_mult;
    ctx.day_type = 1;
  } else {
    ctx.day_mult = cfg.weekday_mult;
    ctx.day_type = 0;
  }
  return ctx;
}

double event_boost(const SynthConfig& cfg, int cell, int t) {
  double boost = 0.0;
  for (const SynthEvent& e : cfg.events)
    if (e.cell == cell && t >= e.start && t < e.start + e.duration)
      boost += e.magnitude;
  return boost;
}

}  // namespace

double SynthConfig::rate_pickup(int cell, int t) const {
  const IntervalContext ctx = interval_context(*this, t);
  return base_field(cell) * ctx.profile * ctx.day_mult + event_boost(*this, cell, t);
}

double SynthConfig::rate_dropoff(int cell, int t) const {
  const IntervalContext ctx = interval_context(*this, t);
  // The surge shows up `dropoff_lag` intervals before the pickup surge.
  const int shifted = t + dropoff_lag;
  const double boost =
      shifted < n_days * slots() ? event_boost(*this, cell, shifted) : 0.0;
  return dropoff_base_scale * base_field(cell) * ctx.profile * ctx.day_mult +
         dropoff_coupling * boost;
}

double SynthConfig::expected_mean() const {
  const int p = n_days * slots();
  const int n = rows * cols;
  double acc = 0.0;
  for (int t = 0; t < p; ++t)
    for (int cell = 0; cell < n; ++cell) acc += rate_pickup(cell, t);
  return acc / (static_cast<double>(p) * n);
}

SynthOutput generate(const SynthConfig& cfg) {
  cfg.validate();
  const GridSpec spec = cfg.grid_spec();
  const int p = spec.n_intervals();
  const int n = spec.n_cells();

  SynthOutput out;
  out.pickup.spec = spec;
  out.pickup.kind = Kind::kPickup;
  out.pickup.values.assign(static_cast<std::size_t>(p) * n, 0);
  out.dropoff.spec = spec;
  out.dropoff.kind = Kind::kDropoff;
  out.dropoff.values.assign(static_cast<std::size_t>(p) * n, 0);
  out.labels.event_mask.assign(static_cast<std::size_t>(p) * n, 0);
  out.labels.context_slot.resize(p);
  out.labels.context_day_type.resize(p);

  for (int t = 0; t < p; ++t) {
    const IntervalContext ctx = interval_context(cfg, t);
    out.labels.context_slot[t] = ctx.slot;
    out.labels.context_day_type[t] = ctx.day_type;
  }

  // Per-cell substreams keep generation order-independent across cells.
  for (int cell = 0; cell < n; ++cell) {
    Rng pickup_rng(Rng::mix(cfg.seed, 2 * static_cast<std::uint64_t>(cell)));
    Rng dropoff_rng(
        Rng::mix(cfg.seed, 2 * static_cast<std::uint64_t>(cell) + 1));
    for (int t = 0; t < p; ++t) {
      const double lp = cfg.rate_pickup(cell, t);
      const double ld = cfg.rate_dropoff(cell, t);
      if (cfg.deterministic) {
        out.pickup.at(t, cell) = static_cast<std::uint32_t>(std::llround(lp));
        out.dropoff.at(t, cell) = static_cast<std::uint32_t>(std::llround(ld));
      } else {
        out.pickup.at(t, cell) = pickup_rng.poisson(lp);
        out.dropoff.at(t, cell) = dropoff_rng.poisson(ld);
      }
      if (event_boost(cfg, cell, t) > 0.0)
        out.labels.event_mask[static_cast<std::size_t>(t) * n + cell] = 1;
    }
  }
  return out;
}

std::vector<DemandLog> export_logs(const DemandTensor& tensor,
                                   std::uint64_t seed) {
  const GridSpec& spec = tensor.spec;
  const int p = spec.n_intervals();
  const int n = spec.n_cells();
  const double cell_h = (spec.lat_max - spec.lat_min) / spec.rows;
  const double cell_w = (spec.lon_max - spec.lon_min) / spec.cols;

  std::vector<DemandLog> logs;
  logs.reserve(tensor.total());
  Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(tensor.kind) + 0x51ULL));
  for (int t = 0; t < p; ++t) {
    for (int cell = 0; cell < n; ++cell) {
      const int r = cell / spec.cols;
      const int c = cell % spec.cols;
      const std::uint32_t count = tensor.at(t, cell);
      for (std::uint32_t j = 0; j < count; ++j) {
        DemandLog log;
        log.timestamp = spec.period_start +
                        static_cast<std::int64_t>(t) * spec.interval_len +
                        static_cast<std::int64_t>(
                            rng.below(static_cast<std::uint64_t>(spec.interval_len)));
        // keep a margin from the cell borders so rasterization is exact
        log.lat = spec.lat_min + (r + rng.uniform(0.02, 0.98)) * cell_h;
        log.lon = spec.lon_min + (c + rng.uniform(0.02, 0.98)) * cell_w;
        log.kind = tensor.kind;
        logs.push_back(log);
      }
    }
  }
  return logs;
}

nlohmann::json SynthConfig::to_json() const {
  nlohmann::json hs = nlohmann::json::array();
  for (const Hotspot& h : hotspots)
    hs.push_back({{"row", h.row},
                  {"col", h.col},
                  {"radius", h.radius},
                  {"intensity", h.intensity}});
  nlohmann::json ev = nlohmann::json::array();
  for (const SynthEvent& e : events)
    ev.push_back({{"cell", e.cell},
                  {"start", e.start},
                  {"duration", e.duration},
                  {"magnitude", e.magnitude}});
  nlohmann::json hol = nlohmann::json::array();
  for (std::int64_t d : holidays) hol.push_back(format_iso_date(d));
  return {{"rows", rows},
          {"cols", cols},
          {"n_days", n_days},
          {"interval_len", interval_len},
          {"base_rate", base_rate},
          {"region_base", region_base},
          {"daily_profile", daily_profile},
          {"weekday_mult", weekday_mult},
          {"weekend_mult", weekend_mult},
          {"holiday_mult", holiday_mult},
          {"hotspots", hs},
          {"events", ev},
          {"dropoff_lag", dropoff_lag},
          {"dropoff_coupling", dropoff_coupling},
          {"dropoff_base_scale", dropoff_base_scale},
          {"deterministic", deterministic},
          {"seed", seed},
          {"holidays", hol},
          {"utc_offset", utc_offset},
          {"period_start", format_iso8601_utc(period_start)},
          {"bbox", {lat_min, lat_max, lon_min, lon_max}}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.rows = j.value("rows", c.rows);
  c.cols = j.value("cols", c.cols);
  c.n_days = j.value("n_days", c.n_days);
  c.interval_len = j.value("interval_len", c.interval_len);
  c.base_rate = j.value("base_rate", c.base_rate);
  c.region_base = j.value("region_base", c.region_base);
  c.daily_profile = j.value("daily_profile", c.daily_profile);
  c.weekday_mult = j.value("weekday_mult", c.weekday_mult);
  c.weekend_mult = j.value("weekend_mult", c.weekend_mult);
  c.holiday_mult = j.value("holiday_mult", c.holiday_mult);
  if (j.contains("hotspots")) {
    for (const auto& h : j.at("hotspots")) {
      Hotspot hs;
      hs.row = h.value("row", 0.0);
      hs.col = h.value("col", 0.0);
      hs.radius = h.value("radius", 1.0);
      hs.intensity = h.value("intensity", 1.0);
      c.hotspots.push_back(hs);
    }
  }
  if (j.contains("events")) {
    for (const auto& e : j.at("events")) {
      SynthEvent ev;
      ev.cell = e.value("cell", 0);
      ev.start = e.value("start", 0);
      ev.duration = e.value("duration", 1);
      ev.magnitude = e.value("magnitude", 0.0);
      c.events.push_back(ev);
    }
  }
  c.dropoff_lag = j.value("dropoff_lag", c.dropoff_lag);
  c.dropoff_coupling = j.value("dropoff_coupling", c.dropoff_coupling);
  c.dropoff_base_scale = j.value("dropoff_base_scale", c.dropoff_base_scale);
  c.deterministic = j.value("deterministic", c.deterministic);
  c.seed = j.value("seed", c.seed);
  if (j.contains("holidays"))
    for (const auto& d : j.at("holidays"))
      c.holidays.push_back(parse_iso_date(d.get<std::string>()));
  c.utc_offset = j.value("utc_offset", c.utc_offset);
  if (j.contains("period_start"))
    c.period_start = parse_iso8601_utc(j.at("period_start").get<std::string>());
  if (j.contains("bbox")) {
    const auto& b = j.at("bbox");
    c.lat_min = b.at(0).get<double>();
    c.lat_max = b.at(1).get<double>();
    c.lon_min = b.at(2).get<double>();
    c.lon_max = b.at(3).get<double>();
  }
  c.validate();
  return c;
}

namespace {

// Two-peak commute profile normalized to mean 1 over the day.
std::vector<double> commute_profile(int slots) {
  std::vector<double> profile(slots);
  double mean = 0.0;
  for (int s = 0; s < slots; ++s) {
    const double x = static_cast<double>(s) * 48.0 / slots;  // 30-min units
    const double morning = std::exp(-(x - 17.0) * (x - 17.0) / 18.0);
    const double evening = std::exp(-(x - 37.0) * (x - 37.0) / 32.0);
    profile[s] = 0.25 + 1.3 * morning + 1.1 * evening;
    mean += profile[s];
  }
  mean /= slots;
  for (double& v : profile) v /= mean;
  return profile;
}

}  // namespace

SynthConfig SynthConfig::nyc_taxi_like(std::uint64_t seed) {
  SynthConfig c;
  c.rows = 10;
  c.cols = 20;
  c.n_days = 14;
  c.seed = seed;
  c.daily_profile = commute_profile(c.slots());
  c.weekend_mult = 0.75;
  c.holiday_mult = 0.75;
  c.hotspots = {{4.5, 9.5, 3.0, 4.0}, {2.0, 4.0, 2.0, 2.0}, {7.0, 15.0, 2.0, 2.5}};
  c.holidays = {floor_div(c.period_start, 86400) + 8};
  c.dropoff_lag = 2;
  c.dropoff_coupling = 0.8;

  // Calibrate the base so the overall mean lands on the NYC-taxi figure.
  c.base_rate = 1.0;
  const double target_mean = 38.8;
  c.base_rate = target_mean / c.expected_mean();

  // A few strong surges on top (peaks comparable to the real maxima).
  Rng rng(Rng::mix(seed, 0xe7e2ULL));
  const int p = c.n_days * c.slots();
  for (int i = 0; i < 6; ++i) {
    SynthEvent e;
    e.cell = static_cast<int>(rng.below(static_cast<std::uint64_t>(c.rows * c.cols)));
    e.duration = 3 + static_cast<int>(rng.below(3));
    e.start = static_cast<int>(rng.below(static_cast<std::uint64_t>(p - e.duration)));
    e.magnitude = rng.uniform(250.0, 600.0);
    c.events.push_back(e);
  }
  return c;
}

SynthConfig SynthConfig::context_events_small(std::uint64_t seed) {
  SynthConfig c;
  c.rows = 4;
  c.cols = 4;
  c.n_days = 28;
  c.seed = seed;
  c.base_rate = 40.0;
  c.daily_profile = commute_profile(c.slots());
  // Slot-to-slot factors the history window cannot extrapolate; the calendar
  // key identifies the slot, so context-aware models can learn them exactly.
  {
    Rng slot_rng(0x510743);
    double mean = 0.0;
    for (double& v : c.daily_profile) {
      v *= slot_rng.uniform(0.55, 1.45);
      mean += v;
    }
    mean /= static_cast<double>(c.daily_profile.size());
    for (double& v : c.daily_profile) v /= mean;
  }
  c.weekend_mult = 0.35;
  c.holiday_mult = 0.35;
  c.hotspots = {{1.0, 1.0, 1.5, 1.5}, {2.5, 3.0, 1.2, 0.8}};
  c.holidays = {floor_div(c.period_start, 86400) + 9,
                floor_div(c.period_start, 86400) + 16};
  c.dropoff_lag = 2;
  c.dropoff_coupling = 1.0;
  c.dropoff_base_scale = 0.9;

  // One surge per day at a seeded cell and hour.
  Rng rng(Rng::mix(seed, 0xc0ffeeULL));
  for (int d = 0; d < c.n_days; ++d) {
    SynthEvent e;
    e.cell = static_cast<int>(rng.below(static_cast<std::uint64_t>(c.rows * c.cols)));
    e.duration = 4;
    const int slot = 20 + static_cast<int>(rng.below(20));  // daytime/evening
    e.start = d * c.slots() + slot;
    e.magnitude = rng.uniform(200.0, 320.0);
    c.events.push_back(e);
  }
  return c;
}

}  // namespace tgnet
