#pragma once

#include <cstdint>
#include <string>

namespace tgnet {

// Days since 1970-01-01 for a proleptic Gregorian date (Howard Hinnant's
// days_from_civil).
std::int64_t days_from_civil(int y, int m, int d);
void civil_from_days(std::int64_t z, int& y, int& m, int& d);

// Floor division (negative-safe).
inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b) != 0 && ((a < 0) != (b < 0))) --q;
  return q;
}

// "YYYY-MM-DDTHH:MM:SSZ" -> UTC epoch seconds. Throws DataError on garbage.
std::int64_t parse_iso8601_utc(const std::string& s);
std::string format_iso8601_utc(std::int64_t t);

// "YYYY-MM-DD" -> day number since epoch.
std::int64_t parse_iso_date(const std::string& s);
std::string format_iso_date(std::int64_t day);

}  // namespace tgnet
