#pragma once

#include <string>
#include <vector>

#include "tgnet/grid.hpp"

namespace tgnet {

// Demand log CSV: header `timestamp,lat,lon,kind`, ISO-8601 UTC timestamps.
std::vector<DemandLog> read_logs_csv(const std::string& path);
void write_logs_csv(const std::string& path,
                    const std::vector<DemandLog>& logs);

// Holiday file: one ISO date per line; blank lines and '#' comments ignored.
HolidayCalendar read_holidays(const std::string& path, int utc_offset);
void write_holidays(const std::string& path,
                    const std::vector<std::int64_t>& days);

// Binary demand tensor, magic "STGD1": u32 P, u32 N, u32 kind, then P*N
// little-endian u32 counts row-major by time. The grid geometry travels in
// the run config, not in this file.
void write_tensor(const std::string& path, const DemandTensor& tensor);
DemandTensor read_tensor(const std::string& path, const GridSpec& spec);

}  // namespace tgnet
