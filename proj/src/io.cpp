#include "tgnet/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tgnet/error.hpp"
#include "tgnet/time_util.hpp"

namespace tgnet {

namespace {

std::ifstream open_in(const std::string& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) throw DataError("cannot open input file: " + path);
  return in;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) throw DataError("cannot open output file: " + path);
  return out;
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw DataError("truncated tensor file: " + path);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

std::vector<DemandLog> read_logs_csv(const std::string& path) {
  std::ifstream in = open_in(path, std::ios::in);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty log file: " + path);
  // tolerate trailing \r from foreign line endings
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "timestamp,lat,lon,kind")
    throw DataError("bad log CSV header in " + path + ": '" + line + "'");

  std::vector<DemandLog> logs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string ts, lat, lon, kind;
    if (!std::getline(ss, ts, ',') || !std::getline(ss, lat, ',') ||
        !std::getline(ss, lon, ',') || !std::getline(ss, kind))
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected 4 fields");
    DemandLog log;
    try {
      log.timestamp = parse_iso8601_utc(ts);
      log.lat = std::stod(lat);
      log.lon = std::stod(lon);
      log.kind = kind_from_name(kind);
    } catch (const std::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    logs.push_back(log);
  }
  return logs;
}

void write_logs_csv(const std::string& path,
                    const std::vector<DemandLog>& logs) {
  std::ofstream out = open_out(path, std::ios::out);
  out << "timestamp,lat,lon,kind\n";
  char buf[96];
  for (const DemandLog& log : logs) {
    std::snprintf(buf, sizeof(buf), "%s,%.9f,%.9f,%s\n",
                  format_iso8601_utc(log.timestamp).c_str(), log.lat, log.lon,
                  kind_name(log.kind));
    out << buf;
  }
  if (!out) throw DataError("failed writing " + path);
}

HolidayCalendar read_holidays(const std::string& path, int utc_offset) {
  std::ifstream in = open_in(path, std::ios::in);
  HolidayCalendar cal;
  cal.utc_offset = utc_offset;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    try {
      cal.days.insert(parse_iso_date(line));
    } catch (const std::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cal;
}

void write_holidays(const std::string& path,
                    const std::vector<std::int64_t>& days) {
  std::ofstream out = open_out(path, std::ios::out);
  for (std::int64_t d : days) out << format_iso_date(d) << "\n";
  if (!out) throw DataError("failed writing " + path);
}

void write_tensor(const std::string& path, const DemandTensor& tensor) {
  std::ofstream out = open_out(path, std::ios::binary);
  out.write("STGD1", 5);
  put_u32(out, static_cast<std::uint32_t>(tensor.spec.n_intervals()));
  put_u32(out, static_cast<std::uint32_t>(tensor.spec.n_cells()));
  put_u32(out, static_cast<std::uint32_t>(tensor.kind));
  for (std::uint32_t v : tensor.values) put_u32(out, v);
  if (!out) throw DataError("failed writing " + path);
}

DemandTensor read_tensor(const std::string& path, const GridSpec& spec) {
  std::ifstream in = open_in(path, std::ios::binary);
  char magic[5];
  if (!in.read(magic, 5) || std::memcmp(magic, "STGD1", 5) != 0)
    throw DataError("not a demand tensor file: " + path);
  const std::uint32_t p = get_u32(in, path);
  const std::uint32_t n = get_u32(in, path);
  const std::uint32_t kind = get_u32(in, path);
  if (kind > 1) throw DataError("bad tensor kind in " + path);
  if (p != static_cast<std::uint32_t>(spec.n_intervals()) ||
      n != static_cast<std::uint32_t>(spec.n_cells()))
    throw DataError("tensor dims in " + path +
                    " do not match the configured grid");
  DemandTensor tensor;
  tensor.spec = spec;
  tensor.kind = static_cast<Kind>(kind);
  tensor.values.resize(static_cast<std::size_t>(p) * n);
  for (std::uint32_t& v : tensor.values) v = get_u32(in, path);
  return tensor;
}

}  // namespace tgnet
