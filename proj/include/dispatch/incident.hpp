#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "dispatch/csv.hpp"
#include "dispatch/geo.hpp"
#include "dispatch/grid.hpp"
#include "dispatch/time_utils.hpp"

namespace dispatch {

struct Incident {
  long long id = 0;
  double occurred_at = 0.0;  // epoch seconds
  LatLon location;
  int grid_id = -1;  // assigned once a grid is known
  std::optional<double> temp_c;
  std::optional<double> rain_mm;
};

// CSV header: id,timestamp,lat,lon[,temp_c,rain_mm]
// Weather columns are optional both per-file and per-row (an empty field
// means missing).  Timestamps must be ISO-8601 and non-decreasing.
inline std::vector<Incident> load_incidents_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw FormatError(path + ": empty incident file");
  std::vector<Incident> out;
  double prev_t = -1e300;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto f = split(lines[i], ',');
    const size_t line_no = i + 1;
    if (f.size() < 4)
      throw FormatError("line " + std::to_string(line_no) +
                        ": expected id,timestamp,lat,lon[,temp_c,rain_mm]");
    Incident inc;
    inc.id = parse_int(f[0], "id", line_no);
    try {
      inc.occurred_at = parse_iso8601(trim(f[1]));
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
    inc.location.lat = parse_double(f[2], "lat", line_no);
    inc.location.lon = parse_double(f[3], "lon", line_no);
    if (f.size() > 4 && !trim(f[4]).empty())
      inc.temp_c = parse_double(f[4], "temp_c", line_no);
    if (f.size() > 5 && !trim(f[5]).empty())
      inc.rain_mm = parse_double(f[5], "rain_mm", line_no);
    if (inc.occurred_at < prev_t)
      throw IntegrityError("line " + std::to_string(line_no) +
                           ": timestamps must be non-decreasing");
    prev_t = inc.occurred_at;
    out.push_back(inc);
  }
  return out;
}

inline void write_incidents_csv(const std::string& path,
                                const std::vector<Incident>& incidents) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "id,timestamp,lat,lon,temp_c,rain_mm\n";
  for (const auto& inc : incidents) {
    out << inc.id << ',' << format_iso8601(inc.occurred_at) << ','
        << format_full(inc.location.lat) << ',' << format_full(inc.location.lon)
        << ',' << (inc.temp_c ? format_full(*inc.temp_c) : std::string())
        << ',' << (inc.rain_mm ? format_full(*inc.rain_mm) : std::string())
        << '\n';
  }
}

inline void assign_grid_cells(std::vector<Incident>& incidents, const Grid& grid) {
  for (auto& inc : incidents) inc.grid_id = grid.cell_of(inc.location);
}

}  // namespace dispatch
