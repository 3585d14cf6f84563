#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dispatch/csv.hpp"
#include "dispatch/geo.hpp"
#include "dispatch/incident.hpp"

namespace dispatch {

enum class ResponderStatus {
  IdleAtDepot,
  EnRouteToIncident,
  Servicing,
  ReturningToDepot,
};

inline const char* to_string(ResponderStatus s) {
  switch (s) {
    case ResponderStatus::IdleAtDepot: return "idle_at_depot";
    case ResponderStatus::EnRouteToIncident: return "en_route";
    case ResponderStatus::Servicing: return "servicing";
    case ResponderStatus::ReturningToDepot: return "returning";
  }
  return "?";
}

// Legal lifecycle: idle -> en-route -> servicing -> returning -> idle,
// with the one shortcut that a returning unit may be dispatched again.
inline bool legal_transition(ResponderStatus from, ResponderStatus to) {
  using S = ResponderStatus;
  switch (from) {
    case S::IdleAtDepot: return to == S::EnRouteToIncident;
    case S::EnRouteToIncident: return to == S::Servicing;
    case S::Servicing: return to == S::ReturningToDepot;
    case S::ReturningToDepot:
      return to == S::IdleAtDepot || to == S::EnRouteToIncident;
  }
  return false;
}

// A responder is dispatchable when idle or heading home.
inline bool status_available(ResponderStatus s) {
  return s == ResponderStatus::IdleAtDepot || s == ResponderStatus::ReturningToDepot;
}

struct Depot {
  int id = -1;
  LatLon location;
  int grid_id = -1;
};

struct Responder {
  int id = -1;
  int depot_id = -1;
  ResponderStatus status = ResponderStatus::IdleAtDepot;
  LatLon location;        // current position (depot when idle)
  double busy_until = 0;  // end of the current leg, bookkeeping only
};

inline bool is_available(const Responder& r) { return status_available(r.status); }

struct Fleet {
  std::vector<Depot> depots;
  std::vector<Responder> responders;
};

// CSV header: id,lat,lon,depot_id — one row per responder, (lat, lon) is the
// home depot location; depots are derived from the distinct depot_ids.
inline Fleet load_fleet_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw FormatError(path + ": empty fleet file");
  Fleet fleet;
  std::map<int, LatLon> depot_pos;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto f = split(lines[i], ',');
    const size_t line_no = i + 1;
    if (f.size() < 4)
      throw FormatError("line " + std::to_string(line_no) +
                        ": expected id,lat,lon,depot_id");
    Responder r;
    r.id = static_cast<int>(parse_int(f[0], "id", line_no));
    r.location.lat = parse_double(f[1], "lat", line_no);
    r.location.lon = parse_double(f[2], "lon", line_no);
    r.depot_id = static_cast<int>(parse_int(f[3], "depot_id", line_no));
    auto it = depot_pos.find(r.depot_id);
    if (it == depot_pos.end()) {
      depot_pos[r.depot_id] = r.location;
    } else if (!(it->second == r.location)) {
      throw IntegrityError("line " + std::to_string(line_no) + ": depot " +
                           std::to_string(r.depot_id) +
                           " listed with inconsistent locations");
    }
    fleet.responders.push_back(r);
  }
  for (const auto& [id, pos] : depot_pos)
    fleet.depots.push_back(Depot{id, pos, -1});
  return fleet;
}

inline void write_fleet_csv(const std::string& path, const Fleet& fleet) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "id,lat,lon,depot_id\n";
  for (const auto& r : fleet.responders)
    out << r.id << ',' << format_full(r.location.lat) << ','
        << format_full(r.location.lon) << ',' << r.depot_id << '\n';
}

// The baseline dispatch rule: straight-line nearest available responder,
// ties to the lowest id.  Returns nothing when every unit is busy.
inline std::optional<int> nearest_euclidean(const std::vector<Responder>& responders,
                                            const LatLon& incident_location) {
  std::optional<int> best;
  double best_d = 0.0;
  for (const auto& r : responders) {
    if (!is_available(r)) continue;
    const double d = euclidean_m(r.location, incident_location);
    if (!best || d < best_d || (d == best_d && r.id < *best)) {
      best = r.id;
      best_d = d;
    }
  }
  return best;
}

inline std::optional<int> nearest_euclidean(const std::vector<Responder>& responders,
                                            const Incident& incident) {
  return nearest_euclidean(responders, incident.location);
}

}  // namespace dispatch
