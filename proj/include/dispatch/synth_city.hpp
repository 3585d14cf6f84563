#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dispatch/chain_gen.hpp"
#include "dispatch/fleet.hpp"
#include "dispatch/grid.hpp"
#include "dispatch/incident.hpp"
#include "dispatch/road_graph.hpp"
#include "dispatch/speed_model.hpp"
#include "dispatch/survival.hpp"
#include "dispatch/time_utils.hpp"

// Synthetic city builder: a seeded road network, rush-hour speed history, a
// ground-truth inter-arrival model, a fleet, and an incident log drawn from
// that model.  Everything downstream (fitting, routing, planning, replay) can
// then be validated against known ground truth.

namespace dispatch {

struct CityConfig {
  double min_lat = 36.0;
  double min_lon = -87.0;
  double width_m = 8000.0;
  double height_m = 8000.0;
  double cell_size_m = kMetersPerMile;

  // road network
  int nodes = 300;
  int knn = 4;                 // undirected edges per node before repair
  double detour_factor = 1.2;  // road length over straight-line distance
  double min_speed_mph = 25.0;
  double max_speed_mph = 45.0;
  // one node per cell centroid, every pair connected, uniform speed — a
  // geometry where straight-line and on-road rankings provably agree
  bool complete_centroid_graph = false;

  // rush-hour speed history (skipped when amplitude is zero)
  double speed_amplitude = 0.35;  // peak fractional slowdown
  int speed_weeks = 2;

  // fleet
  int depots = 3;
  int responders = 6;

  // incident stream
  std::string start = "2025-01-05T00:00:00Z";  // a Monday
  double horizon_days = 28.0;
  double target_mean_gap_hours = 36.0;  // per-cell inter-arrival scale

  uint64_t seed = 1;
};

struct SynthCity {
  BoundingBox region;
  Grid grid;
  RoadGraph graph;
  SpeedProfiles profiles;
  std::vector<SpeedObservation> speed_obs;
  Fleet fleet;
  std::vector<Incident> incidents;
  SurvivalModel truth;
  double start_epoch = 0.0;
  double end_epoch = 0.0;
};

namespace synth_detail {

// The time-of-day and season one-hot groups each sum to the intercept column,
// so coefficient vectors are identifiable only up to shifts along
//   v1 = (1 on tod, -1 on intercept),  v2 = (1 on season, -1 on intercept).
// Gradient ascent started at zero converges to the representative orthogonal
// to both; project the generating coefficients onto that same representative
// so a refit can be compared to them componentwise.
inline std::vector<double> project_identifiable(std::vector<double> beta) {
  using S = FeatureSchema;
  auto dot1 = [&](const std::vector<double>& b) {
    double s = 0.0;
    for (int j = 0; j < 6; ++j) s += b[static_cast<size_t>(S::kTod0 + j)];
    return s - b[S::kIntercept];
  };
  auto dot2 = [&](const std::vector<double>& b) {
    double s = 0.0;
    for (int j = 0; j < 4; ++j) s += b[static_cast<size_t>(S::kSeason0 + j)];
    return s - b[S::kIntercept];
  };
  // Gram matrix of {v1, v2} is [[7, 1], [1, 5]]
  const double r1 = dot1(beta), r2 = dot2(beta);
  const double a1 = (5.0 * r1 - r2) / 34.0;
  const double a2 = (7.0 * r2 - r1) / 34.0;
  for (int j = 0; j < 6; ++j) beta[static_cast<size_t>(S::kTod0 + j)] -= a1;
  for (int j = 0; j < 4; ++j) beta[static_cast<size_t>(S::kSeason0 + j)] -= a2;
  beta[S::kIntercept] += a1 + a2;
  return beta;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[static_cast<size_t>(x)] != x) {
      parent[static_cast<size_t>(x)] =
          parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
      x = parent[static_cast<size_t>(x)];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[static_cast<size_t>(a)] = b;
    return true;
  }
};

// Fractional slowdown at time t: weekday commute peaks at 08:00 and 17:30.
inline double rush_factor(double t) {
  if (is_weekend(t)) return 0.25;
  const double hour = std::fmod(weekly_minute(t), 1440.0) / 60.0;
  const double morning = std::exp(-0.5 * std::pow((hour - 8.0) / 1.3, 2));
  const double evening = std::exp(-0.5 * std::pow((hour - 17.5) / 1.5, 2));
  return std::min(1.0, morning + evening);
}

}  // namespace synth_detail

inline SurvivalModel make_truth_model(const CityConfig& cfg) {
  const FeatureSchema schema = FeatureSchema::standard();
  Rng rng(derive_seed(cfg.seed, "truth"));
  std::vector<double> beta(schema.names().size(), 0.0);
  using S = FeatureSchema;
  for (int j = 0; j < 6; ++j)
    beta[static_cast<size_t>(S::kTod0 + j)] = rng.uniform(-0.25, 0.25);
  beta[S::kWeekend] = rng.uniform(-0.2, 0.2);
  for (int j = 0; j < 4; ++j)
    beta[static_cast<size_t>(S::kSeason0 + j)] = rng.uniform(-0.2, 0.2);
  beta[S::kTempC] = rng.uniform(-0.02, 0.02);
  beta[S::kRainMm] = rng.uniform(-0.03, 0.0);
  // Mild self-excitation: recent activity shortens the next gap.  Counts are
  // raw, so the per-window magnitude must shrink with the window (and with
  // the 8-cell neighborhood) to keep the feedback loop subcritical.
  const double cell_scale[3] = {0.02, 0.008, 0.002};
  for (int j = 0; j < 3; ++j) {
    beta[static_cast<size_t>(S::kCountCell2d + j)] =
        -rng.uniform(0.0, cell_scale[j]);
    beta[static_cast<size_t>(S::kCountNbr2d + j)] =
        -rng.uniform(0.0, cell_scale[j] / 8.0);
  }
  beta[S::kIntercept] = std::log(cfg.target_mean_gap_hours);

  SurvivalModel m;
  m.feature_names = schema.names();
  m.beta = synth_detail::project_identifiable(std::move(beta));
  return m;
}

inline RoadGraph make_road_graph(const CityConfig& cfg, const Grid& grid) {
  std::vector<std::string> lines;
  lines.push_back("nodes");

  if (cfg.complete_centroid_graph) {
    for (int g = 0; g < grid.size(); ++g) {
      const LatLon c = grid.cell(g).centroid;
      lines.push_back(std::to_string(g) + ' ' + format_full(c.lat) + ' ' +
                      format_full(c.lon));
    }
    lines.push_back("edges");
    const double speed = 0.5 * (cfg.min_speed_mph + cfg.max_speed_mph);
    int seg = 0;
    for (int i = 0; i < grid.size(); ++i)
      for (int j = i + 1; j < grid.size(); ++j) {
        const double len =
            euclidean_m(grid.cell(i).centroid, grid.cell(j).centroid);
        const std::string tail = ' ' + format_full(len) + " 2 " +
                                 format_full(speed) + ' ' + std::to_string(seg);
        lines.push_back(std::to_string(i) + ' ' + std::to_string(j) + tail);
        lines.push_back(std::to_string(j) + ' ' + std::to_string(i) + tail);
        ++seg;
      }
    return RoadGraph::parse(lines, "synthetic city");
  }

  Rng rng(derive_seed(cfg.seed, "roads"));
  const BoundingBox& box = grid.region();
  std::vector<LatLon> pts;
  pts.reserve(static_cast<size_t>(cfg.nodes));
  for (int i = 0; i < cfg.nodes; ++i) {
    LatLon p;
    p.lat = rng.uniform(box.min_lat, box.max_lat);
    p.lon = rng.uniform(box.min_lon, box.max_lon);
    pts.push_back(p);
    lines.push_back(std::to_string(i) + ' ' + format_full(p.lat) + ' ' +
                    format_full(p.lon));
  }

  std::set<std::pair<int, int>> pairs;  // undirected, first < second
  auto link = [&](int a, int b) {
    pairs.insert({std::min(a, b), std::max(a, b)});
  };
  for (int i = 0; i < cfg.nodes; ++i) {
    std::vector<std::pair<double, int>> near;
    for (int j = 0; j < cfg.nodes; ++j)
      if (j != i) near.emplace_back(euclidean_m(pts[static_cast<size_t>(i)],
                                                pts[static_cast<size_t>(j)]),
                                    j);
    std::sort(near.begin(), near.end());
    for (int k = 0; k < cfg.knn && k < static_cast<int>(near.size()); ++k)
      link(i, near[static_cast<size_t>(k)].second);
  }

  // stitch disconnected components with their closest cross pair
  synth_detail::UnionFind uf(cfg.nodes);
  for (const auto& [a, b] : pairs) uf.unite(a, b);
  for (;;) {
    double best = std::numeric_limits<double>::infinity();
    std::pair<int, int> best_pair{-1, -1};
    for (int i = 0; i < cfg.nodes; ++i)
      for (int j = i + 1; j < cfg.nodes; ++j) {
        if (uf.find(i) == uf.find(j)) continue;
        const double d = euclidean_m(pts[static_cast<size_t>(i)],
                                     pts[static_cast<size_t>(j)]);
        if (d < best) {
          best = d;
          best_pair = {i, j};
        }
      }
    if (best_pair.first < 0) break;
    link(best_pair.first, best_pair.second);
    uf.unite(best_pair.first, best_pair.second);
  }

  lines.push_back("edges");
  int seg = 0;
  for (const auto& [a, b] : pairs) {
    const double len = cfg.detour_factor *
                       std::max(1.0, euclidean_m(pts[static_cast<size_t>(a)],
                                                 pts[static_cast<size_t>(b)]));
    const double speed = rng.uniform(cfg.min_speed_mph, cfg.max_speed_mph);
    const std::string tail = ' ' + format_full(len) + " 2 " +
                             format_full(speed) + ' ' + std::to_string(seg);
    lines.push_back(std::to_string(a) + ' ' + std::to_string(b) + tail);
    lines.push_back(std::to_string(b) + ' ' + std::to_string(a) + tail);
    ++seg;
  }
  return RoadGraph::parse(lines, "synthetic city");
}

inline std::vector<SpeedObservation> make_speed_history(const CityConfig& cfg,
                                                        const RoadGraph& graph,
                                                        double start_epoch) {
  std::vector<SpeedObservation> obs;
  if (cfg.speed_amplitude <= 0.0) return obs;
  Rng rng(derive_seed(cfg.seed, "speeds"));
  std::set<int> segments;
  for (const auto& e : graph.edges()) segments.insert(e.segment_id);
  const int bins = cfg.speed_weeks * 7 * 48;
  for (int seg : segments) {
    const double ff = graph.segment_freeflow().at(seg);
    for (int b = 0; b < bins; ++b) {
      const double t = start_epoch + (b + 0.5) * 1800.0;
      const double slow =
          cfg.speed_amplitude * synth_detail::rush_factor(t) + rng.uniform(-0.03, 0.03);
      SpeedObservation o;
      o.segment_id = seg;
      o.timestamp = t;
      o.speed_mph = std::max(3.0, ff * (1.0 - std::clamp(slow, 0.0, 0.9)));
      obs.push_back(o);
    }
  }
  return obs;
}

inline Fleet make_fleet(const CityConfig& cfg, const Grid& grid) {
  Rng rng(derive_seed(cfg.seed, "fleet"));
  std::vector<int> cells(static_cast<size_t>(grid.size()));
  std::iota(cells.begin(), cells.end(), 0);
  for (size_t i = cells.size(); i > 1; --i)
    std::swap(cells[i - 1],
              cells[static_cast<size_t>(
                  rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);

  Fleet fleet;
  const int n_dep = std::min(cfg.depots, grid.size());
  for (int d = 0; d < n_dep; ++d) {
    Depot dep;
    dep.id = d;
    dep.grid_id = cells[static_cast<size_t>(d)];
    dep.location = grid.cell(dep.grid_id).centroid;
    fleet.depots.push_back(dep);
  }
  for (int r = 0; r < cfg.responders; ++r) {
    Responder u;
    u.id = r;
    u.depot_id = r % n_dep;
    u.location = fleet.depots[static_cast<size_t>(u.depot_id)].location;
    u.status = ResponderStatus::IdleAtDepot;
    fleet.responders.push_back(u);
  }
  return fleet;
}

// Day-by-day draw from the ground-truth model.  Each day gets one weather
// reading; count features carry across days through the shared tracker, so
// the log's self-excitation matches what a refit will assume.
inline std::vector<Incident> make_incident_log(const CityConfig& cfg,
                                               const Grid& grid,
                                               const SurvivalModel& truth,
                                               double start_epoch) {
  Rng wrng(derive_seed(cfg.seed, "weather"));
  GeneratorContext ctx;
  ctx.grid = &grid;
  ctx.model = &truth;
  ctx.counts = IncidentCountTracker(grid.size());

  std::vector<Incident> log;
  long long next_id = 1;
  const int days = static_cast<int>(std::ceil(cfg.horizon_days));
  for (int d = 0; d < days; ++d) {
    const double day_start = start_epoch + d * static_cast<double>(kSecondsPerDay);
    const double span = std::min(1.0, cfg.horizon_days - d) * kSecondsPerDay;
    const auto civil = civil_from_epoch(day_start);
    const double doy_phase =
        2.0 * kPi * ((civil.month - 1) * 30.4 + civil.day - 15.0) / 365.0;
    Weather w;
    w.temp_c = 15.0 - 12.0 * std::cos(doy_phase) + wrng.uniform(-3.0, 3.0);
    w.rain_mm = wrng.uniform01() < 0.25 ? wrng.exponential(5.0) : 0.0;
    ctx.weather = w;

    const IncidentChain day =
        generate_chain(ctx, day_start, span, derive_seed(cfg.seed, "day", d));
    for (const auto& ev : day.events) {
      Incident inc;
      inc.id = next_id++;
      inc.occurred_at = ev.occurred_at;
      inc.location = ev.location;
      inc.grid_id = ev.grid_id;
      inc.temp_c = w.temp_c;
      inc.rain_mm = w.rain_mm;
      log.push_back(inc);
      ctx.counts.push(ev.grid_id, ev.occurred_at);
    }
  }
  return log;
}

inline SynthCity generate_city(const CityConfig& cfg) {
  SynthCity city;
  city.region = bbox_from_extent(cfg.min_lat, cfg.min_lon, cfg.width_m, cfg.height_m);
  city.grid = Grid::build(city.region, cfg.cell_size_m);
  city.graph = make_road_graph(cfg, city.grid);
  city.start_epoch = parse_iso8601(cfg.start);
  city.end_epoch = city.start_epoch + cfg.horizon_days * kSecondsPerDay;
  city.speed_obs = make_speed_history(cfg, city.graph, city.start_epoch);
  city.profiles = city.speed_obs.empty()
                      ? SpeedProfiles::empty_for(city.graph)
                      : SpeedProfiles::fit(city.speed_obs, city.graph);
  city.fleet = make_fleet(cfg, city.grid);
  city.truth = make_truth_model(cfg);
  city.incidents = make_incident_log(cfg, city.grid, city.truth, city.start_epoch);
  return city;
}

inline nlohmann::json city_config_json(const CityConfig& cfg) {
  nlohmann::json j;
  j["region"] = {{"min_lat", cfg.min_lat},
                 {"min_lon", cfg.min_lon},
                 {"width_m", cfg.width_m},
                 {"height_m", cfg.height_m},
                 {"cell_size_m", cfg.cell_size_m}};
  j["roads"] = {{"nodes", cfg.nodes},
                {"knn", cfg.knn},
                {"detour_factor", cfg.detour_factor},
                {"min_speed_mph", cfg.min_speed_mph},
                {"max_speed_mph", cfg.max_speed_mph},
                {"complete_centroid_graph", cfg.complete_centroid_graph}};
  j["speeds"] = {{"amplitude", cfg.speed_amplitude}, {"weeks", cfg.speed_weeks}};
  j["fleet"] = {{"depots", cfg.depots}, {"responders", cfg.responders}};
  j["incidents"] = {{"start", cfg.start},
                    {"horizon_days", cfg.horizon_days},
                    {"target_mean_gap_hours", cfg.target_mean_gap_hours}};
  j["seed"] = cfg.seed;
  return j;
}

inline CityConfig city_config_from_json(const nlohmann::json& j) {
  CityConfig cfg;
  if (j.contains("region")) {
    const auto& r = j.at("region");
    cfg.min_lat = r.value("min_lat", cfg.min_lat);
    cfg.min_lon = r.value("min_lon", cfg.min_lon);
    cfg.width_m = r.value("width_m", cfg.width_m);
    cfg.height_m = r.value("height_m", cfg.height_m);
    cfg.cell_size_m = r.value("cell_size_m", cfg.cell_size_m);
  }
  if (j.contains("roads")) {
    const auto& r = j.at("roads");
    cfg.nodes = r.value("nodes", cfg.nodes);
    cfg.knn = r.value("knn", cfg.knn);
    cfg.detour_factor = r.value("detour_factor", cfg.detour_factor);
    cfg.min_speed_mph = r.value("min_speed_mph", cfg.min_speed_mph);
    cfg.max_speed_mph = r.value("max_speed_mph", cfg.max_speed_mph);
    cfg.complete_centroid_graph =
        r.value("complete_centroid_graph", cfg.complete_centroid_graph);
  }
  if (j.contains("speeds")) {
    const auto& s = j.at("speeds");
    cfg.speed_amplitude = s.value("amplitude", cfg.speed_amplitude);
    cfg.speed_weeks = s.value("weeks", cfg.speed_weeks);
  }
  if (j.contains("fleet")) {
    const auto& f = j.at("fleet");
    cfg.depots = f.value("depots", cfg.depots);
    cfg.responders = f.value("responders", cfg.responders);
  }
  if (j.contains("incidents")) {
    const auto& i = j.at("incidents");
    cfg.start = i.value("start", cfg.start);
    cfg.horizon_days = i.value("horizon_days", cfg.horizon_days);
    cfg.target_mean_gap_hours =
        i.value("target_mean_gap_hours", cfg.target_mean_gap_hours);
  }
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

// Persist every artifact the pipeline consumes plus a manifest describing the
// generation.  Re-running with the same config yields byte-identical files.
inline void save_city(const SynthCity& city, const CityConfig& cfg,
                      const std::string& dir) {
  city.graph.save(dir + "/roads.txt");
  write_fleet_csv(dir + "/fleet.csv", city.fleet);
  write_incidents_csv(dir + "/incidents.csv", city.incidents);
  save_model(dir + "/truth.model", city.truth);
  {
    std::ofstream out(dir + "/speeds.csv");
    if (!out) throw FormatError("cannot write " + dir + "/speeds.csv");
    out << "segment_id,timestamp,speed_mph\n";
    for (const auto& o : city.speed_obs)
      out << o.segment_id << ',' << format_iso8601(o.timestamp) << ','
          << format_full(o.speed_mph) << '\n';
  }
  nlohmann::json manifest;
  manifest["config"] = city_config_json(cfg);
  manifest["counts"] = {{"grid_cells", city.grid.size()},
                        {"road_nodes", city.graph.node_count()},
                        {"road_edges", city.graph.edges().size()},
                        {"speed_observations", city.speed_obs.size()},
                        {"incidents", city.incidents.size()},
                        {"responders", city.fleet.responders.size()},
                        {"depots", city.fleet.depots.size()}};
  manifest["files"] = {"roads.txt", "fleet.csv", "incidents.csv", "speeds.csv",
                       "truth.model"};
  std::ofstream out(dir + "/manifest.json");
  if (!out) throw FormatError("cannot write " + dir + "/manifest.json");
  out << manifest.dump(2) << '\n';
}

}  // namespace dispatch
