#pragma once

#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "dispatch/simulator.hpp"
#include "dispatch/synth_city.hpp"

// Scenario files tie the individual artifacts (road graph, speed history,
// inter-arrival model, fleet, incident log) into one runnable description.
// All paths are resolved relative to the scenario file's directory.

namespace dispatch {

struct Scenario {
  Grid grid;
  RoadGraph graph;
  SpeedProfiles profiles;
  LandmarkTable landmarks;
  SurvivalModel model;
  Fleet fleet;
  std::vector<Incident> incidents;
  PlannerConfig planner;
  double service_mean_s = 20.0 * 60.0;
  uint64_t seed = 1;
  int landmark_count = 8;

  ScenarioWorld world() const {
    ScenarioWorld w;
    w.grid = &grid;
    w.graph = &graph;
    w.landmarks = &landmarks;
    w.profiles = &profiles;
    w.model = &model;
    w.fleet = fleet;
    w.incidents = incidents;
    w.planner = planner;
    w.service_mean_s = service_mean_s;
    w.seed = seed;
    return w;
  }
};

namespace scenario_detail {

inline std::string dir_of(const std::string& path) {
  const auto pos = path.find_last_of('/');
  return pos == std::string::npos ? std::string(".") : path.substr(0, pos);
}

inline std::string resolve(const std::string& base_dir, const std::string& rel) {
  if (!rel.empty() && rel[0] == '/') return rel;
  return base_dir + "/" + rel;
}

}  // namespace scenario_detail

inline PlannerConfig planner_config_from_json(const nlohmann::json& j) {
  PlannerConfig cfg;
  cfg.b = j.value("chains", cfg.b);
  cfg.epsilon = j.value("candidate_ratio", cfg.epsilon);
  cfg.h_s = j.value("myopic_depth", cfg.h_s);
  cfg.h = j.value("tree_depth", cfg.h);
  cfg.gamma = j.value("time_discount", cfg.gamma);
  if (j.contains("chain_horizon_hours"))
    cfg.chain_horizon_s = j.at("chain_horizon_hours").get<double>() * kSecondsPerHour;
  cfg.dispatch_offset_s = j.value("dispatch_offset_s", cfg.dispatch_offset_s);
  return cfg;
}

inline nlohmann::json planner_config_json(const PlannerConfig& cfg) {
  return nlohmann::json{
      {"chains", cfg.b},
      {"candidate_ratio", cfg.epsilon},
      {"myopic_depth", cfg.h_s},
      {"tree_depth", cfg.h},
      {"time_discount", cfg.gamma},
      {"chain_horizon_hours", cfg.chain_horizon_s / kSecondsPerHour},
      {"dispatch_offset_s", cfg.dispatch_offset_s}};
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  const std::string base = scenario_detail::dir_of(path);

  try {
    Scenario sc;
    const auto& r = j.at("region");
    BoundingBox box;
    if (r.contains("width_m")) {
      box = bbox_from_extent(r.at("min_lat").get<double>(),
                             r.at("min_lon").get<double>(),
                             r.at("width_m").get<double>(),
                             r.at("height_m").get<double>());
    } else {
      box.min_lat = r.at("min_lat").get<double>();
      box.min_lon = r.at("min_lon").get<double>();
      box.max_lat = r.at("max_lat").get<double>();
      box.max_lon = r.at("max_lon").get<double>();
    }
    sc.grid = Grid::build(box, j.value("cell_size_m", kMetersPerMile));

    sc.graph = RoadGraph::load(scenario_detail::resolve(base, j.at("roads").get<std::string>()));

    if (j.contains("speed_profiles")) {
      sc.profiles = SpeedProfiles::load(
          scenario_detail::resolve(base, j.at("speed_profiles").get<std::string>()));
    } else if (j.contains("speeds")) {
      sc.profiles = SpeedProfiles::fit(
          load_speeds_csv(scenario_detail::resolve(base, j.at("speeds").get<std::string>())),
          sc.graph);
    } else {
      sc.profiles = SpeedProfiles::empty_for(sc.graph);
    }

    sc.seed = j.value("seed", sc.seed);
    sc.landmark_count = j.value("landmark_count", sc.landmark_count);
    if (j.contains("landmarks")) {
      sc.landmarks = LandmarkTable::load(
          scenario_detail::resolve(base, j.at("landmarks").get<std::string>()), sc.graph);
    } else {
      sc.landmarks = LandmarkTable::select(sc.graph, sc.landmark_count,
                                           derive_seed(sc.seed, "landmarks"));
    }

    sc.model = load_model(scenario_detail::resolve(base, j.at("model").get<std::string>()));
    sc.fleet = load_fleet_csv(scenario_detail::resolve(base, j.at("fleet").get<std::string>()));
    sc.incidents =
        load_incidents_csv(scenario_detail::resolve(base, j.at("incidents").get<std::string>()));
    assign_grid_cells(sc.incidents, sc.grid);
    for (auto& d : sc.fleet.depots) d.grid_id = sc.grid.cell_of(d.location);

    if (j.contains("planner")) sc.planner = planner_config_from_json(j.at("planner"));
    if (j.contains("service_mean_min"))
      sc.service_mean_s = j.at("service_mean_min").get<double>() * 60.0;
    sc.planner.service_mean_s = sc.service_mean_s;
    sc.planner.validate();
    return sc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Companion writer so gen-city output is immediately runnable.
inline void write_scenario_json(const std::string& path, const CityConfig& cfg,
                                const PlannerConfig& planner,
                                double service_mean_s, uint64_t seed) {
  nlohmann::json j;
  j["region"] = {{"min_lat", cfg.min_lat},
                 {"min_lon", cfg.min_lon},
                 {"width_m", cfg.width_m},
                 {"height_m", cfg.height_m}};
  j["cell_size_m"] = cfg.cell_size_m;
  j["roads"] = "roads.txt";
  if (cfg.speed_amplitude > 0.0) j["speeds"] = "speeds.csv";
  j["model"] = "truth.model";
  j["fleet"] = "fleet.csv";
  j["incidents"] = "incidents.csv";
  j["planner"] = planner_config_json(planner);
  j["service_mean_min"] = service_mean_s / 60.0;
  j["seed"] = seed;
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace dispatch
