#pragma once

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dispatch/scenario_io.hpp"

// Command-line front end.  Exit codes: 0 success, 1 usage or configuration
// problems, 2 malformed or inconsistent data, 3 numerical failure.

namespace dispatch {

namespace cli_detail {

struct RegionArgs {
  double min_lat = 36.0, min_lon = -87.0;
  double width_m = 8000.0, height_m = 8000.0;
  double cell_size_m = kMetersPerMile;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--min-lat", min_lat, "SW corner latitude");
    cmd->add_option("--min-lon", min_lon, "SW corner longitude");
    cmd->add_option("--width-m", width_m, "region width in meters");
    cmd->add_option("--height-m", height_m, "region height in meters");
    cmd->add_option("--cell-size-m", cell_size_m, "grid cell edge in meters");
  }

  void merge_config(const nlohmann::json& j) {
    if (!j.contains("region")) return;
    const auto& r = j.at("region");
    min_lat = r.value("min_lat", min_lat);
    min_lon = r.value("min_lon", min_lon);
    width_m = r.value("width_m", width_m);
    height_m = r.value("height_m", height_m);
    cell_size_m = j.value("cell_size_m", cell_size_m);
  }

  Grid build() const {
    return Grid::build(bbox_from_extent(min_lat, min_lon, width_m, height_m),
                       cell_size_m);
  }
};

inline nlohmann::json load_config_json(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline SurvivalDataset dataset_from_csv(const std::string& path, const Grid& grid) {
  auto incidents = load_incidents_csv(path);
  assign_grid_cells(incidents, grid);
  return build_survival_dataset(incidents, grid);
}

inline void print_fit_summary(const FitResult& fr, size_t n_obs) {
  std::cout << "observations: " << n_obs << "\n"
            << "iterations: " << fr.iterations
            << (fr.converged ? " (converged)" : " (iteration cap)") << "\n"
            << "log-likelihood: " << format_full(fr.final_loglik) << "\n"
            << "gradient max-abs: " << format_full(fr.final_grad_inf) << "\n";
}

inline nlohmann::json replay_json(const ReplayResult& res, const std::string& policy) {
  nlohmann::json j;
  j["policy"] = policy;
  j["dispatches"] = res.dispatch_count;
  j["queued"] = res.queued_count;
  double sum = 0.0;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& o : res.outcomes) {
    sum += o.response_s;
    rows.push_back({{"incident_id", o.id},
                    {"reported_at", format_iso8601(o.reported_at)},
                    {"response_s", o.response_s},
                    {"responder_id", o.responder_id}});
  }
  j["mean_response_s"] =
      res.outcomes.empty() ? 0.0 : sum / static_cast<double>(res.outcomes.size());
  if (!res.decision_seconds.empty()) {
    double ds = 0.0;
    for (double d : res.decision_seconds) ds += d;
    j["mean_decision_compute_s"] =
        ds / static_cast<double>(res.decision_seconds.size());
  }
  j["incidents"] = rows;
  return j;
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv) {
  using cli_detail::load_config_json;
  CLI::App app{"incident dispatch pipeline: inter-arrival modeling, "
               "time-dependent routing, rollout dispatch planning, and replay"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::string trace_path;
  uint64_t seed = 1;
  bool seed_given = false;
  app.add_option("--config", config_path, "JSON file with defaults for the subcommand")
      ->envname("DISPATCH_CONFIG");
  app.add_option("--out-dir", out_dir, "directory for generated files");
  app.add_option("--trace", trace_path, "write per-decision JSON lines here");
  app.add_option("--seed", seed, "root random seed")
      ->each([&](const std::string&) { seed_given = true; });

  // ---- fit-incidents ----
  auto* fit_cmd = app.add_subcommand(
      "fit-incidents", "fit the inter-arrival model to an incident log");
  std::string fit_incidents_path, fit_out = "survival.model";
  cli_detail::RegionArgs fit_region;
  double fit_step = 1e-3, fit_tol = 1e-6;
  int fit_max_iter = 500;
  fit_cmd->add_option("--incidents", fit_incidents_path, "incident log CSV")
      ->required();
  fit_region.add_to(fit_cmd);
  fit_cmd->add_option("--step", fit_step, "gradient ascent step size");
  fit_cmd->add_option("--tol", fit_tol, "log-likelihood convergence tolerance");
  fit_cmd->add_option("--max-iter", fit_max_iter, "iteration cap");
  fit_cmd->add_option("--out", fit_out, "output model path");

  // ---- update-incidents ----
  auto* upd_cmd = app.add_subcommand(
      "update-incidents", "stream new incidents into an existing model");
  std::string upd_model, upd_incidents, upd_out = "updated.model";
  cli_detail::RegionArgs upd_region;
  double upd_step = 1e-3;
  int upd_max_iter = 100;
  upd_cmd->add_option("--model", upd_model, "base model path")->required();
  upd_cmd->add_option("--incidents", upd_incidents, "new incident rows CSV")
      ->required();
  upd_region.add_to(upd_cmd);
  upd_cmd->add_option("--step", upd_step, "update step size");
  upd_cmd->add_option("--max-iter", upd_max_iter, "iteration cap");
  upd_cmd->add_option("--out", upd_out, "output model path");

  // ---- fit-speeds ----
  auto* spd_cmd = app.add_subcommand(
      "fit-speeds", "aggregate speed history into weekly segment profiles");
  std::string spd_roads, spd_csv, spd_out = "speeds.profiles";
  int spd_bin_min = 30;
  spd_cmd->add_option("--roads", spd_roads, "road graph file")->required();
  spd_cmd->add_option("--speeds", spd_csv, "speed observation CSV")->required();
  spd_cmd->add_option("--bin-min", spd_bin_min, "bin width in minutes");
  spd_cmd->add_option("--out", spd_out, "output profiles path");

  // ---- build-landmarks ----
  auto* lm_cmd = app.add_subcommand(
      "build-landmarks", "precompute landmark distance tables for routing");
  std::string lm_roads, lm_out = "graph.landmarks";
  int lm_count = 8;
  lm_cmd->add_option("--roads", lm_roads, "road graph file")->required();
  lm_cmd->add_option("--count", lm_count, "number of landmarks");
  lm_cmd->add_option("--out", lm_out, "output table path");

  // ---- route ----
  auto* route_cmd = app.add_subcommand(
      "route", "time-dependent shortest path between two coordinates");
  std::string route_roads, route_profiles, route_landmarks, route_depart,
      route_out;
  double from_lat = 0, from_lon = 0, to_lat = 0, to_lon = 0;
  route_cmd->add_option("--roads", route_roads, "road graph file")->required();
  route_cmd->add_option("--profiles", route_profiles, "fitted speed profiles");
  route_cmd->add_option("--landmarks", route_landmarks, "landmark table");
  route_cmd->add_option("--from-lat", from_lat)->required();
  route_cmd->add_option("--from-lon", from_lon)->required();
  route_cmd->add_option("--to-lat", to_lat)->required();
  route_cmd->add_option("--to-lon", to_lon)->required();
  route_cmd->add_option("--depart", route_depart, "departure time, ISO-8601 UTC")
      ->required();
  route_cmd->add_option("--out", route_out, "write route JSON here");

  // ---- simulate ----
  auto* sim_cmd = app.add_subcommand(
      "simulate", "replay an incident log under one dispatch policy");
  std::string sim_scenario, sim_policy = "planner", sim_out;
  sim_cmd->add_option("--scenario", sim_scenario, "scenario JSON")->required();
  sim_cmd->add_option("--policy", sim_policy, "greedy or planner")
      ->check(CLI::IsMember({"greedy", "planner"}));
  sim_cmd->add_option("--out", sim_out, "write replay JSON here");

  // ---- compare ----
  auto* cmp_cmd = app.add_subcommand(
      "compare", "replay under both policies and diff the outcomes");
  std::string cmp_scenario;
  cmp_cmd->add_option("--scenario", cmp_scenario, "scenario JSON")->required();

  // ---- gen-city ----
  auto* gen_cmd = app.add_subcommand(
      "gen-city", "generate a synthetic city with known ground truth");

  // ---- sample-chains ----
  auto* chains_cmd = app.add_subcommand(
      "sample-chains", "draw plausible near-future incident chains");
  std::string ch_scenario, ch_start, ch_out;
  int ch_count = 10;
  double ch_horizon_h = 6.0;
  chains_cmd->add_option("--scenario", ch_scenario, "scenario JSON")->required();
  chains_cmd->add_option("--start", ch_start,
                         "chain start, ISO-8601 UTC (default: after last incident)");
  chains_cmd->add_option("--count", ch_count, "number of chains");
  chains_cmd->add_option("--horizon-h", ch_horizon_h, "chain length in hours");
  chains_cmd->add_option("--out", ch_out, "write chains JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const nlohmann::json cfg_json = load_config_json(config_path);
    if (!seed_given) seed = cfg_json.value("seed", seed);

    if (*fit_cmd) {
      fit_region.merge_config(cfg_json);
      const Grid grid = fit_region.build();
      const SurvivalDataset ds =
          cli_detail::dataset_from_csv(fit_incidents_path, grid);
      FitOptions opt;
      opt.step = fit_step;
      opt.tol = fit_tol;
      opt.max_iter = fit_max_iter;
      const FeatureSchema schema = FeatureSchema::standard();
      FitResult fr =
          fit_batch(ds, std::vector<double>(schema.names().size(), 0.0), opt);
      fr.model.feature_names = schema.names();
      save_model(out_dir + "/" + fit_out, fr.model);
      cli_detail::print_fit_summary(fr, ds.n());
      std::cout << "model: " << out_dir + "/" + fit_out << "\n";
      return 0;
    }

    if (*upd_cmd) {
      upd_region.merge_config(cfg_json);
      const Grid grid = upd_region.build();
      const SurvivalModel base = load_model(upd_model);
      const SurvivalDataset ds =
          cli_detail::dataset_from_csv(upd_incidents, grid);
      const SurvivalModel next =
          update_streaming(base, ds, upd_step, upd_max_iter);
      save_model(out_dir + "/" + upd_out, next);
      std::cout << "stream rows: " << ds.n() << "\n"
                << "model: " << out_dir + "/" + upd_out << "\n";
      return 0;
    }

    if (*spd_cmd) {
      const RoadGraph graph = RoadGraph::load(spd_roads);
      const auto obs = load_speeds_csv(spd_csv);
      const SpeedProfiles profiles = SpeedProfiles::fit(obs, graph, spd_bin_min);
      profiles.save(out_dir + "/" + spd_out);
      std::cout << "observations: " << obs.size() << "\n"
                << "training MAE (mph): " << format_full(profiles.mae(obs)) << "\n"
                << "fastest observed over freeflow ratio floor: "
                << format_full(profiles.min_time_ratio()) << "\n"
                << "profiles: " << out_dir + "/" + spd_out << "\n";
      return 0;
    }

    if (*lm_cmd) {
      const RoadGraph graph = RoadGraph::load(lm_roads);
      const LandmarkTable lm =
          LandmarkTable::select(graph, lm_count, derive_seed(seed, "landmarks"));
      lm.save(out_dir + "/" + lm_out, graph);
      std::cout << "landmarks: " << lm.count() << "\n"
                << "table: " << out_dir + "/" + lm_out << "\n";
      return 0;
    }

    if (*route_cmd) {
      const RoadGraph graph = RoadGraph::load(route_roads);
      const SpeedProfiles profiles =
          route_profiles.empty() ? SpeedProfiles::empty_for(graph)
                                 : SpeedProfiles::load(route_profiles);
      const LandmarkTable lm =
          route_landmarks.empty()
              ? LandmarkTable::select(graph, 8, derive_seed(seed, "landmarks"))
              : LandmarkTable::load(route_landmarks, graph);
      const double depart = parse_iso8601(route_depart);
      const int src = graph.nearest_node(LatLon{from_lat, from_lon});
      const int dst = graph.nearest_node(LatLon{to_lat, to_lon});
      const RouteResult r = alt_shortest_path(graph, lm, profiles, src, dst, depart);
      nlohmann::json j;
      j["seconds"] = r.seconds;
      j["settled"] = r.settled;
      nlohmann::json path = nlohmann::json::array();
      for (int idx : r.path) path.push_back(graph.node(idx).id);
      j["path"] = path;
      std::cout << "travel seconds: " << format_full(r.seconds) << "\n"
                << "nodes on path: " << r.path.size() << "\n";
      if (!route_out.empty()) {
        std::ofstream o(out_dir + "/" + route_out);
        if (!o) throw FormatError("cannot write " + out_dir + "/" + route_out);
        o << j.dump(2) << '\n';
      }
      return 0;
    }

    if (*sim_cmd || *cmp_cmd) {
      Scenario sc = load_scenario(*sim_cmd ? sim_scenario : cmp_scenario);
      if (cfg_json.contains("planner")) {
        sc.planner = planner_config_from_json(cfg_json.at("planner"));
        sc.planner.service_mean_s = sc.service_mean_s;
      }
      if (seed_given) sc.seed = seed;
      TravelTimeCache cache(sc.grid, sc.graph, sc.landmarks, sc.profiles);
      const ScenarioWorld world = sc.world();

      std::ofstream trace_out;
      std::ostream* trace = nullptr;
      if (!trace_path.empty()) {
        trace_out.open(out_dir + "/" + trace_path);
        if (!trace_out)
          throw FormatError("cannot write " + out_dir + "/" + trace_path);
        trace = &trace_out;
      }

      if (*sim_cmd) {
        const PolicyKind kind =
            sim_policy == "greedy" ? PolicyKind::Greedy : PolicyKind::Planner;
        const ReplayResult res = run_replay(world, cache, kind, trace);
        const nlohmann::json j = cli_detail::replay_json(res, sim_policy);
        std::cout << "incidents answered: " << res.outcomes.size() << "\n"
                  << "mean response (s): " << j["mean_response_s"].dump() << "\n";
        if (!sim_out.empty()) {
          std::ofstream o(out_dir + "/" + sim_out);
          if (!o) throw FormatError("cannot write " + out_dir + "/" + sim_out);
          o << j.dump(2) << '\n';
        }
        return 0;
      }

      ComparisonReport rep = compare_policies(world, cache, trace);
      rep.config_echo = planner_config_json(sc.planner);
      rep.config_echo["seed"] = sc.seed;
      write_report_json(out_dir + "/comparison.json", rep);
      write_report_csv(out_dir + "/comparison.csv", rep);
      std::cout << "incidents: " << rep.incident_count << "\n"
                << "decisions changed: " << rep.impacted_count << "\n"
                << "mean saving on changed (s): "
                << format_full(rep.mean_savings_on_impacted_s) << "\n"
                << "mean response greedy (s): "
                << format_full(rep.mean_base_response_s) << "\n"
                << "mean response planner (s): "
                << format_full(rep.mean_planner_response_s) << "\n"
                << "mean decision compute (s): "
                << format_full(rep.mean_decision_compute_s) << "\n"
                << "report: " << out_dir << "/comparison.json\n";
      return 0;
    }

    if (*gen_cmd) {
      CityConfig ccfg = city_config_from_json(cfg_json);
      if (seed_given) ccfg.seed = seed;
      const SynthCity city = generate_city(ccfg);
      save_city(city, ccfg, out_dir);
      write_scenario_json(out_dir + "/scenario.json", ccfg, PlannerConfig{},
                          20.0 * 60.0, ccfg.seed);
      std::cout << "cells: " << city.grid.size() << "\n"
                << "road nodes: " << city.graph.node_count() << "\n"
                << "incidents: " << city.incidents.size() << "\n"
                << "city: " << out_dir << "/scenario.json\n";
      return 0;
    }

    if (*chains_cmd) {
      const Scenario sc = load_scenario(ch_scenario);
      double start = sc.incidents.empty() ? 0.0
                                          : sc.incidents.back().occurred_at + 1.0;
      if (!ch_start.empty()) start = parse_iso8601(ch_start);

      GeneratorContext ctx;
      ctx.grid = &sc.grid;
      ctx.model = &sc.model;
      ctx.counts = IncidentCountTracker(sc.grid.size());
      for (const auto& inc : sc.incidents) {
        if (inc.occurred_at >= start) break;
        ctx.counts.push(inc.grid_id, inc.occurred_at);
        if (inc.temp_c && inc.rain_mm)
          ctx.weather = Weather{*inc.temp_c, *inc.rain_mm};
      }
      const auto chains = generate_chains(
          ch_count, ctx, start, ch_horizon_h * kSecondsPerHour,
          derive_seed(seed_given ? seed : sc.seed, "chains"));
      nlohmann::json j = nlohmann::json::array();
      for (const auto& c : chains) {
        nlohmann::json one = nlohmann::json::array();
        for (const auto& ev : c.events)
          one.push_back({{"at", format_iso8601(ev.occurred_at)},
                         {"cell", ev.grid_id},
                         {"lat", ev.location.lat},
                         {"lon", ev.location.lon}});
        j.push_back(one);
      }
      size_t total = 0;
      for (const auto& c : chains) total += c.size();
      std::cout << "chains: " << chains.size() << "\n"
                << "events: " << total << "\n";
      if (!ch_out.empty()) {
        std::ofstream o(out_dir + "/" + ch_out);
        if (!o) throw FormatError("cannot write " + out_dir + "/" + ch_out);
        o << j.dump(2) << '\n';
      }
      return 0;
    }

    std::cerr << "no subcommand\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DivergenceError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const RateOverflow& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::runtime_error& e) {  // data-level failures
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace dispatch
