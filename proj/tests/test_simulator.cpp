#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include <dispatch/features.hpp>
#include <dispatch/grid.hpp>
#include <dispatch/landmarks.hpp>
#include <dispatch/road_graph.hpp>
#include <dispatch/scenario_io.hpp>
#include <dispatch/simulator.hpp>
#include <dispatch/speed_model.hpp>
#include <dispatch/survival.hpp>
#include <dispatch/synth_city.hpp>
#include <dispatch/time_utils.hpp>
#include <dispatch/travel_cache.hpp>

#include "test_helpers.hpp"

using namespace dispatch;
using Catch::Approx;

namespace {

const double kMonday = parse_iso8601("2025-01-06T00:00:00Z");

RoadGraph complete_centroid_graph(const Grid& grid, double mph) {
  std::vector<std::string> lines = {"nodes"};
  for (int c = 0; c < grid.size(); ++c) {
    const LatLon p = grid.cell(c).centroid;
    lines.push_back(std::to_string(c) + ' ' + format_full(p.lat) + ' ' +
                    format_full(p.lon));
  }
  lines.push_back("edges");
  int seg = 0;
  for (int i = 0; i < grid.size(); ++i)
    for (int j = 0; j < grid.size(); ++j) {
      if (i == j) continue;
      const double len =
          std::max(1.0, euclidean_m(grid.cell(i).centroid, grid.cell(j).centroid));
      lines.push_back(std::to_string(i) + ' ' + std::to_string(j) + ' ' +
                      format_full(len) + " 2 " + format_full(mph) + ' ' +
                      std::to_string(seg++));
    }
  return RoadGraph::parse(lines, "sim world");
}

// A 3x3-cell city whose road graph joins every centroid pair at a uniform
// 30 mph, so travel times are plain distance over speed and every expected
// response below can be recomputed in the test itself.  Depots and incidents
// sit exactly on centroids, matching the policies' discretized view.
struct SimWorld {
  Grid grid;
  RoadGraph graph;
  SpeedProfiles profiles;
  LandmarkTable landmarks;
  SurvivalModel model;
  TravelTimeCache cache;
  Fleet fleet;

  SimWorld(const std::vector<int>& depot_cells, const std::vector<int>& unit_depots)
      : grid(Grid::build(bbox_from_extent(36.0, -87.0, 3000.0, 3000.0), 1000.0)),
        graph(complete_centroid_graph(grid, 30.0)),
        profiles(SpeedProfiles::empty_for(graph)),
        landmarks(LandmarkTable::select(graph, 2, 1)),
        cache(grid, graph, landmarks, profiles) {
    model.beta.assign(FeatureSchema::standard().m(), 0.0);
    model.beta[FeatureSchema::kIntercept] = std::log(2.0);  // sparse rollouts
    for (size_t d = 0; d < depot_cells.size(); ++d) {
      Depot dep;
      dep.id = static_cast<int>(d);
      dep.location = grid.cell(depot_cells[d]).centroid;
      dep.grid_id = depot_cells[d];
      fleet.depots.push_back(dep);
    }
    for (size_t u = 0; u < unit_depots.size(); ++u) {
      Responder r;
      r.id = static_cast<int>(u);
      r.depot_id = unit_depots[u];
      r.location = fleet.depots[static_cast<size_t>(unit_depots[u])].location;
      fleet.responders.push_back(r);
    }
  }

  ScenarioWorld scenario(std::vector<Incident> incidents, uint64_t seed = 11) {
    ScenarioWorld w;
    w.grid = &grid;
    w.graph = &graph;
    w.landmarks = &landmarks;
    w.profiles = &profiles;
    w.model = &model;
    w.fleet = fleet;
    w.incidents = std::move(incidents);
    w.planner.b = 2;
    w.planner.epsilon = 1.5;
    w.planner.h_s = 1;
    w.planner.h = 2;
    w.planner.chain_horizon_s = 1.0 * kSecondsPerHour;
    w.service_mean_s = 1200.0;
    w.seed = seed;
    return w;
  }

  Incident incident(long long id, int cell, double at) const {
    Incident inc;
    inc.id = id;
    inc.occurred_at = at;
    inc.location = grid.cell(cell).centroid;
    inc.grid_id = cell;
    return inc;
  }

  double travel(int from_cell, int to_cell, double t) {
    return cache.travel_seconds_cells(from_cell, to_cell, t);
  }

  // the per-incident service draw both policies must share
  double service(uint64_t seed, long long incident_id, double mean = 1200.0) const {
    Rng rng(derive_seed(seed, "service", static_cast<uint64_t>(incident_id)));
    return rng.exponential(mean);
  }
};

}  // namespace

TEST_CASE("an empty incident log produces an empty result") {
  SimWorld w({0}, {0});
  auto world = w.scenario({});
  for (PolicyKind p : {PolicyKind::Greedy, PolicyKind::Planner}) {
    const ReplayResult res = run_replay(world, w.cache, p);
    REQUIRE(res.outcomes.empty());
    REQUIRE(res.dispatch_count == 0);
    REQUIRE(res.queued_count == 0);
    REQUIRE(res.decision_seconds.empty());
  }
  const ComparisonReport rep = compare_policies(world, w.cache);
  REQUIRE(rep.incident_count == 0);
  REQUIRE(rep.impacted_count == 0);
  REQUIRE(rep.rows.empty());
}

TEST_CASE("a lone incident is served with the exact cached travel time") {
  SimWorld w({0}, {0});
  const double t0 = kMonday + 3600.0;
  auto world = w.scenario({w.incident(7, 8, t0)});

  for (PolicyKind p : {PolicyKind::Greedy, PolicyKind::Planner}) {
    const ReplayResult res = run_replay(world, w.cache, p);
    REQUIRE(res.outcomes.size() == 1);
    const PerIncidentOutcome& o = res.outcomes[0];
    const double tt = w.travel(0, 8, t0);
    REQUIRE(o.id == 7);
    REQUIRE(o.reported_at == t0);
    REQUIRE(o.responded_at == t0 + tt);
    // the response is measured between absolute event times, so it carries
    // one rounding at epoch scale: compare against the same arithmetic
    REQUIRE(o.response_s == (t0 + tt) - t0);
    REQUIRE(o.response_s == Approx(tt).margin(1e-5));
    REQUIRE(o.responder_id == 0);
    REQUIRE(res.dispatch_count == 1);
    REQUIRE(res.queued_count == 0);
    REQUIRE(res.decision_seconds.size() == 1);
  }
}

TEST_CASE("the base policy sends the euclidean-nearest free unit") {
  SimWorld w({0, 4}, {0, 1});  // unit 0 at cell 0, unit 1 at cell 4
  const double t0 = kMonday;
  auto world = w.scenario({w.incident(1, 5, t0), w.incident(2, 5, t0 + 5.0)});

  const ReplayResult res = run_replay(world, w.cache, PolicyKind::Greedy);
  REQUIRE(res.outcomes.size() == 2);

  // cell 4 is adjacent to 5; unit 1 takes the first call
  const double tt1 = w.travel(4, 5, t0);
  REQUIRE(res.outcomes[0].responder_id == 1);
  REQUIRE(res.outcomes[0].responded_at == t0 + tt1);
  REQUIRE(res.outcomes[0].response_s == (t0 + tt1) - t0);

  // five seconds later unit 1 is en route, so unit 0 answers from cell 0
  const double tt0 = w.travel(0, 5, t0 + 5.0);
  REQUIRE(res.outcomes[1].responder_id == 0);
  REQUIRE(res.outcomes[1].responded_at == (t0 + 5.0) + tt0);
  REQUIRE(res.outcomes[1].response_s == ((t0 + 5.0) + tt0) - (t0 + 5.0));
  REQUIRE(res.queued_count == 0);
}

TEST_CASE("queued incidents are served in arrival order by the freeing unit") {
  SimWorld w({0}, {0});
  const double t0 = kMonday + 1800.0;
  const uint64_t seed = 11;
  auto world = w.scenario(
      {w.incident(1, 2, t0), w.incident(2, 6, t0 + 30.0), w.incident(3, 7, t0 + 60.0)},
      seed);

  const ReplayResult res = run_replay(world, w.cache, PolicyKind::Greedy);
  REQUIRE(res.outcomes.size() == 3);
  REQUIRE(res.dispatch_count == 3);
  REQUIRE(res.queued_count == 2);          // incidents 2 and 3 found no free unit
  REQUIRE(res.decision_seconds.size() == 1);  // only incident 1 ran a decision

  // incident 1: plain dispatch from the depot
  const double ttA = w.travel(0, 2, t0);
  REQUIRE(res.outcomes[0].id == 1);
  REQUIRE(res.outcomes[0].responded_at == t0 + ttA);
  REQUIRE(res.outcomes[0].response_s == (t0 + ttA) - t0);

  // incident 2: taken directly from the scene of 1 when service ends
  const double sendA = (t0 + ttA) + w.service(seed, 1);
  const double ttB = w.travel(2, 6, sendA);
  REQUIRE(res.outcomes[1].id == 2);
  REQUIRE(res.outcomes[1].responded_at == sendA + ttB);
  REQUIRE(res.outcomes[1].response_s == (sendA + ttB) - (t0 + 30.0));

  // incident 3: the same unit continues from the scene of 2
  const double sendB = (sendA + ttB) + w.service(seed, 2);
  const double ttC = w.travel(6, 7, sendB);
  REQUIRE(res.outcomes[2].id == 3);
  REQUIRE(res.outcomes[2].responded_at == sendB + ttC);
  REQUIRE(res.outcomes[2].response_s == (sendB + ttC) - (t0 + 60.0));
}

TEST_CASE("a single-unit world makes both policies identical") {
  SimWorld w({0}, {0});
  const double t0 = kMonday;
  std::vector<Incident> incs;
  const int cells[6] = {2, 6, 4, 8, 1, 5};
  for (int i = 0; i < 6; ++i)
    incs.push_back(w.incident(i + 1, cells[i], t0 + 400.0 * i));
  auto world = w.scenario(incs);

  const ReplayResult a = run_replay(world, w.cache, PolicyKind::Greedy);
  const ReplayResult b = run_replay(world, w.cache, PolicyKind::Planner);
  REQUIRE(a.outcomes.size() == b.outcomes.size());
  for (size_t i = 0; i < a.outcomes.size(); ++i) {
    // same unit, same service draws: byte-for-byte the same story
    REQUIRE(a.outcomes[i].id == b.outcomes[i].id);
    REQUIRE(a.outcomes[i].responded_at == b.outcomes[i].responded_at);
    REQUIRE(a.outcomes[i].response_s == b.outcomes[i].response_s);
    REQUIRE(a.outcomes[i].responder_id == b.outcomes[i].responder_id);
  }

  const ComparisonReport rep = compare_policies(world, w.cache);
  REQUIRE(rep.incident_count == 6);
  REQUIRE(rep.impacted_count == 0);
  REQUIRE(rep.improved_savings_s.empty());
  REQUIRE(rep.worsened_increase_s.empty());
  REQUIRE(rep.mean_savings_on_impacted_s == 0.0);
  REQUIRE(rep.mean_base_response_s == rep.mean_planner_response_s);
}

TEST_CASE("a returning unit is re-dispatched mid-leg and stale events ignored") {
  SimWorld w({0}, {0});
  const double t0 = kMonday;
  const uint64_t seed = 11;

  // reconstruct the return leg of incident 1 to place incident 2 on it
  const double ttA = w.travel(0, 8, t0);
  const double sendA = t0 + ttA + w.service(seed, 1);
  const double back = w.travel(8, 0, sendA);
  const double tb = sendA + 0.4 * back;  // 40% of the way home
  const double tc = tb + 3.0 * kSecondsPerHour;  // long after everything

  auto world = w.scenario(
      {w.incident(1, 8, t0), w.incident(2, 4, tb), w.incident(3, 1, tc)}, seed);

  const ReplayResult res = run_replay(world, w.cache, PolicyKind::Greedy);
  REQUIRE(res.outcomes.size() == 3);
  REQUIRE(res.queued_count == 0);

  // incident 2: the unit turns around mid-return; its travel starts from the
  // interpolated position on the 8 -> 0 leg
  const LatLon from = interpolate(w.grid.cell(8).centroid, w.grid.cell(0).centroid,
                                  (tb - sendA) / back);
  const double ttB = w.cache.travel_seconds(from, w.grid.cell(4).centroid, tb);
  REQUIRE(res.outcomes[1].id == 2);
  REQUIRE(res.outcomes[1].responded_at == tb + ttB);
  REQUIRE(res.outcomes[1].response_s == (tb + ttB) - tb);
  REQUIRE(res.outcomes[1].responder_id == 0);

  // incident 3: served from the depot, which proves the unit finished the
  // second return leg and the stale first return event really was dropped
  const double ttC = w.travel(0, 1, tc);
  REQUIRE(res.outcomes[2].id == 3);
  REQUIRE(res.outcomes[2].responded_at == tc + ttC);
  REQUIRE(res.outcomes[2].response_s == (tc + ttC) - tc);
}

TEST_CASE("replay is causal, conservative, and deterministic for both policies") {
  SimWorld w({0, 8}, {0, 0, 1});  // two units at depot 0, one at depot 8
  const double t0 = kMonday;
  std::vector<Incident> incs;
  for (int i = 0; i < 25; ++i)
    incs.push_back(w.incident(i + 1, (i * 5 + 3) % 9, t0 + 420.0 * i + i));
  auto world = w.scenario(incs);

  std::set<long long> input_ids;
  for (const auto& inc : incs) input_ids.insert(inc.id);

  for (PolicyKind p : {PolicyKind::Greedy, PolicyKind::Planner}) {
    const ReplayResult r1 = run_replay(world, w.cache, p);
    const ReplayResult r2 = run_replay(world, w.cache, p);

    REQUIRE(r1.outcomes.size() == 25);
    REQUIRE(r1.dispatch_count == 25);
    std::set<long long> seen;
    for (const auto& o : r1.outcomes) {
      REQUIRE(o.responded_at >= o.reported_at);
      REQUIRE(o.response_s == o.responded_at - o.reported_at);
      // zero is legitimate: a unit can sit in the incident's own cell
      REQUIRE(o.response_s >= 0.0);
      REQUIRE(o.responder_id >= 0);
      REQUIRE(o.responder_id < 3);
      seen.insert(o.id);
    }
    REQUIRE(seen == input_ids);  // served exactly once, no inventions

    // a warm cache and a second run change nothing observable
    REQUIRE(r1.outcomes.size() == r2.outcomes.size());
    for (size_t i = 0; i < r1.outcomes.size(); ++i) {
      REQUIRE(r1.outcomes[i].id == r2.outcomes[i].id);
      REQUIRE(r1.outcomes[i].responded_at == r2.outcomes[i].responded_at);
      REQUIRE(r1.outcomes[i].responder_id == r2.outcomes[i].responder_id);
    }
    REQUIRE(r1.queued_count == r2.queued_count);
  }
}

TEST_CASE("the comparison report bookkeeping is internally consistent") {
  SimWorld w({0, 8}, {0, 0, 1});
  const double t0 = kMonday;
  std::vector<Incident> incs;
  for (int i = 0; i < 20; ++i)
    incs.push_back(w.incident(i + 1, (i * 7 + 2) % 9, t0 + 360.0 * i));
  auto world = w.scenario(incs);

  const ComparisonReport rep = compare_policies(world, w.cache);
  REQUIRE(rep.incident_count == 20);
  REQUIRE(rep.rows.size() == 20);
  REQUIRE(rep.impacted_count ==
          rep.improved_savings_s.size() + rep.worsened_increase_s.size());

  double sum_base = 0.0, sum_plan = 0.0, sum_sav = 0.0;
  size_t impacted = 0;
  for (const auto& row : rep.rows) {
    sum_base += row.base_response_s;
    sum_plan += row.planner_response_s;
    if (row.base_response_s != row.planner_response_s) {
      ++impacted;
      sum_sav += row.base_response_s - row.planner_response_s;
    }
  }
  REQUIRE(rep.impacted_count == impacted);
  REQUIRE(rep.mean_base_response_s == Approx(sum_base / 20.0).margin(1e-12));
  REQUIRE(rep.mean_planner_response_s == Approx(sum_plan / 20.0).margin(1e-12));
  if (impacted > 0)
    REQUIRE(rep.mean_savings_on_impacted_s ==
            Approx(sum_sav / static_cast<double>(impacted)).margin(1e-12));
  REQUIRE(std::is_sorted(rep.improved_savings_s.begin(), rep.improved_savings_s.end()));
  REQUIRE(std::is_sorted(rep.worsened_increase_s.begin(), rep.worsened_increase_s.end()));
  for (double s : rep.improved_savings_s) REQUIRE(s > 0.0);
  for (double s : rep.worsened_increase_s) REQUIRE(s > 0.0);
}

TEST_CASE("comparison reports round-trip through the json and csv writers") {
  SimWorld w({0}, {0});
  const double t0 = kMonday;
  auto world = w.scenario({w.incident(1, 4, t0), w.incident(2, 7, t0 + 900.0)});
  ComparisonReport rep = compare_policies(world, w.cache);
  rep.config_echo = planner_config_json(world.planner);

  testutil::TempDir dir;
  const std::string jpath = dir / "comparison.json";
  const std::string cpath = dir / "comparison.csv";
  write_report_json(jpath, rep);
  write_report_csv(cpath, rep);

  std::ifstream jin(jpath);
  nlohmann::json j;
  jin >> j;
  REQUIRE(j.at("incident_count").get<size_t>() == rep.incident_count);
  REQUIRE(j.at("impacted_count").get<size_t>() == rep.impacted_count);
  REQUIRE(j.at("mean_base_response_s").get<double>() == rep.mean_base_response_s);
  REQUIRE(j.at("mean_planner_response_s").get<double>() ==
          rep.mean_planner_response_s);
  REQUIRE(j.at("config").at("chains").get<int>() == world.planner.b);
  REQUIRE(j.at("improved_savings_s").size() == rep.improved_savings_s.size());

  const auto lines = split(testutil::slurp(cpath), '\n');
  size_t li = 0;
  while (li < lines.size() && !lines[li].empty() && lines[li][0] == '#') ++li;
  REQUIRE(lines[li] == "incident_id,base_response_s,planner_response_s");
  REQUIRE(lines.size() >= li + 1 + rep.rows.size());
  const auto first = split(lines[li + 1], ',');
  REQUIRE(std::stoll(first[0]) == rep.rows[0].incident_id);
  // full-precision formatting: the doubles survive the text round trip
  REQUIRE(std::stod(first[1]) == rep.rows[0].base_response_s);
  REQUIRE(std::stod(first[2]) == rep.rows[0].planner_response_s);
}

TEST_CASE("a generated city scenario round-trips through its files") {
  CityConfig cfg;
  cfg.width_m = 3000.0;
  cfg.height_m = 3000.0;
  cfg.cell_size_m = 1000.0;
  cfg.complete_centroid_graph = true;
  cfg.depots = 2;
  cfg.responders = 3;
  cfg.speed_weeks = 1;
  cfg.horizon_days = 2.0;
  cfg.target_mean_gap_hours = 12.0;
  cfg.seed = 7;
  const SynthCity city = generate_city(cfg);
  REQUIRE_FALSE(city.incidents.empty());

  testutil::TempDir dir;
  save_city(city, cfg, dir.path.string());
  PlannerConfig pc;
  pc.b = 3;
  pc.epsilon = 2.0;
  pc.h_s = 1;
  pc.h = 3;
  pc.gamma = 0.95;
  write_scenario_json(dir / "scenario.json", cfg, pc, 900.0, cfg.seed);

  const Scenario sc = load_scenario(dir / "scenario.json");
  REQUIRE(sc.grid.size() == city.grid.size());
  REQUIRE(sc.graph.node_count() == city.graph.node_count());
  REQUIRE(sc.graph.edges().size() == city.graph.edges().size());
  REQUIRE(sc.incidents.size() == city.incidents.size());
  for (size_t i = 0; i < sc.incidents.size(); ++i) {
    REQUIRE(sc.incidents[i].id == city.incidents[i].id);
    // timestamps are written at whole-second precision
    REQUIRE(std::abs(sc.incidents[i].occurred_at - city.incidents[i].occurred_at) <
            1.0);
    REQUIRE(sc.incidents[i].grid_id == city.incidents[i].grid_id);
  }
  REQUIRE(sc.fleet.depots.size() == city.fleet.depots.size());
  REQUIRE(sc.fleet.responders.size() == city.fleet.responders.size());
  for (const auto& d : sc.fleet.depots) REQUIRE(d.grid_id >= 0);
  REQUIRE(sc.model.beta == city.truth.beta);  // full-precision model file
  REQUIRE(sc.planner.b == 3);
  REQUIRE(sc.planner.epsilon == 2.0);
  REQUIRE(sc.planner.h_s == 1);
  REQUIRE(sc.planner.h == 3);
  REQUIRE(sc.planner.gamma == 0.95);
  REQUIRE(sc.service_mean_s == 900.0);
  REQUIRE(sc.planner.service_mean_s == 900.0);
  REQUIRE(sc.seed == cfg.seed);

  // the loaded scenario actually runs
  ScenarioWorld world = sc.world();
  if (world.incidents.size() > 5) world.incidents.resize(5);
  TravelTimeCache cache(sc.grid, sc.graph, sc.landmarks, sc.profiles);
  const ReplayResult res = run_replay(world, cache, PolicyKind::Greedy);
  REQUIRE(res.outcomes.size() == world.incidents.size());
}

TEST_CASE("the scenario loader rejects broken input") {
  testutil::TempDir dir;
  REQUIRE_THROWS_AS(load_scenario(dir / "missing.json"), ConfigError);
  const std::string bad = dir.file("bad.json", "{ not json ");
  REQUIRE_THROWS_AS(load_scenario(bad), ConfigError);
  const std::string incomplete = dir.file("inc.json", "{\"seed\": 3}\n");
  REQUIRE_THROWS_AS(load_scenario(incomplete), ConfigError);
}
