#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <json.hpp>

#include "dispatch/fleet.hpp"
#include "dispatch/incident.hpp"
#include "dispatch/planner.hpp"

// Discrete-event replay of an incident log under a dispatch policy.
//
// Conventions shared by both policies so their runs are comparable:
//  * all policy-facing locations are discretized to grid centroids (matching
//    the travel cache's resolution);
//  * physical motion takes the cached router time between the endpoint cells,
//    with straight-line interpolation in between for cell tracking;
//  * per-incident service durations are drawn from a sub-stream keyed by the
//    incident id, so they are identical whichever policy runs;
//  * when a unit frees with a non-empty queue it takes the front incident
//    immediately — no decision procedure runs for queued work.

namespace dispatch {

enum class PolicyKind { Greedy, Planner };

struct SimEventRecord {
  double time = 0.0;
  std::string kind;
  int responder_id = -1;
  long long incident_id = 0;
};

struct PerIncidentOutcome {
  long long id = 0;
  double reported_at = 0.0;
  double responded_at = 0.0;
  double response_s = 0.0;
  int responder_id = -1;
};

struct ReplayResult {
  std::vector<PerIncidentOutcome> outcomes;
  std::vector<double> decision_seconds;  // wall clock per planner/greedy decision
  size_t dispatch_count = 0;
  size_t queued_count = 0;  // incidents that waited for a free unit
};

struct ScenarioWorld {
  const Grid* grid = nullptr;
  const RoadGraph* graph = nullptr;
  const LandmarkTable* landmarks = nullptr;
  const SpeedProfiles* profiles = nullptr;
  const SurvivalModel* model = nullptr;
  Fleet fleet;
  std::vector<Incident> incidents;
  PlannerConfig planner;
  double service_mean_s = 20.0 * 60.0;
  uint64_t seed = 1;
};

namespace sim_detail {

enum class EvKind { IncidentReported, ResponderArrived, ServiceCompleted, ResponderReturned };

struct Event {
  double time;
  EvKind kind;
  uint64_t seq;  // FIFO among equal times
  int responder = -1;
  long long incident = 0;
  uint64_t leg = 0;  // guards stale arrivals after a re-dispatch

  bool operator>(const Event& o) const {
    if (time != o.time) return time > o.time;
    return seq > o.seq;
  }
};

struct UnitState {
  Responder r;
  // current motion leg, for position interpolation
  LatLon leg_from, leg_to;
  double leg_start = 0.0, leg_end = 0.0;
  uint64_t leg_id = 0;
  long long assigned_incident = 0;
  double avail_eta = 0.0;   // when the unit next frees (service end)
  double home_eta = 0.0;    // when it reaches the depot if undisturbed

  LatLon position(double t) const {
    if (leg_end <= leg_start || t >= leg_end) return leg_to;
    if (t <= leg_start) return leg_from;
    return interpolate(leg_from, leg_to, (t - leg_start) / (leg_end - leg_start));
  }
};

}  // namespace sim_detail

class ReplaySimulator {
 public:
  ReplaySimulator(const ScenarioWorld& world, TravelTimeCache& cache)
      : w_(world), cache_(cache) {
    w_.planner.service_mean_s = w_.service_mean_s;  // one authoritative knob
  }

  ReplayResult run(PolicyKind policy, std::ostream* trace = nullptr) {
    using namespace sim_detail;
    w_.planner.validate();
    init_units();
    history_.clear();
    counts_ = IncidentCountTracker(w_.grid->size());
    last_weather_.reset();
    pending_.clear();
    ReplayResult res;

    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events;
    uint64_t seq = 0;
    for (const auto& inc : w_.incidents)
      events.push(Event{inc.occurred_at, EvKind::IncidentReported, seq++, -1, inc.id});

    std::map<long long, const Incident*> by_id;
    for (const auto& inc : w_.incidents) by_id[inc.id] = &inc;

    while (!events.empty()) {
      const Event ev = events.top();
      events.pop();
      const double now = ev.time;

      switch (ev.kind) {
        case EvKind::IncidentReported: {
          const Incident& inc = *by_id.at(ev.incident);
          note_incident(inc);
          pending_.push_back(inc);
          if (any_unit_available()) {
            // decision epoch: the queue must have been empty
            const Incident& head = pending_.front();
            const auto t0 = std::chrono::steady_clock::now();
            const int rid = decide(policy, head, now, trace);
            const auto t1 = std::chrono::steady_clock::now();
            res.decision_seconds.push_back(
                std::chrono::duration<double>(t1 - t0).count());
            pending_.pop_front();
            dispatch_unit(rid, head, now, events, seq, res);
          } else {
            ++res.queued_count;
          }
          break;
        }
        case EvKind::ResponderArrived: {
          UnitState& u = units_[static_cast<size_t>(ev.responder)];
          if (ev.leg != u.leg_id) break;  // superseded
          set_status(u, ResponderStatus::Servicing);
          u.r.location = u.leg_to;
          const Incident& inc = *by_id.at(ev.incident);
          record_response(res, inc, now, u.r.id);
          const double service = service_duration(inc.id);
          u.avail_eta = now + service;
          events.push(Event{now + service, EvKind::ServiceCompleted, seq++, u.r.id,
                            ev.incident, u.leg_id});
          break;
        }
        case EvKind::ServiceCompleted: {
          UnitState& u = units_[static_cast<size_t>(ev.responder)];
          set_status(u, ResponderStatus::ReturningToDepot);
          const LatLon from = u.leg_to;  // the incident site
          const LatLon home = depot_of(u.r.depot_id).location;
          const double back = cache_.travel_seconds(from, home, now);
          start_leg(u, from, home, now, now + back);
          u.home_eta = now + back;
          events.push(Event{now + back, EvKind::ResponderReturned, seq++, u.r.id, 0,
                            u.leg_id});
          // FIFO rule: a freeing unit takes the front of the queue directly.
          if (!pending_.empty()) {
            const Incident head = pending_.front();
            pending_.pop_front();
            dispatch_unit(u.r.id, head, now, events, seq, res);
          }
          break;
        }
        case EvKind::ResponderReturned: {
          UnitState& u = units_[static_cast<size_t>(ev.responder)];
          if (ev.leg != u.leg_id) break;  // re-dispatched on the way home
          set_status(u, ResponderStatus::IdleAtDepot);
          u.r.location = depot_of(u.r.depot_id).location;
          break;
        }
      }
    }
    return res;
  }

  TravelTimeCache& cache() { return cache_; }

 private:
  using Event = sim_detail::Event;
  using UnitState = sim_detail::UnitState;

  void init_units() {
    units_.clear();
    for (const auto& r : w_.fleet.responders) {
      sim_detail::UnitState u;
      u.r = r;
      u.r.status = ResponderStatus::IdleAtDepot;
      u.r.location = depot_of(r.depot_id).location;
      u.leg_from = u.leg_to = u.r.location;
      units_.push_back(u);
    }
  }

  const Depot& depot_of(int depot_id) const {
    for (const auto& d : w_.fleet.depots)
      if (d.id == depot_id) return d;
    throw IntegrityError("responder references unknown depot " +
                         std::to_string(depot_id));
  }

  void note_incident(const Incident& inc) {
    history_.push_back(inc);
    counts_.push(inc.grid_id, inc.occurred_at);
    if (inc.temp_c && inc.rain_mm) last_weather_ = Weather{*inc.temp_c, *inc.rain_mm};
  }

  bool any_unit_available() const {
    for (const auto& u : units_)
      if (is_available(u.r)) return true;
    return false;
  }

  double service_duration(long long incident_id) {
    Rng rng(derive_seed(w_.seed, "service", static_cast<uint64_t>(incident_id)));
    return rng.exponential(w_.service_mean_s);
  }

  void set_status(UnitState& u, ResponderStatus to) {
    if (!legal_transition(u.r.status, to))
      throw ContractViolation(std::string("illegal responder transition ") +
                              to_string(u.r.status) + " -> " + to_string(to));
    u.r.status = to;
  }

  void start_leg(UnitState& u, const LatLon& from, const LatLon& to, double t0,
                 double t1) {
    u.leg_from = from;
    u.leg_to = to;
    u.leg_start = t0;
    u.leg_end = t1;
    ++u.leg_id;
  }

  // Positions the policies see: cell centroids, the cache's own resolution.
  LatLon discretized(const LatLon& p) const {
    return w_.grid->cell(w_.grid->cell_of(p)).centroid;
  }

  int decide(PolicyKind policy, const Incident& head, double now,
             std::ostream* trace) {
    if (policy == PolicyKind::Greedy) {
      std::vector<Responder> view;
      view.reserve(units_.size());
      for (const auto& u : units_) {
        Responder r = u.r;
        r.location = discretized(u.position(now));
        view.push_back(r);
      }
      const auto choice = nearest_euclidean(view, discretized(head.location));
      if (!choice) throw ContractViolation("greedy decide called with no free unit");
      return *choice;
    }

    DispatchState state = planner_state(head, now);
    GeneratorContext gen;
    gen.grid = w_.grid;
    gen.model = w_.model;
    gen.counts = counts_;
    gen.weather = last_weather_;
    DecisionTrace tr;
    const auto t0 = std::chrono::steady_clock::now();
    const auto action = dispatch_decision(
        state, w_.planner, gen,
        derive_seed(w_.seed, "decision", static_cast<uint64_t>(head.id)), cache_,
        trace ? &tr : nullptr);
    tr.compute_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!action) throw ContractViolation("planner declined with a free unit");
    if (trace) write_trace(*trace, tr);
    return action->responder_id;
  }

  DispatchState planner_state(const Incident& head, double now) {
    DispatchState s;
    s.now = now;
    s.pending.push_back(PendingIncident{head.id, head.grid_id,
                                        discretized(head.location),
                                        head.occurred_at});
    for (const auto& u : units_) {
      PlannerResponder pr;
      pr.id = u.r.id;
      pr.depot_loc = discretized(depot_of(u.r.depot_id).location);
      if (is_available(u.r)) {
        pr.avail_at = now;
        pr.avail_loc = discretized(u.position(now));
        pr.home_at = u.r.status == ResponderStatus::ReturningToDepot
                         ? u.home_eta
                         : now;
      } else {
        // Busy: frees at the scene once service ends.  A unit still driving
        // has no service event yet, so estimate with the configured mean.
        pr.avail_at = u.r.status == ResponderStatus::EnRouteToIncident
                          ? u.leg_end + w_.service_mean_s
                          : u.avail_eta;
        pr.avail_loc = discretized(u.leg_to);
        pr.home_at = pr.avail_at +
                     cache_.travel_seconds(pr.avail_loc, pr.depot_loc, pr.avail_at);
      }
      s.fleet.push_back(pr);
    }
    return s;
  }

  void dispatch_unit(int rid, const Incident& inc, double now,
                     std::priority_queue<Event, std::vector<Event>, std::greater<Event>>& events,
                     uint64_t& seq, ReplayResult& res) {
    UnitState* u = nullptr;
    for (auto& cand : units_)
      if (cand.r.id == rid) u = &cand;
    if (!u || !is_available(u->r))
      throw ContractViolation("dispatch of a busy or unknown unit");
    const LatLon from = u->position(now);
    const double travel =
        cache_.travel_seconds(from, inc.location, now) + w_.planner.dispatch_offset_s;
    set_status(*u, ResponderStatus::EnRouteToIncident);
    start_leg(*u, from, inc.location, now, now + travel);
    u->assigned_incident = inc.id;
    u->avail_eta = now + travel;  // refreshed at arrival with the service draw
    events.push(Event{now + travel, sim_detail::EvKind::ResponderArrived, seq++,
                      rid, inc.id, u->leg_id});
    ++res.dispatch_count;
  }

  void record_response(ReplayResult& res, const Incident& inc, double now, int rid) {
    PerIncidentOutcome o;
    o.id = inc.id;
    o.reported_at = inc.occurred_at;
    o.responded_at = now;
    o.response_s = now - inc.occurred_at;
    o.responder_id = rid;
    res.outcomes.push_back(o);
  }

  void write_trace(std::ostream& out, const DecisionTrace& tr) const {
    nlohmann::json j;
    j["incident_id"] = tr.incident_id;
    j["decided_at"] = format_iso8601(tr.decided_at);
    j["candidates"] = tr.candidate_responders;
    j["candidate_response_s"] = tr.candidate_response_s;
    j["forced"] = tr.forced;
    j["chosen"] = tr.chosen_responder;
    j["compute_us"] = tr.compute_seconds * 1e6;
    if (!tr.per_chain_costs.empty()) {
      nlohmann::json chains = nlohmann::json::array();
      for (const auto& m : tr.per_chain_costs) {
        nlohmann::json c;
        for (const auto& [rid, cost] : m) c[std::to_string(rid)] = cost;
        chains.push_back(c);
      }
      j["per_chain_costs"] = chains;
      nlohmann::json totals;
      for (const auto& [rid, cost] : tr.total_costs) totals[std::to_string(rid)] = cost;
      j["total_costs"] = totals;
    }
    out << j.dump() << '\n';
  }

  ScenarioWorld w_;
  TravelTimeCache& cache_;
  std::vector<UnitState> units_;
  std::deque<Incident> pending_;
  std::vector<Incident> history_;
  IncidentCountTracker counts_;
  std::optional<Weather> last_weather_;
};

inline ReplayResult run_replay(const ScenarioWorld& world, TravelTimeCache& cache,
                               PolicyKind policy, std::ostream* trace = nullptr) {
  ReplaySimulator sim(world, cache);
  return sim.run(policy, trace);
}

// ---------------------------------------------------------------------------

struct ComparisonRow {
  long long incident_id = 0;
  double base_response_s = 0.0;
  double planner_response_s = 0.0;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  size_t incident_count = 0;
  size_t impacted_count = 0;  // rows where the response times differ
  double mean_savings_on_impacted_s = 0.0;  // base minus planner, impacted only
  double mean_base_response_s = 0.0;
  double mean_planner_response_s = 0.0;
  double mean_decision_compute_s = 0.0;  // planner decisions
  std::vector<double> improved_savings_s;   // planner strictly faster
  std::vector<double> worsened_increase_s;  // planner strictly slower
  nlohmann::json config_echo;
};

inline ComparisonReport compare_policies(const ScenarioWorld& world,
                                         TravelTimeCache& cache,
                                         std::ostream* planner_trace = nullptr) {
  const ReplayResult base = run_replay(world, cache, PolicyKind::Greedy);
  const ReplayResult plan = run_replay(world, cache, PolicyKind::Planner, planner_trace);

  std::map<long long, const PerIncidentOutcome*> base_by;
  for (const auto& o : base.outcomes) base_by[o.id] = &o;

  ComparisonReport rep;
  double sum_sav = 0.0, sum_base = 0.0, sum_plan = 0.0;
  for (const auto& p : plan.outcomes) {
    auto it = base_by.find(p.id);
    if (it == base_by.end())
      throw ContractViolation("policy runs disagree on the incident set");
    const double b = it->second->response_s;
    rep.rows.push_back(ComparisonRow{p.id, b, p.response_s});
    sum_base += b;
    sum_plan += p.response_s;
    if (b != p.response_s) {
      ++rep.impacted_count;
      sum_sav += b - p.response_s;
      if (p.response_s < b)
        rep.improved_savings_s.push_back(b - p.response_s);
      else
        rep.worsened_increase_s.push_back(p.response_s - b);
    }
  }
  rep.incident_count = rep.rows.size();
  if (rep.impacted_count > 0)
    rep.mean_savings_on_impacted_s = sum_sav / static_cast<double>(rep.impacted_count);
  if (!rep.rows.empty()) {
    rep.mean_base_response_s = sum_base / static_cast<double>(rep.rows.size());
    rep.mean_planner_response_s = sum_plan / static_cast<double>(rep.rows.size());
  }
  if (!plan.decision_seconds.empty()) {
    double s = 0.0;
    for (double d : plan.decision_seconds) s += d;
    rep.mean_decision_compute_s = s / static_cast<double>(plan.decision_seconds.size());
  }
  std::sort(rep.improved_savings_s.begin(), rep.improved_savings_s.end());
  std::sort(rep.worsened_increase_s.begin(), rep.worsened_increase_s.end());
  return rep;
}

inline void write_report_csv(const std::string& path, const ComparisonReport& rep) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  for (const std::string& line :
       split(rep.config_echo.dump(), '\n'))  // single line, kept for symmetry
    out << "# " << line << '\n';
  out << "incident_id,base_response_s,planner_response_s\n";
  for (const auto& r : rep.rows)
    out << r.incident_id << ',' << format_full(r.base_response_s) << ','
        << format_full(r.planner_response_s) << '\n';
}

inline void write_report_json(const std::string& path, const ComparisonReport& rep) {
  nlohmann::json j;
  j["config"] = rep.config_echo;
  j["incident_count"] = rep.incident_count;
  j["impacted_count"] = rep.impacted_count;
  j["mean_savings_on_impacted_s"] = rep.mean_savings_on_impacted_s;
  j["mean_base_response_s"] = rep.mean_base_response_s;
  j["mean_planner_response_s"] = rep.mean_planner_response_s;
  j["timing"] = {{"mean_decision_compute_s", rep.mean_decision_compute_s}};
  j["improved_savings_s"] = rep.improved_savings_s;
  j["worsened_increase_s"] = rep.worsened_increase_s;
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace dispatch
