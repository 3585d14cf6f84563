#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dispatch/chain_gen.hpp"
#include "dispatch/errors.hpp"
#include "dispatch/fleet.hpp"
#include "dispatch/travel_cache.hpp"

// Non-myopic dispatch.  Each decision simulates the fleet forward against b
// sampled incident chains, expanding a search tree whose edges are dispatch
// choices; a node's utility is a discounted running average of the response
// times along its branch.  The action with the lowest summed utility across
// chains wins.  Two knobs bound the effort: epsilon keeps only candidate
// responders within a factor of the myopic best, and h_s caps the depth at
// which the tree may still branch (beyond it each step is forced greedy).

namespace dispatch {

struct PlannerConfig {
  int b = 10;             // sampled chains per decision
  double epsilon = 1.5;   // candidate pruning factor (>= 1)
  int h_s = 1;            // stochastic (branching) depth
  int h = 4;              // total tree depth, >= h_s
  double gamma = 0.9;     // discount per minute of response time
  bool gamma_per_second = false;  // discount exponent in seconds instead
  double chain_horizon_s = 6.0 * kSecondsPerHour;
  double service_mean_s = 20.0 * 60.0;  // rollout service-time model
  double dispatch_offset_s = 0.0;       // fixed dispatch latency, usually 0

  void validate() const {
    if (b < 1) throw ConfigError("planner: b must be >= 1");
    if (epsilon < 1.0) throw ConfigError("planner: epsilon must be >= 1");
    if (h_s < 0) throw ConfigError("planner: h_s must be >= 0");
    if (h < h_s) throw ConfigError("planner: h must be >= h_s");
    if (!(gamma > 0.0) || gamma > 1.0)
      throw ConfigError("planner: gamma must be in (0, 1]");
    if (!(chain_horizon_s > 0.0)) throw ConfigError("planner: bad chain horizon");
    if (!(service_mean_s > 0.0)) throw ConfigError("planner: bad service mean");
  }
};

struct PendingIncident {
  long long id = 0;
  int grid_id = -1;
  LatLon location;
  double occurred_at = 0.0;
};

// Fleet view used inside rollouts.  avail_at is the next moment the unit can
// be dispatched (now, if free); after it frees at avail_loc it drifts home,
// reaching the depot at home_at.
struct PlannerResponder {
  int id = -1;
  LatLon depot_loc;
  double avail_at = 0.0;
  LatLon avail_loc;
  double home_at = 0.0;

  bool available(double t) const { return avail_at <= t; }

  LatLon location_at(double t) const {
    if (t <= avail_at) return avail_loc;
    if (t >= home_at || home_at <= avail_at) return depot_loc;
    return interpolate(avail_loc, depot_loc, (t - avail_at) / (home_at - avail_at));
  }
};

struct DispatchState {
  double now = 0.0;
  std::deque<PendingIncident> pending;  // FIFO waiting line, front is next
  std::vector<PlannerResponder> fleet;
  size_t chain_pos = 0;      // sampled incidents consumed so far
  bool terminal = false;     // chain exhausted and nothing pending
  double last_response_s = 0.0;  // response time of the action just applied
  double last_elapsed_s = 0.0;   // clock advance of the last transition
};

struct DispatchAction {
  int responder_id = -1;
  long long incident_id = 0;
};

struct TreeNode {
  DispatchState state;
  double cost = 0.0;  // discounted running average of response seconds
  int depth = 0;
  double elapsed = 0.0;
};

// Runtime context shared by the planner ops.
struct PlannerRuntime {
  const PlannerConfig* cfg = nullptr;
  TravelTimeCache* cache = nullptr;
};

inline const PlannerResponder& responder_by_id(const DispatchState& s, int id) {
  for (const auto& r : s.fleet)
    if (r.id == id) return r;
  throw ContractViolation("unknown responder id " + std::to_string(id));
}

// Expected travel time for the given unit to the pending incident at the
// front of the queue, at the state's clock.  This is the action weight used
// for candidate pruning.
inline double response_time(const DispatchState& s, const DispatchAction& a,
                            PlannerRuntime rt) {
  if (s.pending.empty())
    throw ContractViolation("response_time: no pending incident");
  const PlannerResponder& r = responder_by_id(s, a.responder_id);
  if (!r.available(s.now))
    throw InfeasibleAction("responder " + std::to_string(r.id) + " is busy");
  try {
    return rt.cache->travel_seconds(r.location_at(s.now), s.pending.front().location,
                                    s.now) +
           rt.cfg->dispatch_offset_s;
  } catch (const NoRoute& e) {
    throw InfeasibleAction(std::string("unreachable incident: ") + e.what());
  }
}

// Candidate actions for the front incident: every free unit within epsilon
// of the myopic best, or just the best once past the stochastic depth.
// Sorted by responder id; the myopic best is always a member.
inline std::vector<DispatchAction> select_candidate_actions(const DispatchState& s,
                                                            int d,
                                                            PlannerRuntime rt) {
  if (s.pending.empty())
    throw ContractViolation("select_candidate_actions: no pending incident");
  const long long inc = s.pending.front().id;
  std::vector<std::pair<double, DispatchAction>> weighted;
  for (const auto& r : s.fleet) {
    if (!r.available(s.now)) continue;
    DispatchAction a{r.id, inc};
    weighted.emplace_back(response_time(s, a, rt), a);
  }
  if (weighted.empty())
    throw EmptyActionSet("no free responder; incident must queue");
  std::sort(weighted.begin(), weighted.end(),
            [](const auto& x, const auto& y) {
              return x.second.responder_id < y.second.responder_id;
            });
  size_t best = 0;
  for (size_t i = 1; i < weighted.size(); ++i)
    if (weighted[i].first < weighted[best].first) best = i;  // ties keep low id

  std::vector<DispatchAction> out;
  if (d >= rt.cfg->h_s) {
    out.push_back(weighted[best].second);
    return out;
  }
  const double cutoff = rt.cfg->epsilon * weighted[best].first;
  for (const auto& [w, a] : weighted)
    if (w <= cutoff) out.push_back(a);
  return out;
}

// The utility recurrence: a parent utility u_p absorbs a response time t at
// depth d as  u_p + gamma^t * (t - u_p) / (d + 1),  a discounted step toward
// the running average of the branch's response times.
inline double utility_update(double u_p, double gamma, double t, int d) {
  return u_p + std::pow(gamma, t) * (t - u_p) / (d + 1);
}

namespace detail {

// gamma is configured per minute of response time; folding the unit change
// into the base keeps utilities in seconds: gamma^(t_min) == (gamma^(1/60))^(t_sec).
inline double effective_gamma(const PlannerConfig& cfg) {
  return cfg.gamma_per_second ? cfg.gamma : std::pow(cfg.gamma, 1.0 / 60.0);
}

inline bool any_available(const DispatchState& s, double t) {
  for (const auto& r : s.fleet)
    if (r.available(t)) return true;
  return false;
}

}  // namespace detail

// One SMDP transition: apply the dispatch (or none, legal only when every
// unit is busy), then advance the clock through queueing and chain arrivals
// until the next epoch at which a dispatch decision is possible — an incident
// waiting and at least one unit free — or until the chain is exhausted and
// the queue drained (terminal).  Rollout service times use the configured
// mean; travel runs through the shared cache.
inline DispatchState update_state(const DispatchState& s,
                                  const std::optional<DispatchAction>& action,
                                  const IncidentChain& chain, PlannerRuntime rt) {
  DispatchState ns = s;
  ns.last_response_s = 0.0;

  if (action) {
    if (ns.pending.empty())
      throw ContractViolation("update_state: dispatch with empty queue");
    const PendingIncident inc = ns.pending.front();
    PlannerResponder* r = nullptr;
    for (auto& cand : ns.fleet)
      if (cand.id == action->responder_id) r = &cand;
    if (!r) throw ContractViolation("update_state: unknown responder");
    if (!r->available(ns.now))
      throw InfeasibleAction("update_state: responder is busy");
    ns.pending.pop_front();

    double travel;
    try {
      travel = rt.cache->travel_seconds(r->location_at(ns.now), inc.location, ns.now) +
               rt.cfg->dispatch_offset_s;
    } catch (const NoRoute& e) {
      throw InfeasibleAction(std::string("unreachable incident: ") + e.what());
    }
    // response time includes any time already spent waiting in the queue
    ns.last_response_s = (ns.now - inc.occurred_at) + travel;
    const double arrive = ns.now + travel;
    const double service_end = arrive + rt.cfg->service_mean_s;
    const double return_travel =
        rt.cache->travel_seconds(inc.location, r->depot_loc, service_end);
    r->avail_at = service_end;
    r->avail_loc = inc.location;
    r->home_at = service_end + return_travel;
  } else if (detail::any_available(ns, ns.now)) {
    throw ContractViolation("update_state: declined to dispatch with a free unit");
  }

  // advance to the next decision epoch
  for (;;) {
    if (!ns.pending.empty() && detail::any_available(ns, ns.now)) break;

    double next_chain = std::numeric_limits<double>::infinity();
    if (ns.chain_pos < chain.size())
      next_chain = chain.events[ns.chain_pos].occurred_at;

    double next_free = std::numeric_limits<double>::infinity();
    if (!ns.pending.empty()) {
      for (const auto& r : ns.fleet)
        if (r.avail_at > ns.now) next_free = std::min(next_free, r.avail_at);
    }

    const double t = std::min(next_chain, next_free);
    if (!std::isfinite(t)) {
      ns.terminal = true;  // nothing pending, nothing coming
      break;
    }
    ns.now = std::max(ns.now, t);
    if (t == next_chain) {
      const ChainEvent& ev = chain.events[ns.chain_pos++];
      ns.pending.push_back(
          PendingIncident{-static_cast<long long>(ns.chain_pos),  // synthetic id
                          ev.grid_id, ev.location, ev.occurred_at});
    }
  }
  ns.last_elapsed_s = ns.now - s.now;
  return ns;
}

// Depth-first minimization over the remaining decisions of one chain.
// Past the total horizon — or once no further decision can occur — a node
// yields its own accumulated cost.
inline double create_state_tree(const TreeNode& node, const IncidentChain& chain,
                                int d, PlannerRuntime rt) {
  if (d > rt.cfg->h) return node.cost;
  if (node.state.terminal || node.state.pending.empty()) return node.cost;
  const auto actions = select_candidate_actions(node.state, d, rt);
  const int d_next = d + 1;
  const double gamma = detail::effective_gamma(*rt.cfg);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& a : actions) {
    const DispatchState next = update_state(node.state, a, chain, rt);
    const double cost =
        utility_update(node.cost, gamma, next.last_response_s, d_next);
    const TreeNode child{next, cost, d_next, next.last_elapsed_s};
    best = std::min(best, create_state_tree(child, chain, d_next, rt));
  }
  return best;
}

// Evaluate every root candidate against one sampled chain.  Each candidate's
// tree is rooted at the post-dispatch state, seeded with the immediate
// response time as its utility.
inline std::map<int, double> chain_evaluation(const IncidentChain& chain,
                                              const DispatchState& s, int d,
                                              const std::vector<DispatchAction>& candidates,
                                              PlannerRuntime rt) {
  std::map<int, double> utilities;
  const int d_root = d + 1;
  for (const auto& a : candidates) {
    const DispatchState next = update_state(s, a, chain, rt);
    const TreeNode root{next, next.last_response_s, d_root, next.last_elapsed_s};
    utilities[a.responder_id] = create_state_tree(root, chain, d_root, rt);
  }
  return utilities;
}

struct DecisionTrace {
  long long incident_id = 0;
  double decided_at = 0.0;
  std::vector<int> candidate_responders;
  std::vector<double> candidate_response_s;
  std::vector<std::map<int, double>> per_chain_costs;
  std::map<int, double> total_costs;
  int chosen_responder = -1;
  bool forced = false;    // single candidate, no search ran
  bool enqueued = false;  // no free unit at all
  double compute_seconds = 0.0;
};

// Top-level decision for the incident at the front of state.pending.
// Returns the dispatch, or nothing when every unit is busy (the caller
// queues the incident).  Deterministic given (state, config, seed): chains
// are evaluated independently (possibly in parallel) and reduced in chain
// order; cost ties fall to the lowest responder id.
inline std::optional<DispatchAction> dispatch_decision(
    const DispatchState& state, const PlannerConfig& cfg,
    const GeneratorContext& gen, uint64_t seed, TravelTimeCache& cache,
    DecisionTrace* trace = nullptr) {
  cfg.validate();
  if (state.pending.empty())
    throw ContractViolation("dispatch_decision: no pending incident");
  PlannerRuntime rt{&cfg, &cache};

  if (trace) {
    trace->incident_id = state.pending.front().id;
    trace->decided_at = state.now;
  }
  if (!detail::any_available(state, state.now)) {
    if (trace) trace->enqueued = true;
    return std::nullopt;  // dispatch compulsion: only a full fleet may queue
  }

  const auto candidates = select_candidate_actions(state, 0, rt);
  if (trace) {
    for (const auto& a : candidates) {
      trace->candidate_responders.push_back(a.responder_id);
      trace->candidate_response_s.push_back(response_time(state, a, rt));
    }
  }
  if (candidates.size() == 1) {
    if (trace) {
      trace->forced = true;
      trace->chosen_responder = candidates[0].responder_id;
    }
    return candidates[0];
  }

  const auto chains =
      generate_chains(cfg.b, gen, state.now, cfg.chain_horizon_s, seed);

  std::vector<std::map<int, double>> per_chain(chains.size());
  {
    std::vector<std::future<std::map<int, double>>> futures;
    futures.reserve(chains.size());
    for (size_t i = 0; i < chains.size(); ++i)
      futures.push_back(std::async(std::launch::async, [&, i] {
        return chain_evaluation(chains[i], state, 0, candidates, rt);
      }));
    for (size_t i = 0; i < futures.size(); ++i) per_chain[i] = futures[i].get();
  }

  std::map<int, double> total;
  for (const auto& a : candidates) total[a.responder_id] = 0.0;
  for (const auto& u : per_chain)  // fixed reduction order
    for (const auto& [rid, cost] : u) total[rid] += cost;

  int best_id = candidates.front().responder_id;
  double best_cost = total[best_id];
  for (const auto& a : candidates) {
    const double c = total[a.responder_id];
    if (c < best_cost) {  // ties keep the earlier (lower) id
      best_cost = c;
      best_id = a.responder_id;
    }
  }
  if (trace) {
    trace->per_chain_costs = per_chain;
    trace->total_costs = total;
    trace->chosen_responder = best_id;
  }
  return DispatchAction{best_id, state.pending.front().id};
}

}  // namespace dispatch
