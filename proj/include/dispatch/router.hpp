#pragma once

#include <algorithm>
#include <queue>
#include <vector>

#include "dispatch/landmarks.hpp"
#include "dispatch/road_graph.hpp"
#include "dispatch/speed_model.hpp"

namespace dispatch {

struct RouteResult {
  std::vector<int> path;  // node indices, src..dst inclusive
  double seconds = 0.0;
  int settled = 0;  // nodes expanded, for efficiency checks
};

// Goal-directed shortest path under time-dependent edge weights, frozen at
// the departure time: every edge is charged length / predicted_speed for the
// departure's time bin.  The heuristic is the landmark freeflow bound scaled
// by the profile's minimum predicted/freeflow time ratio, which keeps it a
// valid lower bound even where observed speeds exceed freeflow; with that
// scaling the heuristic is consistent, so every node is settled at most once
// and the result is exact.
inline RouteResult alt_shortest_path(const RoadGraph& g, const LandmarkTable& lm,
                                     const SpeedProfiles& profiles, int src,
                                     int dst, double depart_time) {
  RouteResult res;
  if (src == dst) {
    res.path = {src};
    return res;
  }
  const double scale = profiles.min_time_ratio();
  const size_t n = static_cast<size_t>(g.node_count());
  std::vector<double> dist(n, kInf);
  std::vector<int> parent(n, -1);
  std::vector<char> closed(n, 0);

  auto h = [&](int v) { return scale * lm.freeflow_bound(v, dst); };

  using Entry = std::pair<double, int>;  // (f = g + h, node)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> open;
  dist[static_cast<size_t>(src)] = 0.0;
  open.emplace(h(src), src);

  while (!open.empty()) {
    auto [f, u] = open.top();
    open.pop();
    if (closed[static_cast<size_t>(u)]) continue;
    closed[static_cast<size_t>(u)] = 1;
    ++res.settled;
    if (u == dst) break;
    for (int ei : g.out_edges(u)) {
      const RoadEdge& e = g.edges()[static_cast<size_t>(ei)];
      const double w =
          e.length_m / mph_to_mps(profiles.predict(e.segment_id, depart_time));
      const double nd = dist[static_cast<size_t>(u)] + w;
      if (nd < dist[static_cast<size_t>(e.to)]) {
        dist[static_cast<size_t>(e.to)] = nd;
        parent[static_cast<size_t>(e.to)] = u;
        open.emplace(nd + h(e.to), e.to);
      }
    }
  }

  if (!closed[static_cast<size_t>(dst)])
    throw NoRoute("no route from node " + std::to_string(g.node(src).id) +
                  " to node " + std::to_string(g.node(dst).id));
  res.seconds = dist[static_cast<size_t>(dst)];
  for (int v = dst; v != -1; v = parent[static_cast<size_t>(v)])
    res.path.push_back(v);
  std::reverse(res.path.begin(), res.path.end());
  return res;
}

}  // namespace dispatch
