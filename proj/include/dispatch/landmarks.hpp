#pragma once

#include <algorithm>
#include <fstream>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "dispatch/csv.hpp"
#include "dispatch/rng.hpp"
#include "dispatch/road_graph.hpp"

namespace dispatch {

constexpr double kInf = std::numeric_limits<double>::infinity();

namespace detail {

// Plain Dijkstra over freeflow travel times, forward or reverse.
inline std::vector<double> freeflow_sssp(const RoadGraph& g, int source,
                                         bool reverse) {
  std::vector<double> dist(static_cast<size_t>(g.node_count()), kInf);
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
  dist[static_cast<size_t>(source)] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[static_cast<size_t>(u)]) continue;
    const auto& edge_ids = reverse ? g.in_edges(u) : g.out_edges(u);
    for (int ei : edge_ids) {
      const RoadEdge& e = g.edges()[static_cast<size_t>(ei)];
      const int v = reverse ? e.from : e.to;
      const double nd = d + g.freeflow_seconds(e);
      if (nd < dist[static_cast<size_t>(v)]) {
        dist[static_cast<size_t>(v)] = nd;
        heap.emplace(nd, v);
      }
    }
  }
  return dist;
}

}  // namespace detail

// Precomputed freeflow distances to and from k landmark nodes, used as
// goal-directed lower bounds by the router.  Landmarks are chosen by
// farthest-point traversal: the first is a seed-derived node, each next one
// maximizes the round-trip freeflow distance to the chosen set.
class LandmarkTable {
 public:
  LandmarkTable() = default;

  static LandmarkTable select(const RoadGraph& g, int k, uint64_t seed) {
    if (k <= 0) throw ConfigError("landmark count must be positive");
    k = std::min(k, g.node_count());
    LandmarkTable t;
    Rng rng(derive_seed(seed, "landmarks"));
    int first = static_cast<int>(rng.uniform_int(0, g.node_count() - 1));
    t.add_landmark(g, first);
    while (static_cast<int>(t.landmarks_.size()) < k) {
      // score(v) = min over chosen landmarks of fwd(L->v) + bwd(v->L);
      // unreachable counts as infinitely far so isolated components get
      // a landmark of their own eventually.
      int best = -1;
      double best_score = -1.0;
      for (int v = 0; v < g.node_count(); ++v) {
        if (t.is_landmark(v)) continue;
        double score = kInf;
        for (size_t li = 0; li < t.landmarks_.size(); ++li) {
          const double d = t.fwd_[li][static_cast<size_t>(v)] +
                           t.bwd_[li][static_cast<size_t>(v)];
          score = std::min(score, d);
        }
        if (score > best_score) {
          best_score = score;
          best = v;
        }
      }
      if (best < 0) break;
      t.add_landmark(g, best);
    }
    return t;
  }

  int count() const { return static_cast<int>(landmarks_.size()); }
  const std::vector<int>& landmark_nodes() const { return landmarks_; }
  double fwd(int li, int v) const { return fwd_[static_cast<size_t>(li)][static_cast<size_t>(v)]; }
  double bwd(int li, int v) const { return bwd_[static_cast<size_t>(li)][static_cast<size_t>(v)]; }

  bool is_landmark(int v) const {
    return std::find(landmarks_.begin(), landmarks_.end(), v) != landmarks_.end();
  }

  // Freeflow lower bound on travel time v -> dst via the triangle
  // inequality, the classic two-sided landmark bound.
  double freeflow_bound(int v, int dst) const {
    double best = 0.0;
    for (size_t li = 0; li < landmarks_.size(); ++li) {
      const double ld = fwd_[li][static_cast<size_t>(dst)];
      const double lv = fwd_[li][static_cast<size_t>(v)];
      if (std::isfinite(ld) && std::isfinite(lv)) best = std::max(best, ld - lv);
      const double vl = bwd_[li][static_cast<size_t>(v)];
      const double dl = bwd_[li][static_cast<size_t>(dst)];
      if (std::isfinite(vl) && std::isfinite(dl)) best = std::max(best, vl - dl);
    }
    return best;
  }

  void save(const std::string& path, const RoadGraph& g) const {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << "dispatch-landmarks v1\n";
    out << "count " << count() << " nodes " << g.node_count() << '\n';
    for (size_t li = 0; li < landmarks_.size(); ++li) {
      out << "landmark " << g.node(landmarks_[li]).id << '\n';
      for (int v = 0; v < g.node_count(); ++v)
        out << format_full(fwd_[li][static_cast<size_t>(v)]) << ' '
            << format_full(bwd_[li][static_cast<size_t>(v)]) << '\n';
    }
  }

  static LandmarkTable load(const std::string& path, const RoadGraph& g) {
    const auto lines = read_lines(path);
    if (lines.empty() || trim(lines[0]) != "dispatch-landmarks v1")
      throw FormatError(path + ": not a v1 landmark file");
    LandmarkTable t;
    size_t i = 1;
    const auto hdr = split(trim(lines[i]), ' ');
    if (hdr.size() != 4 || hdr[0] != "count" || hdr[2] != "nodes")
      throw FormatError(path + ": bad header");
    const int k = static_cast<int>(parse_int(hdr[1], "count", i + 1));
    const int n = static_cast<int>(parse_int(hdr[3], "nodes", i + 1));
    if (n != g.node_count())
      throw IntegrityError(path + ": table built for a different graph");
    ++i;
    for (int li = 0; li < k; ++li) {
      const auto lm = split(trim(lines.at(i)), ' ');
      if (lm.size() != 2 || lm[0] != "landmark")
        throw FormatError(path + ": expected landmark header at line " +
                          std::to_string(i + 1));
      t.landmarks_.push_back(g.index_of(
          static_cast<int>(parse_int(lm[1], "landmark id", i + 1))));
      ++i;
      std::vector<double> f(static_cast<size_t>(n)), b(static_cast<size_t>(n));
      for (int v = 0; v < n; ++v, ++i) {
        const auto row = split(trim(lines.at(i)), ' ');
        if (row.size() != 2)
          throw FormatError(path + ": bad table row at line " + std::to_string(i + 1));
        f[static_cast<size_t>(v)] = parse_double(row[0], "fwd", i + 1);
        b[static_cast<size_t>(v)] = parse_double(row[1], "bwd", i + 1);
      }
      t.fwd_.push_back(std::move(f));
      t.bwd_.push_back(std::move(b));
    }
    return t;
  }

 private:
  void add_landmark(const RoadGraph& g, int node) {
    landmarks_.push_back(node);
    fwd_.push_back(detail::freeflow_sssp(g, node, /*reverse=*/false));
    bwd_.push_back(detail::freeflow_sssp(g, node, /*reverse=*/true));
  }

  std::vector<int> landmarks_;             // node indices
  std::vector<std::vector<double>> fwd_;   // [landmark][node]  L -> v
  std::vector<std::vector<double>> bwd_;   // [landmark][node]  v -> L
};

}  // namespace dispatch
