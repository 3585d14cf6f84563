#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "dispatch/csv.hpp"
#include "dispatch/geo.hpp"

namespace dispatch {

struct RoadNode {
  int id = -1;
  LatLon pos;
};

struct RoadEdge {
  int from = -1, to = -1;  // node indices after loading
  double length_m = 0.0;
  int lanes = 1;
  double freeflow_mph = 0.0;
  int segment_id = -1;
};

// Directed road graph.  File format is plain text with two sections:
//
//   nodes
//   <id> <lat> <lon>
//   edges
//   <from_id> <to_id> <length_m> <lanes> <freeflow_mph> <segment_id>
//
// '#' lines are comments.  Node ids are arbitrary integers; edges refer to
// them and are re-indexed internally.
class RoadGraph {
 public:
  static RoadGraph load(const std::string& path) {
    return parse(read_lines(path), path);
  }

  static RoadGraph parse(const std::vector<std::string>& lines,
                         const std::string& what) {
    RoadGraph g;
    enum { None, Nodes, Edges } section = None;
    for (size_t i = 0; i < lines.size(); ++i) {
      const std::string line = trim(lines[i]);
      if (line.empty() || line[0] == '#') continue;
      if (line == "nodes") { section = Nodes; continue; }
      if (line == "edges") { section = Edges; continue; }
      const auto f = split_ws(line);
      const size_t line_no = i + 1;
      if (section == Nodes) {
        if (f.size() != 3)
          throw FormatError(what + " line " + std::to_string(line_no) +
                            ": node rows are <id> <lat> <lon>");
        RoadNode n;
        n.id = static_cast<int>(parse_int(f[0], "node id", line_no));
        n.pos.lat = parse_double(f[1], "lat", line_no);
        n.pos.lon = parse_double(f[2], "lon", line_no);
        if (g.id_to_index_.count(n.id))
          throw IntegrityError(what + ": duplicate node id " + std::to_string(n.id));
        g.id_to_index_[n.id] = static_cast<int>(g.nodes_.size());
        g.nodes_.push_back(n);
      } else if (section == Edges) {
        if (f.size() != 6)
          throw FormatError(what + " line " + std::to_string(line_no) +
                            ": edge rows are <from> <to> <length_m> <lanes> "
                            "<freeflow_mph> <segment_id>");
        RoadEdge e;
        const int from_id = static_cast<int>(parse_int(f[0], "from", line_no));
        const int to_id = static_cast<int>(parse_int(f[1], "to", line_no));
        auto fi = g.id_to_index_.find(from_id);
        auto ti = g.id_to_index_.find(to_id);
        if (fi == g.id_to_index_.end() || ti == g.id_to_index_.end())
          throw IntegrityError(what + " line " + std::to_string(line_no) +
                               ": edge references a missing node");
        e.from = fi->second;
        e.to = ti->second;
        e.length_m = parse_double(f[2], "length_m", line_no);
        e.lanes = static_cast<int>(parse_int(f[3], "lanes", line_no));
        e.freeflow_mph = parse_double(f[4], "freeflow_mph", line_no);
        e.segment_id = static_cast<int>(parse_int(f[5], "segment_id", line_no));
        if (!(e.length_m > 0.0) || !(e.freeflow_mph > 0.0))
          throw IntegrityError(what + " line " + std::to_string(line_no) +
                               ": length and freeflow speed must be positive");
        g.edges_.push_back(e);
        if (!g.segment_freeflow_.count(e.segment_id))
          g.segment_freeflow_[e.segment_id] = e.freeflow_mph;
      } else {
        throw FormatError(what + " line " + std::to_string(line_no) +
                          ": content before any section header");
      }
    }
    if (g.nodes_.empty()) throw FormatError(what + ": empty node section");
    g.build_adjacency();
    return g;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << "nodes\n";
    for (const auto& n : nodes_)
      out << n.id << ' ' << format_full(n.pos.lat) << ' '
          << format_full(n.pos.lon) << '\n';
    out << "edges\n";
    for (const auto& e : edges_)
      out << nodes_[e.from].id << ' ' << nodes_[e.to].id << ' '
          << format_full(e.length_m) << ' ' << e.lanes << ' '
          << format_full(e.freeflow_mph) << ' ' << e.segment_id << '\n';
  }

  int node_count() const { return static_cast<int>(nodes_.size()); }
  const RoadNode& node(int idx) const { return nodes_[static_cast<size_t>(idx)]; }
  const std::vector<RoadNode>& nodes() const { return nodes_; }
  const std::vector<RoadEdge>& edges() const { return edges_; }

  int index_of(int node_id) const {
    auto it = id_to_index_.find(node_id);
    if (it == id_to_index_.end())
      throw IntegrityError("unknown node id " + std::to_string(node_id));
    return it->second;
  }

  const std::vector<int>& out_edges(int idx) const {
    return out_edges_[static_cast<size_t>(idx)];
  }
  const std::vector<int>& in_edges(int idx) const {
    return in_edges_[static_cast<size_t>(idx)];
  }

  const std::unordered_map<int, double>& segment_freeflow() const {
    return segment_freeflow_;
  }

  double freeflow_seconds(const RoadEdge& e) const {
    return e.length_m / mph_to_mps(e.freeflow_mph);
  }

  // Straight-line nearest node; arbitrary coordinates snap here.
  int nearest_node(const LatLon& p) const {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < node_count(); ++i) {
      const double d = euclidean_m(nodes_[static_cast<size_t>(i)].pos, p);
      if (d < best_d) { best_d = d; best = i; }
    }
    return best;
  }

 private:
  static std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
      if (c == ' ' || c == '\t') {
        if (!cur.empty()) { out.push_back(cur); cur.clear(); }
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  }

  void build_adjacency() {
    out_edges_.assign(nodes_.size(), {});
    in_edges_.assign(nodes_.size(), {});
    for (size_t i = 0; i < edges_.size(); ++i) {
      out_edges_[static_cast<size_t>(edges_[i].from)].push_back(static_cast<int>(i));
      in_edges_[static_cast<size_t>(edges_[i].to)].push_back(static_cast<int>(i));
    }
  }

  std::vector<RoadNode> nodes_;
  std::vector<RoadEdge> edges_;
  std::vector<std::vector<int>> out_edges_, in_edges_;
  std::unordered_map<int, int> id_to_index_;
  std::unordered_map<int, double> segment_freeflow_;
};

}  // namespace dispatch
