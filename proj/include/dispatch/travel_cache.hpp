#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "dispatch/grid.hpp"
#include "dispatch/router.hpp"

namespace dispatch {

// Travel times at grid granularity: queries are snapped to cell centroids and
// to half-hour weekly time bins (336 per week), then answered by the router
// and memoized.  A full route query costs real time; at this resolution the
// same answer serves every query in the same (src cell, dst cell, bin).
//
// Reads take a shared lock and writes an exclusive one, so concurrent rollout
// threads can share one cache; entries are immutable once inserted, and the
// router is deterministic, so a racing recomputation stores the same value.
class TravelTimeCache {
 public:
  static constexpr int kBinMinutes = 30;
  static constexpr int kBinsPerWeek = kMinutesPerWeek / kBinMinutes;  // 336

  TravelTimeCache(const Grid& grid, const RoadGraph& graph,
                  const LandmarkTable& landmarks, const SpeedProfiles& profiles)
      : grid_(&grid), graph_(&graph), landmarks_(&landmarks), profiles_(&profiles) {
    // memoize the nearest graph node per cell once
    cell_node_.reserve(static_cast<size_t>(grid.size()));
    for (int c = 0; c < grid.size(); ++c)
      cell_node_.push_back(graph.nearest_node(grid.cell(c).centroid));
  }

  double travel_seconds(const LatLon& src, const LatLon& dst, double time) {
    return travel_seconds_cells(grid_->cell_of(src), grid_->cell_of(dst), time);
  }

  double travel_seconds_cells(int src_cell, int dst_cell, double time) {
    const int bin = weekly_bin(time, kBinMinutes);
    const uint64_t key = pack(src_cell, dst_cell, bin);
    {
      std::shared_lock lock(mutex_);
      auto it = map_.find(key);
      if (it != map_.end()) {
        ++hits_;
        return it->second;
      }
    }
    // Canonical departure: the start of the covering 30-min slot, so a cache
    // entry equals a fresh router call for any query time inside its bin.
    const double canonical = std::floor(time / (kBinMinutes * 60.0)) * (kBinMinutes * 60.0);
    const RouteResult r =
        alt_shortest_path(*graph_, *landmarks_, *profiles_, cell_node_[static_cast<size_t>(src_cell)],
                          cell_node_[static_cast<size_t>(dst_cell)], canonical);
    {
      std::unique_lock lock(mutex_);
      map_.emplace(key, r.seconds);
    }
    return r.seconds;
  }

  size_t size() const {
    std::shared_lock lock(mutex_);
    return map_.size();
  }

  uint64_t hits() const { return hits_; }

  int node_for_cell(int cell) const { return cell_node_.at(static_cast<size_t>(cell)); }

  // CSV persistence: src_grid,dst_grid,bin,seconds
  void save_csv(const std::string& path) const {
    std::shared_lock lock(mutex_);
    std::vector<uint64_t> keys;
    keys.reserve(map_.size());
    for (const auto& [k, v] : map_) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << "src_grid,dst_grid,bin,seconds\n";
    for (uint64_t k : keys)
      out << (k >> 40) << ',' << ((k >> 16) & 0xffffffULL) << ',' << (k & 0xffffULL)
          << ',' << format_full(map_.at(k)) << '\n';
  }

  void load_csv(const std::string& path) {
    const auto lines = read_lines(path);
    std::unique_lock lock(mutex_);
    for (size_t i = 1; i < lines.size(); ++i) {
      if (trim(lines[i]).empty()) continue;
      const auto f = split(lines[i], ',');
      if (f.size() != 4)
        throw FormatError(path + ": bad cache row at line " + std::to_string(i + 1));
      const int src = static_cast<int>(parse_int(f[0], "src_grid", i + 1));
      const int dst = static_cast<int>(parse_int(f[1], "dst_grid", i + 1));
      const int bin = static_cast<int>(parse_int(f[2], "bin", i + 1));
      if (bin < 0 || bin >= kBinsPerWeek)
        throw IntegrityError(path + ": bin out of range at line " + std::to_string(i + 1));
      map_[pack(src, dst, bin)] = parse_double(f[3], "seconds", i + 1);
    }
  }

 private:
  static uint64_t pack(int src, int dst, int bin) {
    return (static_cast<uint64_t>(static_cast<uint32_t>(src)) << 40) |
           (static_cast<uint64_t>(static_cast<uint32_t>(dst) & 0xffffffU) << 16) |
           static_cast<uint64_t>(static_cast<uint32_t>(bin) & 0xffffU);
  }

  const Grid* grid_;
  const RoadGraph* graph_;
  const LandmarkTable* landmarks_;
  const SpeedProfiles* profiles_;
  std::vector<int> cell_node_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<uint64_t, double> map_;
  mutable std::atomic<uint64_t> hits_{0};
};

inline double travel_time(TravelTimeCache& cache, const LatLon& src,
                          const LatLon& dst, double time) {
  return cache.travel_seconds(src, dst, time);
}

}  // namespace dispatch
