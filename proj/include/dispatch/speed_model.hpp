#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "dispatch/csv.hpp"
#include "dispatch/road_graph.hpp"
#include "dispatch/time_utils.hpp"

namespace dispatch {

struct SpeedObservation {
  int segment_id = -1;
  double timestamp = 0.0;  // epoch seconds
  double speed_mph = 0.0;
};

// Weekly-periodic historical mean speed per road segment.  The week is cut
// into fixed-width bins (default 30 min, 336 per week); a bin with no data
// falls back to the segment's freeflow speed.
class SpeedProfiles {
 public:
  SpeedProfiles() = default;

  static SpeedProfiles fit(const std::vector<SpeedObservation>& obs,
                           const RoadGraph& graph, int bin_width_min = 30) {
    SpeedProfiles p = empty_for(graph, bin_width_min);
    std::map<std::pair<int, int>, std::pair<double, int>> acc;  // (seg,bin) -> (sum,count)
    for (const auto& o : obs) {
      if (!p.segments_.count(o.segment_id))
        throw UnknownSegment("speed observation for unknown segment " +
                             std::to_string(o.segment_id));
      if (!(o.speed_mph > 0.0) || o.speed_mph > 120.0)
        throw IntegrityError("speed observation out of range (0, 120]: " +
                             std::to_string(o.speed_mph));
      auto& slot = acc[{o.segment_id, weekly_bin(o.timestamp, bin_width_min)}];
      slot.first += o.speed_mph;
      slot.second += 1;
    }
    for (const auto& [key, sum_count] : acc)
      p.segments_[key.first].bin_speed[static_cast<size_t>(key.second)] =
          sum_count.first / sum_count.second;
    p.recompute_ratio();
    return p;
  }

  static SpeedProfiles empty_for(const RoadGraph& graph, int bin_width_min = 30) {
    if (bin_width_min <= 0 || kMinutesPerWeek % bin_width_min != 0)
      throw ConfigError("speed bin width must divide " +
                        std::to_string(kMinutesPerWeek) + " minutes");
    SpeedProfiles p;
    p.bin_width_min_ = bin_width_min;
    p.bins_ = kMinutesPerWeek / bin_width_min;
    for (const auto& [seg, ff] : graph.segment_freeflow()) {
      Segment s;
      s.freeflow_mph = ff;
      s.bin_speed.assign(static_cast<size_t>(p.bins_), ff);
      p.segments_.emplace(seg, std::move(s));
    }
    p.recompute_ratio();
    return p;
  }

  double predict(int segment_id, double time) const {
    auto it = segments_.find(segment_id);
    if (it == segments_.end())
      throw UnknownSegment("unknown segment " + std::to_string(segment_id));
    return it->second.bin_speed[static_cast<size_t>(weekly_bin(time, bin_width_min_))];
  }

  double freeflow(int segment_id) const {
    auto it = segments_.find(segment_id);
    if (it == segments_.end())
      throw UnknownSegment("unknown segment " + std::to_string(segment_id));
    return it->second.freeflow_mph;
  }

  double mae(const std::vector<SpeedObservation>& obs) const {
    if (obs.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& o : obs)
      sum += std::abs(predict(o.segment_id, o.timestamp) - o.speed_mph);
    return sum / static_cast<double>(obs.size());
  }

  // Smallest predicted-vs-freeflow travel-time ratio across every segment
  // and bin, capped at 1.  Scaling freeflow-based route lower bounds by this
  // keeps them valid even where the data says traffic beats freeflow.
  double min_time_ratio() const { return min_time_ratio_; }

  int bin_width_min() const { return bin_width_min_; }
  int bins_per_week() const { return bins_; }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << "dispatch-speed-profiles v1\n";
    out << "bin_width_min " << bin_width_min_ << '\n';
    for (const auto& [seg, s] : segments_) {
      out << "segment " << seg << ' ' << format_full(s.freeflow_mph) << '\n';
      for (int b = 0; b < bins_; ++b) {
        const double v = s.bin_speed[static_cast<size_t>(b)];
        if (v != s.freeflow_mph)  // fallback bins are implicit
          out << seg << ' ' << b << ' ' << format_full(v) << '\n';
      }
    }
  }

  static SpeedProfiles load(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty() || trim(lines[0]) != "dispatch-speed-profiles v1")
      throw FormatError(path + ": not a v1 speed profile file");
    SpeedProfiles p;
    size_t i = 1;
    {
      const auto f = split(trim(lines[i]), ' ');
      if (f.size() != 2 || f[0] != "bin_width_min")
        throw FormatError(path + ": missing bin_width_min header");
      p.bin_width_min_ = static_cast<int>(parse_int(f[1], "bin width", i + 1));
      if (p.bin_width_min_ <= 0 || kMinutesPerWeek % p.bin_width_min_ != 0)
        throw FormatError(path + ": bad bin width");
      p.bins_ = kMinutesPerWeek / p.bin_width_min_;
      ++i;
    }
    for (; i < lines.size(); ++i) {
      const std::string line = trim(lines[i]);
      if (line.empty() || line[0] == '#') continue;
      const auto f = split(line, ' ');
      if (f[0] == "segment") {
        if (f.size() != 3) throw FormatError(path + ": bad segment line " + std::to_string(i + 1));
        Segment s;
        s.freeflow_mph = parse_double(f[2], "freeflow", i + 1);
        s.bin_speed.assign(static_cast<size_t>(p.bins_), s.freeflow_mph);
        p.segments_[static_cast<int>(parse_int(f[1], "segment id", i + 1))] = std::move(s);
      } else {
        if (f.size() != 3) throw FormatError(path + ": bad triple at line " + std::to_string(i + 1));
        const int seg = static_cast<int>(parse_int(f[0], "segment id", i + 1));
        const int bin = static_cast<int>(parse_int(f[1], "bin", i + 1));
        auto it = p.segments_.find(seg);
        if (it == p.segments_.end())
          throw FormatError(path + ": triple for undeclared segment at line " +
                            std::to_string(i + 1));
        if (bin < 0 || bin >= p.bins_)
          throw FormatError(path + ": bin out of range at line " + std::to_string(i + 1));
        it->second.bin_speed[static_cast<size_t>(bin)] =
            parse_double(f[2], "speed", i + 1);
      }
    }
    p.recompute_ratio();
    return p;
  }

 private:
  struct Segment {
    double freeflow_mph = 0.0;
    std::vector<double> bin_speed;
  };

  void recompute_ratio() {
    double r = 1.0;
    for (const auto& [seg, s] : segments_) {
      for (double v : s.bin_speed)
        r = std::min(r, s.freeflow_mph / v);  // = predicted time / freeflow time
    }
    min_time_ratio_ = r;
  }

  int bin_width_min_ = 30;
  int bins_ = 336;
  std::map<int, Segment> segments_;  // ordered => deterministic save
  double min_time_ratio_ = 1.0;
};

// CSV header: segment_id,timestamp,speed_mph
inline std::vector<SpeedObservation> load_speeds_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw FormatError(path + ": empty speed file");
  std::vector<SpeedObservation> out;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto f = split(lines[i], ',');
    const size_t line_no = i + 1;
    if (f.size() < 3)
      throw FormatError("line " + std::to_string(line_no) +
                        ": expected segment_id,timestamp,speed_mph");
    SpeedObservation o;
    o.segment_id = static_cast<int>(parse_int(f[0], "segment_id", line_no));
    try {
      o.timestamp = parse_iso8601(trim(f[1]));
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
    o.speed_mph = parse_double(f[2], "speed_mph", line_no);
    out.push_back(o);
  }
  return out;
}

}  // namespace dispatch
