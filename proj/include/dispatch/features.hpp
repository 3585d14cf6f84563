#pragma once

#include <algorithm>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "dispatch/grid.hpp"
#include "dispatch/incident.hpp"
#include "dispatch/time_utils.hpp"

namespace dispatch {

struct Weather {
  double temp_c = 0.0;
  double rain_mm = 0.0;
};

// Covariate layout for the inter-arrival model.  The layout is fixed:
//   6 time-of-day one-hots (4 h bins), weekend flag, 4 season one-hots,
//   mean temperature, rainfall, trailing incident counts over 2/7/30 days
//   for the cell and (summed) for its neighbors, intercept.
class FeatureSchema {
 public:
  static FeatureSchema standard() {
    FeatureSchema s;
    s.names_ = {"tod_0",        "tod_1",        "tod_2",         "tod_3",
                "tod_4",        "tod_5",        "weekend",       "season_winter",
                "season_spring","season_summer","season_fall",   "temp_c",
                "rain_mm",      "count_cell_2d","count_cell_7d", "count_cell_30d",
                "count_nbr_2d", "count_nbr_7d", "count_nbr_30d", "intercept"};
    return s;
  }

  int m() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

  static constexpr int kTod0 = 0;
  static constexpr int kWeekend = 6;
  static constexpr int kSeason0 = 7;
  static constexpr int kTempC = 11;
  static constexpr int kRainMm = 12;
  static constexpr int kCountCell2d = 13;
  static constexpr int kCountNbr2d = 16;
  static constexpr int kIntercept = 19;

 private:
  std::vector<std::string> names_;
};

struct FeatureVector {
  std::vector<double> values;
  bool weather_imputed = false;
};

// Rolling per-cell incident counts over trailing windows (t - W, t]; the
// window includes its right endpoint so an incident contributes to features
// evaluated at its own timestamp.
class IncidentCountTracker {
 public:
  IncidentCountTracker() = default;
  explicit IncidentCountTracker(int n_cells) : per_cell_(n_cells) {}

  void push(int cell_id, double t) {
    per_cell_.at(static_cast<size_t>(cell_id)).push_back(t);
  }

  // Drop everything older than the widest window; call occasionally to keep
  // the deques short during long replays.
  void expire_before(double t) {
    for (auto& dq : per_cell_) {
      while (!dq.empty() && dq.front() <= t - 30.0 * kSecondsPerDay) dq.pop_front();
    }
  }

  int count_in_window(int cell_id, double t, double window_s) const {
    const auto& dq = per_cell_.at(static_cast<size_t>(cell_id));
    // times are pushed in order; binary search the left edge
    const auto it = std::upper_bound(dq.begin(), dq.end(), t - window_s);
    const auto end = std::upper_bound(it, dq.end(), t);
    return static_cast<int>(end - it);
  }

  int n_cells() const { return static_cast<int>(per_cell_.size()); }

 private:
  std::vector<std::deque<double>> per_cell_;
};

namespace detail {

inline void fill_count_features(const IncidentCountTracker& counts,
                                const Grid& grid, int cell_id, double t,
                                std::vector<double>& v) {
  const double windows[3] = {2.0 * kSecondsPerDay, 7.0 * kSecondsPerDay,
                             30.0 * kSecondsPerDay};
  for (int k = 0; k < 3; ++k)
    v[FeatureSchema::kCountCell2d + k] = counts.count_in_window(cell_id, t, windows[k]);
  for (int k = 0; k < 3; ++k) {
    double sum = 0.0;
    for (int nb : grid.cell(cell_id).neighbor_ids)
      sum += counts.count_in_window(nb, t, windows[k]);
    v[FeatureSchema::kCountNbr2d + k] = sum;
  }
}

}  // namespace detail

inline FeatureVector build_features(const IncidentCountTracker& counts,
                                    const Grid& grid, int cell_id, double t,
                                    const std::optional<Weather>& weather) {
  FeatureVector fv;
  fv.values.assign(static_cast<size_t>(FeatureSchema::standard().m()), 0.0);
  auto& v = fv.values;
  v[FeatureSchema::kTod0 + time_of_day_bin(t)] = 1.0;
  v[FeatureSchema::kWeekend] = is_weekend(t) ? 1.0 : 0.0;
  v[FeatureSchema::kSeason0 + season_of(t)] = 1.0;
  if (weather) {
    v[FeatureSchema::kTempC] = weather->temp_c;
    v[FeatureSchema::kRainMm] = weather->rain_mm;
  } else {
    fv.weather_imputed = true;  // zeros stand in for the missing observation
  }
  detail::fill_count_features(counts, grid, cell_id, t, v);
  v[FeatureSchema::kIntercept] = 1.0;
  return fv;
}

// Convenience overload: trailing counts computed from an explicit history
// (must be sorted by time; only incidents at or before t are counted).
inline FeatureVector build_features(const std::vector<Incident>& history,
                                    const Grid& grid, int cell_id, double t,
                                    const std::optional<Weather>& weather) {
  IncidentCountTracker counts(grid.size());
  for (const auto& inc : history) {
    if (inc.occurred_at > t) break;
    counts.push(inc.grid_id, inc.occurred_at);
  }
  return build_features(counts, grid, cell_id, t, weather);
}

}  // namespace dispatch
