#pragma once

#include <cmath>
#include <optional>
#include <queue>
#include <vector>

#include "dispatch/features.hpp"
#include "dispatch/grid.hpp"
#include "dispatch/rng.hpp"
#include "dispatch/survival.hpp"

// Generative model of the near future: every cell runs an exponential clock
// with conditional mean e^{beta . w_g}; the next incident citywide is the
// earliest pending clock.  When a cell fires, its covariates are rebuilt at
// the event time (time of day, rolling counts including the event itself)
// and that cell draws a fresh clock, so within-chain self-excitation feeds
// back through the count features.

namespace dispatch {

struct ChainEvent {
  double occurred_at = 0.0;
  int grid_id = -1;
  LatLon location;  // cell centroid
  std::vector<double> features;
};

struct IncidentChain {
  std::vector<ChainEvent> events;

  bool empty() const { return events.empty(); }
  size_t size() const { return events.size(); }
};

// Everything the generator needs to know about the world at rollout time.
struct GeneratorContext {
  const Grid* grid = nullptr;
  const SurvivalModel* model = nullptr;
  IncidentCountTracker counts;          // seeded with recent real history
  std::optional<Weather> weather;       // latest reading, held fixed in rollouts
};

inline IncidentChain generate_chain(const GeneratorContext& ctx, double start,
                                    double horizon_s, uint64_t seed) {
  IncidentChain chain;
  if (horizon_s <= 0.0) return chain;
  Rng rng(seed);
  IncidentCountTracker counts = ctx.counts;  // private copy, mutated below
  const Grid& grid = *ctx.grid;

  using Entry = std::pair<double, int>;  // (fire time, cell id)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> clocks;

  auto draw = [&](int cell, double t) {
    const FeatureVector fv = build_features(counts, grid, cell, t, ctx.weather);
    const double tau_h = sample_interarrival(*ctx.model, fv.values, rng);
    return t + tau_h * kSecondsPerHour;
  };

  for (int g = 0; g < grid.size(); ++g) clocks.emplace(draw(g, start), g);

  const double end = start + horizon_s;
  double last_t = start;
  while (!clocks.empty()) {
    auto [t, cell] = clocks.top();
    if (t > end) break;
    clocks.pop();
    // continuous draws never truly tie, but keep the chain strictly ordered
    if (t <= last_t) t = std::nextafter(last_t, 1e300);
    last_t = t;

    ChainEvent ev;
    ev.occurred_at = t;
    ev.grid_id = cell;
    ev.location = grid.cell(cell).centroid;
    counts.push(cell, t);
    ev.features = build_features(counts, grid, cell, t, ctx.weather).values;
    const double tau_h = sample_interarrival(*ctx.model, ev.features, rng);
    clocks.emplace(t + tau_h * kSecondsPerHour, cell);
    chain.events.push_back(std::move(ev));
  }
  return chain;
}

// b independent chains; chain i draws from sub-stream (seed, "chain", i), so
// the set is reproducible and insensitive to evaluation order.
inline std::vector<IncidentChain> generate_chains(int b, const GeneratorContext& ctx,
                                                  double start, double horizon_s,
                                                  uint64_t seed) {
  std::vector<IncidentChain> chains;
  chains.reserve(static_cast<size_t>(b));
  for (int i = 0; i < b; ++i)
    chains.push_back(
        generate_chain(ctx, start, horizon_s, derive_seed(seed, "chain", i)));
  return chains;
}

}  // namespace dispatch
