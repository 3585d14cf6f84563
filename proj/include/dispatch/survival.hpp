#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "dispatch/csv.hpp"
#include "dispatch/errors.hpp"
#include "dispatch/features.hpp"
#include "dispatch/rng.hpp"

// Accelerated-failure-time model of incident inter-arrival times:
//
//   log(tau) = beta . w + y,   y ~ exp(y - e^y)
//
// which makes tau exponentially distributed with conditional mean
// E[tau | w] = e^{beta . w}.  Writing z = log(tau) - beta . w, the
// log-likelihood of a dataset is  L = sum_i (z_i - e^{z_i})  and its
// gradient is  dL/dbeta_j = sum_i w_ij (e^{z_i} - 1).
//
// tau is kept in hours internally; conversions happen at the I/O and
// generation boundaries.

namespace dispatch {

struct SurvivalObservation {
  double tau = 0.0;  // inter-arrival gap, model units (hours)
  std::vector<double> w;
};

struct SurvivalDataset {
  std::vector<SurvivalObservation> obs;

  size_t n() const { return obs.size(); }
  bool empty() const { return obs.empty(); }
};

struct SurvivalModel {
  std::vector<double> beta;
  std::vector<std::string> feature_names;  // optional; empty for raw vectors
  std::string tau_unit = "hours";

  int m() const { return static_cast<int>(beta.size()); }
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline void check_dims(const SurvivalModel& model, const SurvivalDataset& data) {
  for (const auto& o : data.obs) {
    if (static_cast<int>(o.w.size()) != model.m())
      throw SchemaError("feature vector length " + std::to_string(o.w.size()) +
                        " does not match model dimension " +
                        std::to_string(model.m()));
    if (!(o.tau > 0.0) || !std::isfinite(o.tau))
      throw SchemaError("observations require positive finite tau");
  }
}

inline double log_likelihood(const SurvivalModel& model,
                             const SurvivalDataset& data) {
  check_dims(model, data);
  double L = 0.0;
  for (const auto& o : data.obs) {
    const double z = std::log(o.tau) - dot(model.beta, o.w);
    L += z - std::exp(z);
  }
  return L;
}

inline std::vector<double> gradient(const SurvivalModel& model,
                                    const SurvivalDataset& data) {
  check_dims(model, data);
  std::vector<double> g(model.beta.size(), 0.0);
  for (const auto& o : data.obs) {
    const double z = std::log(o.tau) - dot(model.beta, o.w);
    const double ez = std::exp(z);
    for (size_t j = 0; j < g.size(); ++j) g[j] += o.w[j] * (ez - 1.0);
  }
  return g;
}

struct FitOptions {
  double step = 1e-3;
  double tol = 1e-6;  // infinity norm of the gradient
  int max_iter = 500;
};

struct FitResult {
  SurvivalModel model;
  bool converged = false;
  int iterations = 0;
  double final_loglik = 0.0;
  double final_grad_inf = 0.0;
};

inline double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Batch maximum-likelihood fit: gradient ascent with a backtracking line
// search.  The likelihood is concave, so accepted iterates are monotone
// non-decreasing in L.
inline FitResult fit_batch(const SurvivalDataset& data,
                           const std::vector<double>& init,
                           const FitOptions& opt = {}) {
  if (data.empty()) throw SchemaError("fit_batch: empty dataset");
  FitResult res;
  res.model.beta = init;
  check_dims(res.model, data);

  double L = log_likelihood(res.model, data);
  if (!std::isfinite(L))
    throw DivergenceError("non-finite likelihood at the initial point");

  double step = opt.step;
  for (int it = 0; it < opt.max_iter; ++it) {
    const auto g = gradient(res.model, data);
    res.final_grad_inf = inf_norm(g);
    res.iterations = it;
    if (res.final_grad_inf <= opt.tol) {
      res.converged = true;
      break;
    }
    // backtrack until the step improves the likelihood
    bool accepted = false;
    bool first_try = true;
    SurvivalModel cand = res.model;
    for (int shrink = 0; shrink < 80; ++shrink) {
      for (size_t j = 0; j < cand.beta.size(); ++j)
        cand.beta[j] = res.model.beta[j] + step * g[j];
      const double Lc = log_likelihood(cand, data);
      if (std::isfinite(Lc) && Lc >= L) {
        res.model.beta = cand.beta;
        L = Lc;
        accepted = true;
        break;
      }
      step *= 0.5;
      first_try = false;
    }
    if (!accepted) break;  // no ascent direction at float resolution
    if (first_try) step *= 2.0;
    if (!std::isfinite(L)) throw DivergenceError("likelihood diverged");
  }
  res.final_loglik = L;
  const auto g = gradient(res.model, data);
  res.final_grad_inf = inf_norm(g);
  if (res.final_grad_inf <= opt.tol) res.converged = true;
  return res;
}

// Online update for one stream of fresh observations: repeated full-gradient
// steps with a fixed step size, stopping at the first likelihood decrease and
// returning the previous iterate (so the result never scores worse on the
// stream than the base model).
inline SurvivalModel update_streaming(const SurvivalModel& base,
                                      const SurvivalDataset& stream,
                                      double step = 1e-3, int max_iter = 100) {
  if (stream.empty()) return base;
  check_dims(base, stream);
  SurvivalModel cur = base;
  double L = log_likelihood(cur, stream);
  for (int p = 0; p < max_iter; ++p) {
    const auto g = gradient(cur, stream);
    SurvivalModel next = cur;
    for (size_t j = 0; j < next.beta.size(); ++j) next.beta[j] += step * g[j];
    const double Ln = log_likelihood(next, stream);
    if (!std::isfinite(Ln) || Ln < L) return cur;
    cur = next;
    L = Ln;
  }
  return cur;
}

// Conditional mean inter-arrival e^{beta . w} in model units.
inline double expected_interarrival(const SurvivalModel& model,
                                    const std::vector<double>& w) {
  if (w.size() != model.beta.size())
    throw SchemaError("expected_interarrival: dimension mismatch");
  const double x = dot(model.beta, w);
  if (!(std::abs(x) <= 709.0))
    throw RateOverflow("beta.w = " + std::to_string(x) +
                       " is beyond the representable exponent");
  return std::exp(x);
}

// Inverse-CDF sample given a uniform draw u in (0, 1): tau = mean * (-ln u).
inline double interarrival_from_uniform(const SurvivalModel& model,
                                        const std::vector<double>& w, double u) {
  return expected_interarrival(model, w) * -std::log(u);
}

inline double sample_interarrival(const SurvivalModel& model,
                                  const std::vector<double>& w, Rng& rng) {
  return interarrival_from_uniform(model, w, rng.uniform01());
}

// ---------------------------------------------------------------------------
// Model persistence: versioned plain text, full-precision coefficients.

inline void save_model(const std::string& path, const SurvivalModel& model) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "dispatch-survival-model v1\n";
  out << "tau_unit " << model.tau_unit << '\n';
  out << "features " << model.m() << '\n';
  for (int j = 0; j < model.m(); ++j) {
    const std::string name = j < static_cast<int>(model.feature_names.size())
                                 ? model.feature_names[j]
                                 : "f" + std::to_string(j);
    out << name << ' ' << format_full(model.beta[j]) << '\n';
  }
}

inline SurvivalModel load_model(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || trim(lines[0]) != "dispatch-survival-model v1")
    throw FormatError(path + ": not a v1 survival model file");
  SurvivalModel model;
  size_t i = 1;
  int declared = -1;
  for (; i < lines.size(); ++i) {
    const auto f = split(trim(lines[i]), ' ');
    if (f.size() != 2) throw FormatError(path + ": bad header line " + std::to_string(i + 1));
    if (f[0] == "tau_unit") {
      model.tau_unit = f[1];
    } else if (f[0] == "features") {
      declared = static_cast<int>(parse_int(f[1], "feature count", i + 1));
      ++i;
      break;
    } else {
      throw FormatError(path + ": unexpected header key '" + f[0] + "'");
    }
  }
  for (; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto f = split(trim(lines[i]), ' ');
    if (f.size() != 2) throw FormatError(path + ": bad coefficient line " + std::to_string(i + 1));
    model.feature_names.push_back(f[0]);
    model.beta.push_back(parse_double(f[1], "coefficient", i + 1));
  }
  if (declared >= 0 && declared != model.m())
    throw FormatError(path + ": declared " + std::to_string(declared) +
                      " features, found " + std::to_string(model.m()));
  return model;
}

// ---------------------------------------------------------------------------
// Dataset extraction from an incident log: one observation per consecutive
// same-cell pair, tau = gap in hours, covariates evaluated at the start of
// the interval (the moment the cell's clock restarted).

inline SurvivalDataset build_survival_dataset(const std::vector<Incident>& incidents,
                                              const Grid& grid) {
  SurvivalDataset data;
  IncidentCountTracker counts(grid.size());
  std::vector<std::optional<size_t>> last_in_cell(grid.size());
  std::vector<FeatureVector> pending(grid.size());  // features at each cell's last event

  for (size_t i = 0; i < incidents.size(); ++i) {
    const Incident& inc = incidents[i];
    counts.push(inc.grid_id, inc.occurred_at);
    if (last_in_cell[inc.grid_id]) {
      const Incident& prev = incidents[*last_in_cell[inc.grid_id]];
      const double gap_h = (inc.occurred_at - prev.occurred_at) / kSecondsPerHour;
      if (gap_h > 0.0)
        data.obs.push_back({gap_h, pending[inc.grid_id].values});
    }
    std::optional<Weather> wx;
    if (inc.temp_c && inc.rain_mm) wx = Weather{*inc.temp_c, *inc.rain_mm};
    pending[inc.grid_id] =
        build_features(counts, grid, inc.grid_id, inc.occurred_at, wx);
    last_in_cell[inc.grid_id] = i;
  }
  return data;
}

}  // namespace dispatch
