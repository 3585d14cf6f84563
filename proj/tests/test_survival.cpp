#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include <dispatch/errors.hpp>
#include <dispatch/rng.hpp>
#include <dispatch/survival.hpp>

#include "test_helpers.hpp"

using namespace dispatch;
using Catch::Approx;

namespace {

SurvivalDataset synthetic(const std::vector<double>& beta, int n, uint64_t seed) {
  Rng rng(seed);
  SurvivalModel truth;
  truth.beta = beta;
  SurvivalDataset data;
  const int m = static_cast<int>(beta.size());
  for (int i = 0; i < n; ++i) {
    SurvivalObservation o;
    o.w.resize(m);
    for (int j = 0; j + 1 < m; ++j) o.w[j] = rng.uniform(-1.0, 1.0);
    o.w[m - 1] = 1.0;  // intercept column
    o.tau = sample_interarrival(truth, o.w, rng);
    data.obs.push_back(std::move(o));
  }
  return data;
}

double neg_loglik(const SurvivalModel& m, const SurvivalDataset& d) {
  return -log_likelihood(m, d);
}

}  // namespace

TEST_CASE("log-likelihood matches the closed form on a worked example") {
  // w = [1] throughout; tau = e^{0.5} gives z = 0, tau = e^{1.5} gives z = 1
  SurvivalModel model;
  model.beta = {0.5};
  SurvivalDataset data;
  data.obs.push_back({std::exp(0.5), {1.0}});
  data.obs.push_back({std::exp(1.5), {1.0}});
  // L = (0 - e^0) + (1 - e^1) = -e
  REQUIRE(log_likelihood(model, data) == Approx(-std::exp(1.0)).epsilon(1e-14));
  // dL/dbeta = (e^0 - 1) + (e^1 - 1) = e - 1
  const auto g = gradient(model, data);
  REQUIRE(g.size() == 1);
  REQUIRE(g[0] == Approx(std::exp(1.0) - 1.0).epsilon(1e-14));
}

TEST_CASE("analytic gradient agrees with central finite differences") {
  Rng rng(derive_seed(11, "fd"));
  for (int rep = 0; rep < 10; ++rep) {
    const int m = 2 + static_cast<int>(rng.uniform_int(0, 3));
    std::vector<double> beta(m);
    for (auto& b : beta) b = rng.uniform(-1.0, 1.0);
    const auto data = synthetic(beta, 12, derive_seed(11, "fd-data", rep));

    SurvivalModel model;
    model.beta = beta;
    for (auto& b : model.beta) b += rng.uniform(-0.3, 0.3);
    const auto g = gradient(model, data);

    const double h = 1e-6;
    for (int j = 0; j < m; ++j) {
      SurvivalModel up = model, dn = model;
      up.beta[j] += h;
      dn.beta[j] -= h;
      const double fd = (log_likelihood(up, data) - log_likelihood(dn, data)) / (2 * h);
      REQUIRE(g[j] == Approx(fd).epsilon(1e-6).margin(1e-8));
    }
  }
}

TEST_CASE("likelihood is additive over datasets and invariant to time rescaling") {
  const auto d1 = synthetic({0.4, -0.2, 0.1}, 15, 101);
  const auto d2 = synthetic({0.4, -0.2, 0.1}, 9, 102);
  SurvivalModel model;
  model.beta = {0.3, 0.0, 0.2};

  SurvivalDataset both = d1;
  both.obs.insert(both.obs.end(), d2.obs.begin(), d2.obs.end());
  REQUIRE(log_likelihood(model, both) ==
          Approx(log_likelihood(model, d1) + log_likelihood(model, d2)).epsilon(1e-13));

  // scaling every duration by c and shifting the intercept by log(c) is a no-op
  const double c = 60.0;
  SurvivalDataset scaled = d1;
  for (auto& o : scaled.obs) o.tau *= c;
  SurvivalModel shifted = model;
  shifted.beta.back() += std::log(c);  // last column is the intercept
  REQUIRE(log_likelihood(shifted, scaled) ==
          Approx(log_likelihood(model, d1)).epsilon(1e-12));
}

TEST_CASE("dimension and positivity checks reject malformed observations") {
  SurvivalModel model;
  model.beta = {0.1, 0.2};
  SurvivalDataset bad;
  bad.obs.push_back({1.0, {1.0}});  // wrong width
  REQUIRE_THROWS_AS(check_dims(model, bad), SchemaError);
  bad.obs[0].w = {1.0, 1.0};
  bad.obs[0].tau = 0.0;
  REQUIRE_THROWS_AS(check_dims(model, bad), SchemaError);
  bad.obs[0].tau = -2.0;
  REQUIRE_THROWS_AS(check_dims(model, bad), SchemaError);
  bad.obs[0].tau = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(check_dims(model, bad), SchemaError);
  bad.obs[0].tau = 1.0;
  REQUIRE_NOTHROW(check_dims(model, bad));
}

TEST_CASE("intercept-only fit lands on the closed-form optimum log(mean tau)") {
  SurvivalDataset data;
  for (double tau : {0.5, 1.25, 2.0, 3.75, 0.8, 1.1}) data.obs.push_back({tau, {1.0}});
  double mean = 0.0;
  for (const auto& o : data.obs) mean += o.tau;
  mean /= static_cast<double>(data.n());

  FitOptions opt;
  opt.tol = 1e-7;
  opt.max_iter = 5000;
  const FitResult res = fit_batch(data, {0.0}, opt);
  REQUIRE(res.converged);
  REQUIRE(res.model.beta[0] == Approx(std::log(mean)).margin(1e-7));
  REQUIRE(res.final_grad_inf <= 1e-7);

  // the optimum beats nearby points (local maximality, concave => global)
  for (double delta : {-0.1, 0.1}) {
    SurvivalModel nearby = res.model;
    nearby.beta[0] += delta;
    REQUIRE(log_likelihood(nearby, data) < res.final_loglik);
  }
}

TEST_CASE("batch fitting never decreases the likelihood and recovers truth") {
  const std::vector<double> truth = {0.6, -0.4, 0.25, 0.9};
  const auto data = synthetic(truth, 5000, derive_seed(3, "recover"));

  SurvivalModel init;
  init.beta.assign(truth.size(), 0.0);
  const double L0 = log_likelihood(init, data);

  // the gradient is a sum over n observations, so tolerance scales with n
  FitOptions opt;
  opt.tol = 1e-3;
  opt.max_iter = 3000;
  const FitResult res = fit_batch(data, init.beta, opt);
  REQUIRE(res.final_loglik >= L0);
  REQUIRE(res.converged);
  for (size_t j = 0; j < truth.size(); ++j)
    REQUIRE(res.model.beta[j] == Approx(truth[j]).margin(0.1));
}

TEST_CASE("batch fitting validates its inputs") {
  REQUIRE_THROWS_AS(fit_batch(SurvivalDataset{}, {0.0}), SchemaError);
  SurvivalDataset data;
  data.obs.push_back({1.0, {1.0}});
  // an initial point in the overflow region has non-finite likelihood
  REQUIRE_THROWS_AS(fit_batch(data, {-800.0}), DivergenceError);
  REQUIRE_THROWS_AS(fit_batch(data, {0.0, 0.0}), SchemaError);
}

TEST_CASE("streaming update: empty stream returns the base model unchanged") {
  SurvivalModel base;
  base.beta = {0.5, -0.25};
  base.feature_names = {"x", "intercept"};
  const SurvivalModel out = update_streaming(base, SurvivalDataset{});
  REQUIRE(out.beta == base.beta);
  REQUIRE(out.feature_names == base.feature_names);
}

TEST_CASE("streaming update: first pass is one full-gradient step") {
  const auto stream = synthetic({0.8, 0.2}, 30, derive_seed(5, "stream"));
  SurvivalModel base;
  base.beta = {0.0, 0.0};
  const double step = 1e-3;

  const auto g = gradient(base, stream);
  const SurvivalModel one = update_streaming(base, stream, step, /*max_iter=*/1);
  REQUIRE(one.beta.size() == 2);
  for (size_t j = 0; j < 2; ++j)
    REQUIRE(one.beta[j] == Approx(base.beta[j] + step * g[j]).margin(1e-12));
}

TEST_CASE("streaming update stops at the first likelihood decrease") {
  // two unit durations: optimum is beta = 0; starting below with a huge step
  // overshoots so far that the first move hurts, so the base must come back
  SurvivalDataset stream;
  stream.obs.push_back({1.0, {1.0}});
  stream.obs.push_back({1.0, {1.0}});
  SurvivalModel base;
  base.beta = {-1.0};
  const SurvivalModel out = update_streaming(base, stream, /*step=*/50.0);
  REQUIRE(out.beta == base.beta);
}

TEST_CASE("streaming update never scores worse than the base on its stream") {
  Rng rng(derive_seed(6, "noworse"));
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> truth = {rng.uniform(-1, 1), rng.uniform(-1, 1),
                                 rng.uniform(-0.5, 1.5)};
    const auto stream = synthetic(truth, 25, derive_seed(6, "noworse-data", rep));
    SurvivalModel base;
    base.beta = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    for (double step : {1e-4, 1e-2, 1.0}) {
      const SurvivalModel out = update_streaming(base, stream, step);
      REQUIRE(log_likelihood(out, stream) >= log_likelihood(base, stream) - 1e-12);
    }
  }
}

TEST_CASE("conditional mean and inverse-CDF sampling are exact") {
  SurvivalModel model;
  model.beta = {0.7, -0.3};
  const std::vector<double> w = {2.0, 1.0};
  REQUIRE(expected_interarrival(model, w) == Approx(std::exp(1.1)).epsilon(1e-14));
  // u = e^-1 maps to exactly the mean; u = e^-2 to twice the mean
  REQUIRE(interarrival_from_uniform(model, w, std::exp(-1.0)) ==
          Approx(std::exp(1.1)).epsilon(1e-12));
  REQUIRE(interarrival_from_uniform(model, w, std::exp(-2.0)) ==
          Approx(2.0 * std::exp(1.1)).epsilon(1e-12));

  SurvivalModel hot;
  hot.beta = {710.0};
  REQUIRE_THROWS_AS(expected_interarrival(hot, {1.0}), RateOverflow);
  hot.beta = {-710.0};
  REQUIRE_THROWS_AS(expected_interarrival(hot, {1.0}), RateOverflow);
  hot.beta = {708.0};
  REQUIRE_NOTHROW(expected_interarrival(hot, {1.0}));
  REQUIRE_THROWS_AS(expected_interarrival(model, {1.0}), SchemaError);
}

TEST_CASE("samples pass a Kolmogorov-Smirnov check against the target law") {
  SurvivalModel model;
  model.beta = {0.4, -0.6, 0.3};
  const std::vector<double> w = {1.0, 0.5, 1.0};
  const double mean = expected_interarrival(model, w);

  const int n = 20000;
  std::vector<double> xs(n);
  Rng rng(derive_seed(8, "ks"));
  for (auto& x : xs) x = sample_interarrival(model, w, rng);
  std::sort(xs.begin(), xs.end());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double cdf = 1.0 - std::exp(-xs[i] / mean);
    d = std::max(d, std::abs(cdf - (i + 1.0) / n));
    d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
  }
  // alpha = 0.01 critical value 1.628 / sqrt(n)
  REQUIRE(d < 1.628 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("model files round-trip byte for byte and reject foreign content") {
  testutil::TempDir tmp;
  SurvivalModel model;
  model.beta = {0.1234567890123, -2.0, 1.0 / 3.0};
  model.feature_names = {"alpha", "beta"};  // third name falls back to f2

  const auto p1 = tmp / "m1.model";
  save_model(p1, model);
  const SurvivalModel back = load_model(p1);
  REQUIRE(back.beta == model.beta);
  REQUIRE(back.feature_names == std::vector<std::string>{"alpha", "beta", "f2"});
  REQUIRE(back.tau_unit == "hours");

  const auto p2 = tmp / "m2.model";
  save_model(p2, back);
  REQUIRE(testutil::slurp(p1) == testutil::slurp(p2));

  REQUIRE_THROWS_AS(load_model(tmp.file("bad.model", "something else\n")), FormatError);
  REQUIRE_THROWS_AS(
      load_model(tmp.file("short.model",
                          "dispatch-survival-model v1\ntau_unit hours\nfeatures 3\nf0 0.5\n")),
      FormatError);
  REQUIRE_THROWS_AS(load_model(tmp / "nope.model"), FormatError);
}

TEST_CASE("dataset extraction pairs same-cell gaps with start-of-interval features") {
  const Grid grid = Grid::build(bbox_from_extent(36.0, -87.0, 2000.0, 2000.0), 1000.0);
  const double t0 = parse_iso8601("2025-01-06T00:00:00Z");

  std::vector<Incident> incs(4);
  incs[0] = {1, t0, grid.cell(0).centroid, 0, 5.0, 0.0};
  incs[1] = {2, t0 + 1800.0, grid.cell(1).centroid, 1, 5.0, 0.0};  // other cell
  incs[2] = {3, t0 + 7200.0, grid.cell(0).centroid, 0, 9.0, 1.5};  // 2 h after #1
  incs[3] = {4, t0 + 7200.0, grid.cell(0).centroid, 0, 9.0, 1.5};  // zero gap: dropped

  const SurvivalDataset data = build_survival_dataset(incs, grid);
  REQUIRE(data.n() == 1);
  REQUIRE(data.obs[0].tau == Approx(2.0).epsilon(1e-12));  // hours

  // covariates were taken when the cell's clock restarted (at incident #1),
  // so they include incident #1 itself but nothing later
  const auto& w = data.obs[0].w;
  REQUIRE(w.size() == 20);
  REQUIRE(w[FeatureSchema::kCountCell2d] == 1.0);
  REQUIRE(w[FeatureSchema::kCountNbr2d] == 0.0);  // cell 1 event came later
  REQUIRE(w[FeatureSchema::kTempC] == 5.0);       // weather at interval start
  REQUIRE(w[FeatureSchema::kIntercept] == 1.0);
  REQUIRE(w[FeatureSchema::kTod0] == 1.0);  // midnight bin at interval start
}

TEST_CASE("wide feature vectors fit without a schema") {
  // arbitrary-width observations exercise the raw-vector path
  const int m = 25;
  std::vector<double> truth(m, 0.0);
  truth[0] = 0.5;
  truth[m - 1] = 1.0;
  const auto data = synthetic(truth, 200, derive_seed(4, "wide"));
  FitOptions opt;
  opt.max_iter = 200;
  const FitResult res = fit_batch(data, std::vector<double>(m, 0.0), opt);
  REQUIRE(res.model.m() == m);
  REQUIRE(std::isfinite(res.final_loglik));
  REQUIRE(res.final_loglik >= log_likelihood(SurvivalModel{std::vector<double>(m, 0.0)}, data));
}
