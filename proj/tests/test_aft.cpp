#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "exitsurv/aft.hpp"
#include "exitsurv/rng.hpp"
#include "exitsurv/special.hpp"
#include "support.hpp"

using namespace exitsurv;

namespace {

AftRecord record(double t, bool event, double x0 = 0.0, double x1 = 0.0) {
  AftRecord r;
  r.survival = {t, event};
  r.features.fill(0.0);
  r.features[0] = x0;
  r.features[1] = x1;
  return r;
}

// Samples log T = a0 + a1 x + sigma w with the requested error law; the
// test's own inverse-CDF sampling, independent of the library generator.
double sample_w(Family f, Rng& rng, double m1 = 1.0, double m2 = 1.0) {
  double u = rng.uniform01();
  while (u <= 0.0 || u >= 1.0) u = rng.uniform01();
  switch (f) {
    case Family::Exponential:
    case Family::Weibull:
      return std::log(-std::log(u));  // Gumbel-min
    case Family::LogNormal:
      return norm_quantile(u);
    case Family::GeneralizedF: {
      // log-F(1,1) = standard logistic only; tests use m1 = m2 = 1
      (void)m1;
      (void)m2;
      return std::log(u / (1.0 - u));
    }
  }
  return 0.0;
}

std::vector<AftRecord> synth_records(Family f, int n, double a0, double a1,
                                     double sigma, double censor_frac,
                                     Rng& rng) {
  std::vector<double> times(n);
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = rng.normal();
    times[i] = std::exp(a0 + a1 * xs[i] + sigma * sample_w(f, rng));
  }
  // administrative censoring at the empirical (1 - censor_frac) quantile
  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  const double cutoff =
      censor_frac > 0.0
          ? sorted[static_cast<size_t>((1.0 - censor_frac) * (n - 1))]
          : std::numeric_limits<double>::infinity();
  std::vector<AftRecord> out;
  for (int i = 0; i < n; ++i) {
    const bool event = times[i] <= cutoff;
    out.push_back(record(event ? times[i] : cutoff, event, xs[i]));
  }
  return out;
}

AftData data_from(const std::vector<AftRecord>& records,
                  const std::vector<int>& cols) {
  AftData d;
  d.x = Matrix(static_cast<int>(records.size()), static_cast<int>(cols.size()));
  for (size_t i = 0; i < records.size(); ++i) {
    d.time.push_back(records[i].survival.duration);
    d.event.push_back(records[i].survival.event ? 1 : 0);
    for (size_t j = 0; j < cols.size(); ++j)
      d.x(static_cast<int>(i), static_cast<int>(j)) = records[i].features[cols[j]];
  }
  return d;
}

}  // namespace

TEST_CASE("free parameter counts per family") {
  CHECK(aft_param_count(Family::Exponential, 3) == 4);
  CHECK(aft_param_count(Family::Weibull, 3) == 5);
  CHECK(aft_param_count(Family::LogNormal, 0) == 2);
  CHECK(aft_param_count(Family::GeneralizedF, 2) == 6);
}

TEST_CASE("censored exponential likelihood matches its closed form") {
  // events at 1, 2, 3 and one censoring at 4: l(rate) = 3 log rate - 10 rate
  std::vector<AftRecord> recs = {record(1, true), record(2, true),
                                 record(3, true), record(4, false)};
  AftData d = data_from(recs, {});
  auto loglik_at = [&](double rate) {
    return aft_loglik(Family::Exponential, d, {std::log(1.0 / rate)});
  };
  CHECK(loglik_at(0.3) ==
        doctest::Approx(3 * std::log(0.3) - 3.0).epsilon(1e-12));
  CHECK(loglik_at(0.3) == doctest::Approx(-6.6119184129778).epsilon(1e-10));
  CHECK(loglik_at(1.0) == doctest::Approx(-10.0).epsilon(1e-12));
}

TEST_CASE("empty record set has zero log likelihood") {
  AftData d;
  d.x = Matrix(0, 0);
  CHECK(aft_loglik(Family::Weibull, d, {0.5, 0.0}) == 0.0);
}

TEST_CASE("all-censored data yields a strictly negative log likelihood") {
  std::vector<AftRecord> recs = {record(1, false), record(2.5, false)};
  AftData d = data_from(recs, {});
  CHECK(aft_loglik(Family::Weibull, d, {0.4, 0.1}) < 0.0);
  CHECK(aft_loglik(Family::LogNormal, d, {0.4, 0.1}) < 0.0);
}

TEST_CASE("gradient vanishes at the exponential closed-form optimum") {
  std::vector<AftRecord> recs = {record(1, true), record(2, true),
                                 record(3, true), record(4, false)};
  AftData d = data_from(recs, {});
  // rate = events / total time = 3/10
  const std::vector<double> theta = {std::log(10.0 / 3.0)};
  const std::vector<double> g = aft_loglik_gradient(Family::Exponential, d, theta);
  REQUIRE(g.size() == 1);
  CHECK(std::fabs(g[0]) < 1e-8);
}

TEST_CASE("analytic gradient matches finite differences in every family") {
  Rng rng(2024);
  for (Family f : {Family::Exponential, Family::Weibull, Family::LogNormal,
                   Family::GeneralizedF}) {
    std::vector<AftRecord> recs = synth_records(f, 50, 0.8, -0.4,
                                                f == Family::Exponential ? 1.0
                                                                         : 0.6,
                                                0.2, rng);
    for (auto& r : recs) r.features[1] = rng.uniform01();  // second covariate
    AftData d = data_from(recs, {0, 1});
    const size_t np = aft_param_count(f, 2);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> theta(np);
      for (double& v : theta) v = -0.5 + rng.uniform01();
      if (!std::isfinite(aft_loglik(f, d, theta))) continue;
      const std::vector<double> analytic = aft_loglik_gradient(f, d, theta);
      const std::vector<double> fd = testsup::fd_gradient(
          [&](const std::vector<double>& th) { return aft_loglik(f, d, th); },
          theta, 1e-5);
      for (size_t j = 0; j < np; ++j) {
        CHECK(std::fabs(analytic[j] - fd[j]) /
                  std::max(1.0, std::fabs(fd[j])) <
              1e-5);
      }
    }
  }
}

TEST_CASE("mirrored covariates produce mirrored gradient entries") {
  Rng rng(5);
  std::vector<AftRecord> recs;
  for (int i = 0; i < 40; ++i) {
    const double x = rng.normal();
    AftRecord r = record(std::exp(0.5 + 0.4 * rng.normal()), i % 4 != 0, x, -x);
    recs.push_back(r);
  }
  AftData d = data_from(recs, {0, 1});
  const std::vector<double> theta = {0.3, 0.0, 0.0, -0.1};
  const std::vector<double> g = aft_loglik_gradient(Family::Weibull, d, theta);
  CHECK(g[1] == doctest::Approx(-g[2]).epsilon(1e-12));
}

TEST_CASE("exponential fit recovers the closed-form rate") {
  std::vector<AftRecord> recs = {record(1, true), record(2, true),
                                 record(3, true), record(4, false)};
  AftOptions opt;
  opt.columns.emplace();  // no covariates
  AftFit fit = fit_aft(Family::Exponential, recs, opt);
  CHECK(fit.intercept == doctest::Approx(std::log(10.0 / 3.0)).epsilon(1e-8));
  CHECK(fit.scale == 1.0);
  CHECK(fit.n_events == 3);
  CHECK(fit.n_censored == 1);
  CHECK(fit.max_loglik ==
        doctest::Approx(3 * std::log(0.3) - 3.0).epsilon(1e-4));
}

TEST_CASE("weibull fit recovers generating parameters within five percent") {
  Rng rng(31);
  std::vector<AftRecord> recs =
      synth_records(Family::Weibull, 5000, 1.0, -0.3, 0.5, 0.2, rng);
  AftOptions opt;
  opt.columns = std::vector<int>{0};
  AftFit fit = fit_aft(Family::Weibull, recs, opt);
  CHECK(std::fabs(fit.intercept - 1.0) / 1.0 < 0.05);
  CHECK(std::fabs(fit.coefficients[0] - (-0.3)) / 0.3 < 0.05);
  CHECK(std::fabs(fit.scale - 0.5) / 0.5 < 0.05);
}

TEST_CASE("constant covariate columns are rejected as non-identifiable") {
  std::vector<AftRecord> recs;
  for (int i = 1; i <= 20; ++i) recs.push_back(record(i * 0.3, true, 7.0));
  AftOptions opt;
  opt.columns = std::vector<int>{0};
  CHECK_THROWS_WITH_AS(fit_aft(Family::Weibull, recs, opt),
                       doctest::Contains("non-identifiable"), FitError);
}

TEST_CASE("event-free data cannot be fit") {
  std::vector<AftRecord> recs = {record(1, false), record(2, false)};
  AftOptions opt;
  opt.columns.emplace();
  CHECK_THROWS_WITH_AS(fit_aft(Family::Weibull, recs, opt),
                       doctest::Contains("no events"), FitError);
}

TEST_CASE("iteration cap raises a convergence error carrying the last iterate") {
  Rng rng(8);
  std::vector<AftRecord> recs =
      synth_records(Family::Weibull, 200, 1.0, -0.5, 0.5, 0.2, rng);
  AftOptions opt;
  opt.columns = std::vector<int>{0};
  opt.max_iter = 1;
  try {
    fit_aft(Family::Weibull, recs, opt);
    FAIL("expected a convergence error");
  } catch (const ConvergenceError& e) {
    CHECK(std::isfinite(e.last_iterate.max_loglik));
    CHECK(e.last_iterate.scale > 0.0);
  }
}

TEST_CASE("repeat fits are bit-identical") {
  Rng rng(44);
  std::vector<AftRecord> recs =
      synth_records(Family::LogNormal, 300, 0.9, 0.4, 0.7, 0.25, rng);
  AftOptions opt;
  opt.columns = std::vector<int>{0};
  AftFit a = fit_aft(Family::LogNormal, recs, opt);
  AftFit b = fit_aft(Family::LogNormal, recs, opt);
  CHECK(a.max_loglik == b.max_loglik);
  CHECK(a.pack() == b.pack());
}

TEST_CASE("wald statistics follow the estimate and covariance") {
  AftFit fit;
  fit.family = Family::Weibull;
  fit.retained = {0, 1, 2};
  const double boundary = norm_quantile(0.95);
  fit.coefficients = {0.0, 2.0 * (boundary + 1e-4), 3.0 * (boundary - 1e-4)};
  fit.intercept = 1.0;
  fit.scale = 0.5;
  fit.covariance = Matrix(5, 5);
  fit.covariance(1, 1) = 1.0;  // se 1
  fit.covariance(2, 2) = 4.0;  // se 2
  fit.covariance(3, 3) = 9.0;  // se 3
  fit.max_loglik = -1;
  WaldReport w = wald_test(fit, 0.10);
  REQUIRE(w.entries.size() == 3);

  CHECK(w.entries[0].z == 0.0);
  CHECK(w.entries[0].p == doctest::Approx(1.0));
  CHECK_FALSE(w.entries[0].significant);

  // just above the 90% boundary: p slightly under 0.10
  CHECK(w.entries[1].z == doctest::Approx(boundary + 1e-4));
  CHECK(w.entries[1].p < 0.10);
  CHECK(w.entries[1].significant);

  // just below the boundary: p slightly over 0.10, strict < keeps it out
  CHECK(w.entries[2].p > 0.10);
  CHECK_FALSE(w.entries[2].significant);
  for (const WaldEntry& e : w.entries) {
    CHECK(e.p >= 0.0);
    CHECK(e.p <= 1.0);
    CHECK(e.significant == (e.p < 0.10));
  }
}

TEST_CASE("zero standard errors are flagged degenerate, not significant") {
  AftFit fit;
  fit.family = Family::Weibull;
  fit.retained = {0};
  fit.coefficients = {0.8};
  fit.covariance = Matrix(3, 3);  // all zeros
  WaldReport w = wald_test(fit, 0.10);
  REQUIRE(w.entries.size() == 1);
  CHECK(w.entries[0].degenerate);
  CHECK(w.entries[0].z == 0.0);
  CHECK(w.entries[0].p == doctest::Approx(1.0));
  CHECK_FALSE(w.entries[0].significant);
}

TEST_CASE("strong effects earn vanishing p-values") {
  Rng rng(77);
  std::vector<AftRecord> recs =
      synth_records(Family::Weibull, 2000, 1.0, 1.0, 0.5, 0.2, rng);
  AftOptions opt;
  opt.columns = std::vector<int>{0};
  AftFit fit = fit_aft(Family::Weibull, recs, opt);
  WaldReport w = wald_test(fit, 0.10);
  REQUIRE(w.entries.size() == 1);
  CHECK(w.entries[0].p < 1e-6);
  CHECK(w.entries[0].significant);
}

TEST_CASE("selection refit on an all-significant set changes nothing") {
  Rng rng(12);
  std::vector<AftRecord> recs;
  for (int i = 0; i < 1500; ++i) {
    AftRecord r;
    r.features.fill(0.0);
    r.features[0] = rng.normal();
    r.features[1] = rng.normal();
    const double eta = 1.0 + 0.8 * r.features[0] - 0.5 * r.features[1];
    r.survival.duration = std::exp(eta + 0.5 * sample_w(Family::Weibull, rng));
    r.survival.event = i % 5 != 0;
    recs.push_back(r);
  }
  AftOptions opt;
  opt.columns = std::vector<int>{0, 1};
  AftFit full = fit_aft(Family::Weibull, recs, opt);
  AftFit sel = select_covariates(Family::Weibull, recs, 0.10, opt);
  REQUIRE(sel.retained == full.retained);
  CHECK(sel.max_loglik == doctest::Approx(full.max_loglik).epsilon(1e-9));
}

TEST_CASE("pure-noise covariates can all be dropped") {
  Rng rng(13);
  std::vector<AftRecord> recs =
      synth_records(Family::Weibull, 400, 1.0, 0.0, 0.5, 0.2, rng);
  AftOptions opt;
  opt.columns = std::vector<int>{0};
  AftFit sel = select_covariates(Family::Weibull, recs, 1e-6, opt);
  CHECK(sel.retained.empty());
  CHECK(sel.coefficients.empty());
  // the refit is a plain intercept + scale model
  AftOptions none;
  none.columns.emplace();
  AftFit bare = fit_aft(Family::Weibull, recs, none);
  CHECK(sel.max_loglik == doctest::Approx(bare.max_loglik).epsilon(1e-9));
}

TEST_CASE("three real effects survive selection among eleven nulls") {
  Rng rng(200);
  std::vector<AftRecord> recs;
  for (int i = 0; i < 5000; ++i) {
    AftRecord r;
    r.features.fill(0.0);
    for (int j = 0; j < kNumFeatures; ++j) r.features[j] = rng.normal();
    const double eta =
        1.0 + 0.6 * r.features[0] - 0.5 * r.features[5] + 0.7 * r.features[13];
    r.survival.duration = std::exp(eta + 0.5 * sample_w(Family::Weibull, rng));
    r.survival.event = true;
    recs.push_back(r);
  }
  AftFit sel = select_covariates(Family::Weibull, recs, 0.10);
  for (int want : {0, 5, 13})
    CHECK(std::count(sel.retained.begin(), sel.retained.end(), want) == 1);
}

TEST_CASE("nested families never beat their superset by more than tolerance") {
  Rng rng(92);
  std::vector<AftRecord> recs =
      synth_records(Family::Weibull, 800, 1.0, -0.4, 0.7, 0.2, rng);
  AftOptions opt;
  opt.columns = std::vector<int>{0};
  const double ll_exp = fit_aft(Family::Exponential, recs, opt).max_loglik;
  const double ll_wei = fit_aft(Family::Weibull, recs, opt).max_loglik;
  CHECK(ll_exp <= ll_wei + 1e-6);

  // log-logistic data: the generalized F optimum is interior
  Rng rng2(93);
  std::vector<AftRecord> llrecs =
      synth_records(Family::GeneralizedF, 800, 1.0, -0.4, 0.6, 0.2, rng2);
  const double ll_w = fit_aft(Family::Weibull, llrecs, opt).max_loglik;
  const double ll_ln = fit_aft(Family::LogNormal, llrecs, opt).max_loglik;
  const double ll_gf = fit_aft(Family::GeneralizedF, llrecs, opt).max_loglik;
  CHECK(ll_w <= ll_gf + 1e-6);
  CHECK(ll_ln <= ll_gf + 1e-6);
}

TEST_CASE("conditional survival starts at one and ignores dropped features") {
  Rng rng(55);
  std::vector<AftRecord> recs =
      synth_records(Family::Weibull, 200, 1.0, -0.4, 0.5, 0.2, rng);
  AftOptions none;
  none.columns.emplace();
  AftFit bare = fit_aft(Family::Weibull, recs, none);
  FeatureVector a, b;
  a.fill(0.5);
  b.fill(-3.0);
  CHECK(conditional_survival(bare, a, 0.0) == 1.0);
  for (double t : {0.5, 1.0, 4.0})
    CHECK(conditional_survival(bare, a, t) ==
          doctest::Approx(conditional_survival(bare, b, t)).epsilon(1e-12));
}

TEST_CASE("negative coefficients shift exits earlier as the covariate rises") {
  Rng rng(56);
  std::vector<AftRecord> recs =
      synth_records(Family::Weibull, 2000, 1.0, -0.5, 0.5, 0.2, rng);
  AftOptions opt;
  opt.columns = std::vector<int>{0};
  AftFit fit = fit_aft(Family::Weibull, recs, opt);
  REQUIRE(fit.coefficients[0] < 0.0);
  FeatureVector x, higher;
  x.fill(0.0);
  higher.fill(0.0);
  higher[0] = 1.0;
  for (double t : {0.5, 1.5, 3.0}) {
    CHECK(conditional_survival(fit, higher, t) < conditional_survival(fit, x, t));
  }
  // non-increasing in t
  double prev = 1.0;
  for (double t = 0.0; t < 8.0; t += 0.25) {
    const double s = conditional_survival(fit, x, t);
    CHECK(s <= prev + 1e-15);
    prev = s;
  }
}

TEST_CASE("training order does not change the fitted curve") {
  Rng rng(57);
  std::vector<AftRecord> recs =
      synth_records(Family::LogNormal, 300, 0.8, 0.3, 0.6, 0.2, rng);
  std::vector<AftRecord> shuffled = recs;
  std::reverse(shuffled.begin(), shuffled.end());
  AftOptions opt;
  opt.columns = std::vector<int>{0};
  AftFit a = fit_aft(Family::LogNormal, recs, opt);
  AftFit b = fit_aft(Family::LogNormal, shuffled, opt);
  FeatureVector x;
  x.fill(0.3);
  for (double t : {0.5, 1.0, 2.0, 5.0})
    CHECK(conditional_survival(a, x, t) ==
          doctest::Approx(conditional_survival(b, x, t)).epsilon(1e-9));
}

TEST_CASE("saved fits reload with bit-identical predictions") {
  Rng rng(58);
  std::vector<AftRecord> recs =
      synth_records(Family::GeneralizedF, 300, 0.9, -0.3, 0.6, 0.2, rng);
  AftOptions opt;
  opt.columns = std::vector<int>{0};
  AftFit fit = fit_aft(Family::GeneralizedF, recs, opt);
  const std::string path =
      (std::filesystem::temp_directory_path() / "aft_roundtrip.json").string();
  save_aft(fit, path);
  AftFit back = load_aft(path);
  std::filesystem::remove(path);
  CHECK(back.family == fit.family);
  CHECK(back.max_loglik == fit.max_loglik);
  FeatureVector x;
  x.fill(0.2);
  for (double t : {0.3, 1.0, 2.7})
    CHECK(conditional_survival(back, x, t) == conditional_survival(fit, x, t));
}
