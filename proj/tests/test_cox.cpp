#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "exitsurv/cox.hpp"
#include "exitsurv/rng.hpp"

using namespace exitsurv;

namespace {

struct Sample {
  std::vector<SurvivalRecord> records;
  Matrix x;
};

// proportional hazards with rate exp(beta * x), unit baseline
Sample binary_ph(int n, double beta, double censor_frac, Rng& rng) {
  Sample s;
  s.x = Matrix(n, 1);
  std::vector<double> times(n);
  for (int i = 0; i < n; ++i) {
    const double xi = i % 2 == 0 ? 0.0 : 1.0;
    s.x(i, 0) = xi;
    double u = rng.uniform01();
    while (u <= 0.0) u = rng.uniform01();
    times[i] = -std::log(u) / std::exp(beta * xi);
  }
  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  const double cutoff =
      censor_frac > 0.0
          ? sorted[static_cast<size_t>((1.0 - censor_frac) * (n - 1))]
          : std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const bool event = times[i] <= cutoff;
    s.records.push_back({event ? times[i] : cutoff, event});
  }
  return s;
}

CoxFit fit_at(const std::vector<double>& beta) {
  CoxFit f;
  f.beta = beta;
  return f;
}

}  // namespace

TEST_CASE("hazard ratio two is recovered on a large two-group sample") {
  Rng rng(404);
  Sample s = binary_ph(2000, std::log(2.0), 0.2, rng);
  CoxFit fit = fit_cox(s.records, s.x);
  CHECK(std::fabs(fit.beta[0] - std::log(2.0)) / std::log(2.0) < 0.10);
  CHECK(fit.covariance(0, 0) > 0.0);
  CHECK(fit.n_events == 1600);
}

TEST_CASE("degenerate designs and bad inputs are rejected") {
  std::vector<SurvivalRecord> recs = {{1, true}, {2, true}, {3, false}};
  Matrix constant(3, 1);
  for (int i = 0; i < 3; ++i) constant(i, 0) = 4.2;
  CHECK_THROWS_WITH_AS(fit_cox(recs, constant),
                       doctest::Contains("non-identifiable"),
                       std::runtime_error);

  Matrix ok(3, 1);
  ok(0, 0) = 1;
  ok(1, 0) = 0;
  ok(2, 0) = 1;
  std::vector<SurvivalRecord> none = {{1, false}, {2, false}, {3, false}};
  CHECK_THROWS_WITH_AS(fit_cox(none, ok), doctest::Contains("no events"),
                       std::runtime_error);

  std::vector<SurvivalRecord> neg = {{-1, true}, {2, true}, {3, true}};
  CHECK_THROWS_AS(fit_cox(neg, ok), std::invalid_argument);
}

TEST_CASE("a covariate that perfectly orders the events is separation") {
  // the largest covariate always fails first: likelihood is monotone in beta
  std::vector<SurvivalRecord> recs;
  Matrix x(6, 1);
  for (int i = 0; i < 6; ++i) {
    recs.push_back({1.0 + i, true});
    x(i, 0) = 6.0 - i;
  }
  CHECK_THROWS_WITH_AS(fit_cox(recs, x), doctest::Contains("separation"),
                       std::runtime_error);
}

TEST_CASE("score at zero equals the log-rank numerator for a binary covariate") {
  // ten records with ties and censoring; hand log-rank O-E on group 1
  std::vector<double> t = {1, 1, 2, 2, 3, 3, 4, 5, 5, 6};
  std::vector<bool> ev = {true, true, true, false, true,
                          true, false, true, true, false};
  std::vector<double> xv = {1, 0, 1, 1, 0, 1, 0, 0, 1, 0};
  std::vector<SurvivalRecord> recs;
  Matrix x(10, 1);
  for (int i = 0; i < 10; ++i) {
    recs.push_back({t[i], static_cast<bool>(ev[i])});
    x(i, 0) = xv[i];
  }

  double logrank = 0.0;  // sum over distinct event times of d1 - d * n1/n
  for (double tk : {1.0, 2.0, 3.0, 5.0}) {
    double n = 0, n1 = 0, d = 0, d1 = 0;
    for (int i = 0; i < 10; ++i) {
      if (t[i] >= tk) {
        n += 1;
        n1 += xv[i];
      }
      if (t[i] == tk && ev[i]) {
        d += 1;
        d1 += xv[i];
      }
    }
    logrank += d1 - d * n1 / n;
  }

  Matrix resid = schoenfeld_residuals(fit_at({0.0}), recs, x);
  double colsum = 0.0;
  for (int r = 0; r < resid.rows; ++r) colsum += resid(r, 0);
  CHECK(colsum == doctest::Approx(logrank).epsilon(1e-12));
}

TEST_CASE("residual is zero when the risk set shares one covariate value") {
  std::vector<SurvivalRecord> recs = {{1, true}, {2, false}, {3, false}};
  Matrix x(3, 1);
  for (int i = 0; i < 3; ++i) x(i, 0) = 5.0;
  Matrix resid = schoenfeld_residuals(fit_at({0.0}), recs, x);
  REQUIRE(resid.rows == 1);
  CHECK(resid(0, 0) == 0.0);
}

TEST_CASE("five-record residuals match hand-computed risk-set means") {
  // events at 1, 2, 3; censorings at 4, 5; x = 1,0,1,0,1; beta = 0
  std::vector<SurvivalRecord> recs = {
      {1, true}, {2, true}, {3, true}, {4, false}, {5, false}};
  Matrix x(5, 1);
  x(0, 0) = 1;
  x(1, 0) = 0;
  x(2, 0) = 1;
  x(3, 0) = 0;
  x(4, 0) = 1;
  Matrix resid = schoenfeld_residuals(fit_at({0.0}), recs, x);
  REQUIRE(resid.rows == 3);
  CHECK(resid(0, 0) == doctest::Approx(1.0 - 3.0 / 5.0).epsilon(1e-12));
  CHECK(resid(1, 0) == doctest::Approx(0.0 - 2.0 / 4.0).epsilon(1e-12));
  CHECK(resid(2, 0) == doctest::Approx(1.0 - 2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("residual columns sum to zero at the fitted coefficients") {
  Rng rng(11);
  Sample s = binary_ph(300, 0.7, 0.25, rng);
  // second, continuous covariate
  Matrix x(300, 2);
  for (int i = 0; i < 300; ++i) {
    x(i, 0) = s.x(i, 0);
    x(i, 1) = rng.normal();
  }
  CoxFit fit = fit_cox(s.records, x);
  Matrix resid = schoenfeld_residuals(fit, s.records, x);
  for (int j = 0; j < 2; ++j) {
    double sum = 0.0;
    for (int r = 0; r < resid.rows; ++r) sum += resid(r, j);
    CHECK(std::fabs(sum) < 1e-8);
  }
}

TEST_CASE("partial likelihood is a rank statistic") {
  Rng rng(21);
  Sample s = binary_ph(400, 0.5, 0.2, rng);
  CoxFit a = fit_cox(s.records, s.x);
  std::vector<SurvivalRecord> squared = s.records;
  for (auto& r : squared) r.duration *= r.duration;
  CoxFit b = fit_cox(squared, s.x);
  CHECK(std::fabs(a.beta[0] - b.beta[0]) < 1e-8);
}

TEST_CASE("repeat fits are bit-identical") {
  Rng rng(31);
  Sample s = binary_ph(250, 0.4, 0.2, rng);
  CoxFit a = fit_cox(s.records, s.x);
  CoxFit b = fit_cox(s.records, s.x);
  CHECK(a.beta[0] == b.beta[0]);
  CHECK(a.loglik == b.loglik);
}

TEST_CASE("uncorrelated residuals give a zero statistic and p of one") {
  // all five subjects are events at t = 1..5 with x = (16/29, 1, 0, 1, 16/29):
  // the score vanishes at beta = 0 and the residuals are exactly orthogonal
  // to the centered product-limit transform (0, .2, .4, .6, .8)
  std::vector<SurvivalRecord> recs = {
      {1, true}, {2, true}, {3, true}, {4, true}, {5, true}};
  Matrix x(5, 1);
  x(0, 0) = 16.0 / 29.0;
  x(1, 0) = 1.0;
  x(2, 0) = 0.0;
  x(3, 0) = 1.0;
  x(4, 0) = 16.0 / 29.0;
  CoxFit fit = fit_cox(recs, x);
  CHECK(std::fabs(fit.beta[0]) < 1e-10);
  PhaReport pha = pha_test(fit, recs, x);
  CHECK(pha.covariates[0].chi2 < 1e-12);
  CHECK(pha.covariates[0].p == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(pha.global_chi2 < 1e-12);
  CHECK(pha.global_p == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_FALSE(pha.rejected);
}

TEST_CASE("test size stays near five percent under proportional hazards") {
  Rng rng(808);
  int rejections = 0;
  for (int repeat = 0; repeat < 200; ++repeat) {
    Sample s = binary_ph(150, 0.5, 0.0, rng);
    CoxFit fit = fit_cox(s.records, s.x);
    PhaReport pha = pha_test(fit, s.records, s.x);
    if (pha.rejected) ++rejections;
  }
  CHECK(rejections >= 4);   // 2%
  CHECK(rejections <= 16);  // 8%
}

TEST_CASE("a time-varying effect is detected with high power") {
  // group 1 hazard exp(1 + t): T = log(1 + E/e) by inversion
  Rng rng(909);
  int rejections = 0;
  const int reps = 40;
  for (int repeat = 0; repeat < reps; ++repeat) {
    std::vector<SurvivalRecord> recs;
    Matrix x(1000, 1);
    for (int i = 0; i < 1000; ++i) {
      double u = rng.uniform01();
      while (u <= 0.0) u = rng.uniform01();
      const double e = -std::log(u);
      const double xi = i % 2 == 0 ? 0.0 : 1.0;
      x(i, 0) = xi;
      const double t = xi == 0.0 ? e : std::log(1.0 + e / std::exp(1.0));
      recs.push_back({t, true});
    }
    CoxFit fit = fit_cox(recs, x);
    PhaReport pha = pha_test(fit, recs, x);
    if (pha.rejected) ++rejections;
  }
  CHECK(rejections > reps * 0.8);
}

TEST_CASE("p-values ignore affine covariate rescaling") {
  Rng rng(99);
  Sample s = binary_ph(300, 0.6, 0.2, rng);
  CoxFit fit = fit_cox(s.records, s.x);
  PhaReport a = pha_test(fit, s.records, s.x);

  Matrix scaled(300, 1);
  for (int i = 0; i < 300; ++i) scaled(i, 0) = 3.0 * s.x(i, 0) - 7.0;
  CoxFit fit2 = fit_cox(s.records, scaled);
  PhaReport b = pha_test(fit2, s.records, scaled);
  CHECK(a.covariates[0].p == doctest::Approx(b.covariates[0].p).epsilon(1e-9));
  CHECK(a.global_p == doctest::Approx(b.global_p).epsilon(1e-9));
}

TEST_CASE("single-covariate global statistic equals the per-covariate one") {
  Rng rng(77);
  Sample s = binary_ph(200, 0.5, 0.2, rng);
  CoxFit fit = fit_cox(s.records, s.x);
  PhaReport pha = pha_test(fit, s.records, s.x);
  REQUIRE(pha.df == 1);
  CHECK(pha.global_chi2 ==
        doctest::Approx(pha.covariates[0].chi2).epsilon(1e-9));
  CHECK(pha.covariates[0].p >= 0.0);
  CHECK(pha.covariates[0].p <= 1.0);
}

TEST_CASE("the test needs at least two events") {
  std::vector<SurvivalRecord> recs = {{1, true}, {2, false}, {3, false}};
  Matrix x(3, 1);
  x(0, 0) = 1;
  x(1, 0) = 0;
  x(2, 0) = 1;
  CHECK_THROWS_AS(pha_test(fit_at({0.1}), recs, x), std::invalid_argument);
}

TEST_CASE("identity transform is available and reported") {
  Rng rng(55);
  Sample s = binary_ph(200, 0.5, 0.2, rng);
  CoxFit fit = fit_cox(s.records, s.x);
  PhaReport km = pha_test(fit, s.records, s.x, TimeTransform::Km);
  PhaReport id = pha_test(fit, s.records, s.x, TimeTransform::Identity);
  CHECK(km.transform == TimeTransform::Km);
  CHECK(id.transform == TimeTransform::Identity);
  CHECK(km.global_p >= 0.0);
  CHECK(id.global_p >= 0.0);
}

TEST_CASE("report json round-trips") {
  Rng rng(66);
  Sample s = binary_ph(200, 0.5, 0.2, rng);
  CoxFit fit = fit_cox(s.records, s.x);
  PhaReport pha = pha_test(fit, s.records, s.x);
  nlohmann::json j = pha_to_json(pha, {"group"});
  std::vector<std::string> names;
  PhaReport back = pha_from_json(j, names);
  REQUIRE(names == std::vector<std::string>{"group"});
  CHECK(back.global_chi2 == pha.global_chi2);
  CHECK(back.global_p == pha.global_p);
  CHECK(back.df == pha.df);
  CHECK(back.rejected == pha.rejected);
  CHECK(back.transform == pha.transform);
  CHECK(back.covariates[0].chi2 == pha.covariates[0].chi2);
  CHECK(back.covariates[0].p == pha.covariates[0].p);
}
