#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "exitsurv/data.hpp"
#include "exitsurv/distributions.hpp"
#include "exitsurv/linalg.hpp"

#include "json.hpp"

namespace exitsurv {

// One subject for regression: censored duration plus covariates.
struct AftRecord {
  SurvivalRecord survival;
  FeatureVector features;
};

// Explicit design for the likelihood functions; the matrix holds whatever
// covariate slice the caller wants (possibly zero columns).
struct AftData {
  std::vector<double> time;  // > 0
  std::vector<char> event;   // 1 = observed, 0 = censored
  Matrix x;                  // n rows, k columns
};

// Free-parameter layout for a k-covariate model:
//   [a0, a_1..a_k, log sigma, log m1, log m2]
// with log sigma omitted for Exponential (sigma pinned at 1) and the two
// shape entries present only for GeneralizedF.
std::size_t aft_param_count(Family family, std::size_t n_covariates);

// Censored log likelihood: sum over events of log f(t|x) plus sum over
// censored subjects of log S(t|x). Non-finite intermediates yield -inf.
double aft_loglik(Family family, const AftData& data,
                  const std::vector<double>& theta);

// Gradient in the same layout as theta. The GeneralizedF shape entries use
// a five-point central difference of the likelihood (the regularized
// incomplete beta has no closed-form shape derivative); everything else is
// analytic.
std::vector<double> aft_loglik_gradient(Family family, const AftData& data,
                                        const std::vector<double>& theta);

struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AftOptions {
  // Feature indices to use: nullopt = all 14, an empty vector = intercept
  // (and scale) only.
  std::optional<std::vector<int>> columns;
  int max_iter = 500;
};

struct AftFit {
  Family family = Family::Weibull;
  std::vector<int> retained;  // feature indices, ascending
  double intercept = 0.0;
  std::vector<double> coefficients;  // standardized scale, one per retained
  double scale = 1.0;
  double m1 = 1.0, m2 = 1.0;         // GeneralizedF only
  std::vector<double> feature_mean;  // standardization constants
  std::vector<double> feature_sd;
  Matrix covariance;  // over free parameters, theta layout
  double max_loglik = 0.0;
  long n_events = 0;
  long n_censored = 0;

  std::vector<double> pack() const;  // theta layout
};

struct ConvergenceError : std::runtime_error {
  ConvergenceError(const std::string& msg, AftFit last)
      : std::runtime_error(msg), last_iterate(std::move(last)) {}
  AftFit last_iterate;  // no covariance; not an optimum
};

// Maximum-likelihood fit with z-scored covariates. Covariance is the
// inverse observed information, from a central difference of the gradient.
AftFit fit_aft(Family family, const std::vector<AftRecord>& records,
               const AftOptions& options = {});

struct WaldEntry {
  int feature = 0;  // index into the 14 features
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p = 1.0;
  bool significant = false;  // p < level, strict
  bool degenerate = false;   // zero standard error
};

struct WaldReport {
  double level = 0.10;
  std::vector<WaldEntry> entries;  // one per retained covariate
};

WaldReport wald_test(const AftFit& fit, double level = 0.10);

// Two-stage selection: full fit, keep covariates with Wald p < level,
// refit once on the survivors (possibly none).
AftFit select_covariates(Family family, const std::vector<AftRecord>& records,
                         double level = 0.10, const AftOptions& options = {});

// P(T > t | x) under the fitted law.
double conditional_survival(const AftFit& fit, const FeatureVector& x, double t);

nlohmann::json aft_to_json(const AftFit& fit);
AftFit aft_from_json(const nlohmann::json& j);
void save_aft(const AftFit& fit, const std::string& path);
AftFit load_aft(const std::string& path);

}  // namespace exitsurv
