#pragma once

#include <string>
#include <vector>

#include "exitsurv/data.hpp"
#include "exitsurv/linalg.hpp"

#include "json.hpp"

namespace exitsurv {

struct CoxFit {
  std::vector<double> beta;  // one per covariate, original scale
  Matrix covariance;         // inverse observed information
  double loglik = 0.0;       // Breslow partial log-likelihood at beta
  long n_events = 0;
  int iterations = 0;
};

// Breslow-ties partial likelihood, Newton iterations with step-halving.
// Throws FitError-style runtime errors: "separation" when a covariate
// perfectly orders the events, "non-identifiable" on a degenerate design.
CoxFit fit_cox(const std::vector<SurvivalRecord>& records, const Matrix& features);

// One row per event, ordered by event time (ties keep input order):
// covariate of the failing subject minus the risk-set weighted mean.
Matrix schoenfeld_residuals(const CoxFit& fit,
                            const std::vector<SurvivalRecord>& records,
                            const Matrix& features);

enum class TimeTransform { Km, Identity };

struct PhaCovariate {
  double chi2 = 0.0;
  double p = 1.0;  // df = 1
};

struct PhaReport {
  std::vector<PhaCovariate> covariates;
  double global_chi2 = 0.0;
  int df = 0;  // = number of covariates
  double global_p = 1.0;
  TimeTransform transform = TimeTransform::Km;
  bool rejected = false;  // global_p < 0.05
};

// Correlation test of the scaled Schoenfeld residuals against transformed
// event time; the default transform is one minus the left-continuous
// product-limit estimate.
PhaReport pha_test(const CoxFit& fit, const std::vector<SurvivalRecord>& records,
                   const Matrix& features,
                   TimeTransform transform = TimeTransform::Km);

nlohmann::json pha_to_json(const PhaReport& report,
                           const std::vector<std::string>& covariate_names);
// Inverse of pha_to_json; the covariate names land in `names`.
PhaReport pha_from_json(const nlohmann::json& j, std::vector<std::string>& names);

}  // namespace exitsurv
