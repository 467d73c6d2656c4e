#pragma once

#include <string>

namespace exitsurv {

// Parametric families for the survival-time error term. Exponential is
// Weibull with the scale pinned at 1; GeneralizedF is the log-F law,
// which nests Weibull (m2 -> inf), LogNormal (m1, m2 -> inf) and the
// log-logistic (m1 = m2 = 1).
enum class Family { Exponential, Weibull, LogNormal, GeneralizedF };

const char* family_name(Family f);
Family family_from_name(const std::string& name);  // throws on unknown name

struct ErrorLaw {
  Family family = Family::Weibull;
  double m1 = 1.0;  // GeneralizedF shapes, ignored elsewhere
  double m2 = 1.0;
};

// Time law: log T = location + scale * eps, eps ~ ErrorLaw.
struct TimeLaw {
  ErrorLaw law;
  double location = 0.0;  // eta
  double scale = 1.0;     // sigma; fixed at 1 for Exponential

  TimeLaw() = default;
  TimeLaw(ErrorLaw l, double loc, double sc);  // validates scale > 0
};

// Standardized error-law building blocks, w = (log t - location)/scale.
// These are what the likelihood code consumes directly.
double error_log_density(const ErrorLaw& law, double w);
double error_dlog_density(const ErrorLaw& law, double w);  // d/dw log g(w)
double error_survival(const ErrorLaw& law, double w);
double error_log_survival(const ErrorLaw& law, double w);
double error_hazard(const ErrorLaw& law, double w);  // g(w)/S(w)

// Time-scale functions.
double log_density(const TimeLaw& tl, double t);   // t > 0
double survival(const TimeLaw& tl, double t);      // t >= 0
double hazard(const TimeLaw& tl, double t);        // t > 0, S(t) > 0
double quantile(const TimeLaw& tl, double p);      // p in (0, 1)

}  // namespace exitsurv
