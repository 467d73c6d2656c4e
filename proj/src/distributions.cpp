#include "exitsurv/distributions.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "exitsurv/special.hpp"

namespace exitsurv {

const char* family_name(Family f) {
  switch (f) {
    case Family::Exponential: return "exponential";
    case Family::Weibull: return "weibull";
    case Family::LogNormal: return "lognormal";
    case Family::GeneralizedF: return "generalized_f";
  }
  return "?";
}

Family family_from_name(const std::string& name) {
  if (name == "exponential") return Family::Exponential;
  if (name == "weibull") return Family::Weibull;
  if (name == "lognormal") return Family::LogNormal;
  if (name == "generalized_f") return Family::GeneralizedF;
  throw std::invalid_argument("unknown distribution family: '" + name + "'");
}

TimeLaw::TimeLaw(ErrorLaw l, double loc, double sc) : law(l), location(loc), scale(sc) {
  if (!(scale > 0.0)) throw std::invalid_argument("TimeLaw: scale must be positive");
  if (law.family == Family::Exponential && scale != 1.0)
    throw std::invalid_argument("TimeLaw: Exponential fixes scale = 1");
  if (law.family == Family::GeneralizedF && (!(law.m1 > 0.0) || !(law.m2 > 0.0)))
    throw std::invalid_argument("TimeLaw: GeneralizedF shapes must be positive");
}

namespace {

// Beta-prime transform for the log-F law: q = (m1/m2) e^w. The survival
// of w is I_{1/(1+q)}(m2, m1).
double logf_q(const ErrorLaw& law, double w) {
  return std::exp(std::log(law.m1 / law.m2) + w);
}

}  // namespace

double error_log_density(const ErrorLaw& law, double w) {
  switch (law.family) {
    case Family::Exponential:
    case Family::Weibull:
      // Standard minimum extreme value: g(w) = exp(w - e^w).
      return w - std::exp(w);
    case Family::LogNormal:
      return norm_log_pdf(w);
    case Family::GeneralizedF: {
      double m1 = law.m1, m2 = law.m2;
      double lq = std::log(m1 / m2) + w;
      // log g = m1 log(m1/m2) + m1 w - log B(m1,m2) - (m1+m2) log(1+q)
      double log1pq = lq > 30.0 ? lq : std::log1p(std::exp(lq));
      return m1 * std::log(m1 / m2) + m1 * w - log_beta(m1, m2) -
             (m1 + m2) * log1pq;
    }
  }
  return 0.0;
}

double error_dlog_density(const ErrorLaw& law, double w) {
  switch (law.family) {
    case Family::Exponential:
    case Family::Weibull:
      return 1.0 - std::exp(w);
    case Family::LogNormal:
      return -w;
    case Family::GeneralizedF: {
      double lq = std::log(law.m1 / law.m2) + w;
      double rho = lq > 30.0 ? 1.0 : std::exp(lq) / (1.0 + std::exp(lq));
      return law.m1 - (law.m1 + law.m2) * rho;
    }
  }
  return 0.0;
}

double error_survival(const ErrorLaw& law, double w) {
  switch (law.family) {
    case Family::Exponential:
    case Family::Weibull:
      return std::exp(-std::exp(w));
    case Family::LogNormal:
      return norm_sf(w);
    case Family::GeneralizedF: {
      double q = logf_q(law, w);
      if (!std::isfinite(q)) return 0.0;
      return incomplete_beta(law.m2, law.m1, 1.0 / (1.0 + q));
    }
  }
  return 0.0;
}

double error_log_survival(const ErrorLaw& law, double w) {
  switch (law.family) {
    case Family::Exponential:
    case Family::Weibull:
      return -std::exp(w);
    case Family::LogNormal:
      return norm_log_sf(w);
    case Family::GeneralizedF: {
      double s = error_survival(law, w);
      if (s <= 0.0) return -std::numeric_limits<double>::infinity();
      return std::log(s);
    }
  }
  return 0.0;
}

double error_hazard(const ErrorLaw& law, double w) {
  switch (law.family) {
    case Family::Exponential:
    case Family::Weibull:
      return std::exp(w);
    case Family::LogNormal:
      return norm_hazard(w);
    case Family::GeneralizedF: {
      double log_h = error_log_density(law, w) - error_log_survival(law, w);
      return std::exp(log_h);
    }
  }
  return 0.0;
}

double log_density(const TimeLaw& tl, double t) {
  if (!(t > 0.0)) throw std::domain_error("log_density: t must be positive");
  double w = (std::log(t) - tl.location) / tl.scale;
  return error_log_density(tl.law, w) - std::log(tl.scale) - std::log(t);
}

double survival(const TimeLaw& tl, double t) {
  if (t < 0.0) throw std::domain_error("survival: t must be non-negative");
  if (t == 0.0) return 1.0;
  double w = (std::log(t) - tl.location) / tl.scale;
  return error_survival(tl.law, w);
}

double hazard(const TimeLaw& tl, double t) {
  if (!(t > 0.0)) throw std::domain_error("hazard: t must be positive");
  double w = (std::log(t) - tl.location) / tl.scale;
  double s = error_survival(tl.law, w);
  if (s <= 0.0)
    throw std::overflow_error("hazard: survival underflowed to zero");
  double f = std::exp(error_log_density(tl.law, w));
  return f / (s * tl.scale * t);
}

double quantile(const TimeLaw& tl, double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("quantile: p must lie in (0, 1)");
  switch (tl.law.family) {
    case Family::Exponential:
    case Family::Weibull:
      // S(t) = exp(-(t/e^mu)^(1/sigma))  =>  t = e^mu (-log(1-p))^sigma
      return std::exp(tl.location + tl.scale * std::log(-std::log1p(-p)));
    case Family::LogNormal:
      return std::exp(tl.location + tl.scale * norm_quantile(p));
    case Family::GeneralizedF: {
      // Invert the standardized survival by bisection in w.
      double target = 1.0 - p;
      double lo = -1.0, hi = 1.0;
      while (error_survival(tl.law, lo) < target && lo > -700.0) lo *= 2.0;
      while (error_survival(tl.law, hi) > target && hi < 700.0) hi *= 2.0;
      for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (error_survival(tl.law, mid) >= target) lo = mid;
        else hi = mid;
        if (hi - lo < 1e-14 * (1.0 + std::fabs(lo))) break;
      }
      double w = 0.5 * (lo + hi);
      return std::exp(tl.location + tl.scale * w);
    }
  }
  return 0.0;
}

}  // namespace exitsurv
