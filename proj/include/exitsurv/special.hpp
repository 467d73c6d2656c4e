#pragma once

namespace exitsurv {

// Log-gamma and log-beta for positive arguments.
double log_gamma(double x);
double log_beta(double a, double b);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

// Regularized incomplete gamma: P(a, x) lower, Q(a, x) upper.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Standard normal distribution.
double norm_pdf(double x);
double norm_log_pdf(double x);
double norm_cdf(double x);
double norm_sf(double x);       // 1 - Phi(x)
double norm_log_sf(double x);   // log(1 - Phi(x)), stable far in the tail
double norm_hazard(double x);   // pdf / sf (inverse Mills ratio)
double norm_quantile(double p);

// Upper tail of the chi-square distribution with k degrees of freedom.
double chi2_sf(double x, double k);

}  // namespace exitsurv
