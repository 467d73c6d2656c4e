#include "exitsurv/aft.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "exitsurv/optimize.hpp"
#include "exitsurv/special.hpp"

namespace exitsurv {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Unpacked {
  double a0;
  const double* coef;  // k entries
  std::size_t k;
  double sigma;
  double m1, m2;
};

Unpacked unpack(Family family, const std::vector<double>& theta, std::size_t k) {
  Unpacked u;
  u.a0 = theta[0];
  u.coef = theta.data() + 1;
  u.k = k;
  u.sigma = family == Family::Exponential ? 1.0 : std::exp(theta[1 + k]);
  if (family == Family::GeneralizedF) {
    u.m1 = std::exp(theta[2 + k]);
    u.m2 = std::exp(theta[3 + k]);
  } else {
    u.m1 = u.m2 = 1.0;
  }
  return u;
}

double eta_of(const Unpacked& u, const AftData& data, std::size_t i) {
  double eta = u.a0;
  for (std::size_t j = 0; j < u.k; ++j)
    eta += u.coef[j] * data.x(static_cast<int>(i), static_cast<int>(j));
  return eta;
}

}  // namespace

std::size_t aft_param_count(Family family, std::size_t n_covariates) {
  std::size_t n = 1 + n_covariates;
  if (family != Family::Exponential) ++n;       // log sigma
  if (family == Family::GeneralizedF) n += 2;  // log shapes
  return n;
}

double aft_loglik(Family family, const AftData& data,
                  const std::vector<double>& theta) {
  std::size_t k = static_cast<std::size_t>(data.x.cols);
  if (theta.size() != aft_param_count(family, k))
    throw std::invalid_argument("aft_loglik: parameter vector has wrong length");
  Unpacked u = unpack(family, theta, k);
  ErrorLaw law{family, u.m1, u.m2};
  double log_sigma = std::log(u.sigma);

  double ll = 0.0;
  for (std::size_t i = 0; i < data.time.size(); ++i) {
    double t = data.time[i];
    double w = (std::log(t) - eta_of(u, data, i)) / u.sigma;
    double term = data.event[i]
                      ? error_log_density(law, w) - log_sigma - std::log(t)
                      : error_log_survival(law, w);
    if (!std::isfinite(term)) return kNegInf;
    ll += term;
  }
  return std::isfinite(ll) ? ll : kNegInf;
}

std::vector<double> aft_loglik_gradient(Family family, const AftData& data,
                                        const std::vector<double>& theta) {
  std::size_t k = static_cast<std::size_t>(data.x.cols);
  std::size_t np = aft_param_count(family, k);
  if (theta.size() != np)
    throw std::invalid_argument("aft_loglik_gradient: parameter vector has wrong length");
  Unpacked u = unpack(family, theta, k);
  ErrorLaw law{family, u.m1, u.m2};

  std::vector<double> g(np, 0.0);
  long n_events = 0;
  for (std::size_t i = 0; i < data.time.size(); ++i) {
    double w = (std::log(data.time[i]) - eta_of(u, data, i)) / u.sigma;
    // d/dw of the subject's contribution: log g for events, log S for
    // censored (whose w-derivative is minus the hazard).
    double psi = data.event[i] ? error_dlog_density(law, w) : -error_hazard(law, w);
    g[0] += psi * (-1.0 / u.sigma);
    for (std::size_t j = 0; j < k; ++j)
      g[1 + j] += psi * (-data.x(static_cast<int>(i), static_cast<int>(j)) / u.sigma);
    if (family != Family::Exponential) g[1 + k] += psi * (-w);
    if (data.event[i]) ++n_events;
  }
  if (family != Family::Exponential) g[1 + k] -= static_cast<double>(n_events);

  if (family == Family::GeneralizedF) {
    // No closed form for the shape derivatives of the regularized
    // incomplete beta; five-point central differences on the likelihood.
    for (std::size_t p = 2 + k; p < np; ++p) {
      double h = 1e-3 * std::max(1.0, std::fabs(theta[p]));
      std::vector<double> th = theta;
      auto at = [&](double delta) {
        th[p] = theta[p] + delta;
        return aft_loglik(family, data, th);
      };
      g[p] = (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
    }
  }
  return g;
}

namespace {

AftFit make_fit(Family family, const std::vector<int>& columns,
                const std::vector<double>& theta, const std::vector<double>& mean,
                const std::vector<double>& sd, double loglik, long n_events,
                long n_censored) {
  std::size_t k = columns.size();
  Unpacked u = unpack(family, theta, k);
  AftFit fit;
  fit.family = family;
  fit.retained = columns;
  fit.intercept = u.a0;
  fit.coefficients.assign(u.coef, u.coef + k);
  fit.scale = u.sigma;
  fit.m1 = u.m1;
  fit.m2 = u.m2;
  fit.feature_mean = mean;
  fit.feature_sd = sd;
  fit.max_loglik = loglik;
  fit.n_events = n_events;
  fit.n_censored = n_censored;
  return fit;
}

}  // namespace

std::vector<double> AftFit::pack() const {
  std::vector<double> theta;
  theta.reserve(aft_param_count(family, retained.size()));
  theta.push_back(intercept);
  theta.insert(theta.end(), coefficients.begin(), coefficients.end());
  if (family != Family::Exponential) theta.push_back(std::log(scale));
  if (family == Family::GeneralizedF) {
    theta.push_back(std::log(m1));
    theta.push_back(std::log(m2));
  }
  return theta;
}

AftFit fit_aft(Family family, const std::vector<AftRecord>& records,
               const AftOptions& options) {
  std::vector<int> columns;
  if (options.columns) {
    columns = *options.columns;
  } else {
    columns.resize(kNumFeatures);
    std::iota(columns.begin(), columns.end(), 0);
  }

  long n_events = 0, n_censored = 0;
  for (const auto& r : records) {
    if (!(r.survival.duration > 0.0))
      throw std::invalid_argument("fit_aft: durations must be positive");
    if (r.survival.event) ++n_events;
    else ++n_censored;
  }
  if (n_events == 0) throw FitError("no events");

  std::size_t n = records.size();
  std::size_t k = columns.size();

  // z-score the covariates; a constant column cannot be standardized and
  // makes the design singular anyway.
  std::vector<double> mean(k, 0.0), sd(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    double m = 0.0;
    for (const auto& r : records) m += r.features[static_cast<size_t>(columns[j])];
    m /= static_cast<double>(n);
    double v = 0.0;
    for (const auto& r : records) {
      double d = r.features[static_cast<size_t>(columns[j])] - m;
      v += d * d;
    }
    v /= static_cast<double>(n);
    mean[j] = m;
    sd[j] = std::sqrt(v);
    if (!(sd[j] > 0.0))
      throw FitError(std::string("non-identifiable: constant covariate column '") +
                     kFeatureNames[static_cast<size_t>(columns[j])] + "'");
  }

  AftData data;
  data.time.resize(n);
  data.event.resize(n);
  data.x = Matrix(static_cast<int>(n), static_cast<int>(k));
  for (std::size_t i = 0; i < n; ++i) {
    data.time[i] = records[i].survival.duration;
    data.event[i] = records[i].survival.event ? 1 : 0;
    for (std::size_t j = 0; j < k; ++j)
      data.x(static_cast<int>(i), static_cast<int>(j)) =
          (records[i].features[static_cast<size_t>(columns[j])] - mean[j]) / sd[j];
  }

  // Start at the event-time log mean with unit scale and null coefficients.
  std::size_t np = aft_param_count(family, k);
  std::vector<double> theta0(np, 0.0);
  double a0 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (data.event[i]) a0 += std::log(data.time[i]);
  theta0[0] = a0 / static_cast<double>(n_events);

  auto objective = [&](const std::vector<double>& th) {
    return -aft_loglik(family, data, th);
  };
  auto gradient = [&](const std::vector<double>& th) {
    std::vector<double> g = aft_loglik_gradient(family, data, th);
    for (double& v : g) v = -v;
    return g;
  };

  BfgsOptions bopt;
  // The shape entries of the GeneralizedF gradient are finite differences
  // with noise around 1e-8; demanding more than that would never converge.
  bopt.grad_tol = family == Family::GeneralizedF ? 5e-7 : 1e-9;
  bopt.step_tol = 1e-10;
  bopt.max_iter = options.max_iter;
  BfgsResult res = minimize_bfgs(objective, gradient, theta0, bopt);

  if (!res.converged && !res.step_converged)
    throw ConvergenceError(
        "fit_aft: no convergence in " + std::to_string(options.max_iter) +
            " iterations (" + family_name(family) + ")",
        make_fit(family, columns, res.x, mean, sd, -res.f, n_events, n_censored));

  AftFit fit =
      make_fit(family, columns, res.x, mean, sd, -res.f, n_events, n_censored);

  // Observed information by central differences of the analytic gradient.
  int m = static_cast<int>(np);
  Matrix info(m, m);
  for (int i = 0; i < m; ++i) {
    double h = 1e-5 * std::max(1.0, std::fabs(res.x[static_cast<size_t>(i)]));
    std::vector<double> th = res.x;
    th[static_cast<size_t>(i)] = res.x[static_cast<size_t>(i)] + h;
    std::vector<double> gp = aft_loglik_gradient(family, data, th);
    th[static_cast<size_t>(i)] = res.x[static_cast<size_t>(i)] - h;
    std::vector<double> gm = aft_loglik_gradient(family, data, th);
    for (int j = 0; j < m; ++j)
      info(i, j) = -(gp[static_cast<size_t>(j)] - gm[static_cast<size_t>(j)]) / (2 * h);
  }
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      double v = 0.5 * (info(i, j) + info(j, i));
      info(i, j) = info(j, i) = v;
    }
  if (!invert_spd(info, fit.covariance))
    throw FitError("non-identifiable: singular information matrix (" +
                   std::string(family_name(family)) + ")");
  return fit;
}

WaldReport wald_test(const AftFit& fit, double level) {
  std::size_t k = fit.retained.size();
  if (fit.covariance.rows != static_cast<int>(aft_param_count(fit.family, k)))
    throw std::invalid_argument("wald_test: fit has no usable covariance");
  WaldReport rep;
  rep.level = level;
  for (std::size_t j = 0; j < k; ++j) {
    WaldEntry e;
    e.feature = fit.retained[j];
    e.estimate = fit.coefficients[j];
    int d = static_cast<int>(1 + j);
    double var = fit.covariance(d, d);
    e.se = var > 0.0 ? std::sqrt(var) : 0.0;
    if (e.se > 0.0) {
      e.z = e.estimate / e.se;
      e.p = 2.0 * norm_sf(std::fabs(e.z));
      e.significant = e.p < level;
    } else {
      e.degenerate = true;
      e.z = 0.0;
      e.p = 1.0;
    }
    rep.entries.push_back(e);
  }
  return rep;
}

AftFit select_covariates(Family family, const std::vector<AftRecord>& records,
                         double level, const AftOptions& options) {
  AftFit full = fit_aft(family, records, options);
  WaldReport wald = wald_test(full, level);
  AftOptions refit_options = options;
  refit_options.columns.emplace();
  for (const auto& e : wald.entries)
    if (e.significant) refit_options.columns->push_back(e.feature);
  // An empty survivor set still refits: intercept and scale only.
  return fit_aft(family, records, refit_options);
}

double conditional_survival(const AftFit& fit, const FeatureVector& x, double t) {
  double eta = fit.intercept;
  for (std::size_t j = 0; j < fit.retained.size(); ++j)
    eta += fit.coefficients[j] *
           (x[static_cast<size_t>(fit.retained[j])] - fit.feature_mean[j]) /
           fit.feature_sd[j];
  TimeLaw law(ErrorLaw{fit.family, fit.m1, fit.m2}, eta, fit.scale);
  return survival(law, t);
}

nlohmann::json aft_to_json(const AftFit& fit) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["family"] = family_name(fit.family);
  j["retained"] = fit.retained;
  j["intercept"] = fit.intercept;
  j["coefficients"] = fit.coefficients;
  j["scale"] = fit.scale;
  j["m1"] = fit.m1;
  j["m2"] = fit.m2;
  j["feature_mean"] = fit.feature_mean;
  j["feature_sd"] = fit.feature_sd;
  j["covariance"] = {{"rows", fit.covariance.rows},
                     {"cols", fit.covariance.cols},
                     {"data", fit.covariance.a}};
  j["max_loglik"] = fit.max_loglik;
  j["n_events"] = fit.n_events;
  j["n_censored"] = fit.n_censored;
  return j;
}

AftFit aft_from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != 1)
    throw std::runtime_error("unsupported model format version");
  AftFit fit;
  fit.family = family_from_name(j.at("family").get<std::string>());
  fit.retained = j.at("retained").get<std::vector<int>>();
  fit.intercept = j.at("intercept").get<double>();
  fit.coefficients = j.at("coefficients").get<std::vector<double>>();
  fit.scale = j.at("scale").get<double>();
  fit.m1 = j.at("m1").get<double>();
  fit.m2 = j.at("m2").get<double>();
  fit.feature_mean = j.at("feature_mean").get<std::vector<double>>();
  fit.feature_sd = j.at("feature_sd").get<std::vector<double>>();
  const auto& cov = j.at("covariance");
  fit.covariance.rows = cov.at("rows").get<int>();
  fit.covariance.cols = cov.at("cols").get<int>();
  fit.covariance.a = cov.at("data").get<std::vector<double>>();
  fit.max_loglik = j.at("max_loglik").get<double>();
  fit.n_events = j.at("n_events").get<long>();
  fit.n_censored = j.at("n_censored").get<long>();
  return fit;
}

void save_aft(const AftFit& fit, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out << aft_to_json(fit).dump(2) << '\n';
}

AftFit load_aft(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  nlohmann::json j;
  in >> j;
  return aft_from_json(j);
}

}  // namespace exitsurv
