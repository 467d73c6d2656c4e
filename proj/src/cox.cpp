#include "exitsurv/cox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "exitsurv/kaplan_meier.hpp"
#include "exitsurv/special.hpp"

namespace exitsurv {

namespace {

struct Standardized {
  Matrix z;  // centered and scaled copy of the features
  std::vector<double> sd;
};

Standardized standardize(const Matrix& features) {
  int n = features.rows, p = features.cols;
  Standardized s;
  s.z = Matrix(n, p);
  s.sd.resize(static_cast<size_t>(p));
  for (int j = 0; j < p; ++j) {
    double m = 0.0;
    for (int i = 0; i < n; ++i) m += features(i, j);
    m /= n;
    double v = 0.0;
    for (int i = 0; i < n; ++i) {
      double d = features(i, j) - m;
      v += d * d;
    }
    double sd = std::sqrt(v / n);
    if (!(sd > 0.0))
      throw std::runtime_error("fit_cox: non-identifiable: constant covariate");
    s.sd[static_cast<size_t>(j)] = sd;
    for (int i = 0; i < n; ++i) s.z(i, j) = (features(i, j) - m) / sd;
  }
  return s;
}

// Indices sorted by duration descending; ties keep input order.
std::vector<int> descending_order(const std::vector<SurvivalRecord>& records) {
  std::vector<int> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return records[static_cast<size_t>(a)].duration >
           records[static_cast<size_t>(b)].duration;
  });
  return order;
}

// One descending sweep: Breslow partial log-likelihood, score and
// information at beta (all on the standardized scale).
void cox_derivatives(const std::vector<SurvivalRecord>& records, const Matrix& z,
                     const std::vector<int>& order, const std::vector<double>& beta,
                     double& loglik, std::vector<double>& score, Matrix& info) {
  int p = z.cols;
  loglik = 0.0;
  score.assign(static_cast<size_t>(p), 0.0);
  info = Matrix(p, p);

  double s0 = 0.0;
  std::vector<double> s1(static_cast<size_t>(p), 0.0);
  Matrix s2(p, p);

  size_t i = 0;
  while (i < order.size()) {
    double t = records[static_cast<size_t>(order[i])].duration;
    size_t group_end = i;
    while (group_end < order.size() &&
           records[static_cast<size_t>(order[group_end])].duration == t)
      ++group_end;
    // The whole tie group enters the risk set before its events count.
    for (size_t g = i; g < group_end; ++g) {
      int idx = order[g];
      double xb = 0.0;
      for (int j = 0; j < p; ++j) xb += beta[static_cast<size_t>(j)] * z(idx, j);
      double w = std::exp(xb);
      s0 += w;
      for (int j = 0; j < p; ++j) {
        s1[static_cast<size_t>(j)] += w * z(idx, j);
        for (int l = j; l < p; ++l) s2(j, l) += w * z(idx, j) * z(idx, l);
      }
    }
    long deaths = 0;
    for (size_t g = i; g < group_end; ++g) {
      int idx = order[g];
      if (!records[static_cast<size_t>(idx)].event) continue;
      ++deaths;
      double xb = 0.0;
      for (int j = 0; j < p; ++j) xb += beta[static_cast<size_t>(j)] * z(idx, j);
      loglik += xb;
      for (int j = 0; j < p; ++j) score[static_cast<size_t>(j)] += z(idx, j);
    }
    if (deaths > 0) {
      double d = static_cast<double>(deaths);
      loglik -= d * std::log(s0);
      for (int j = 0; j < p; ++j) {
        double mj = s1[static_cast<size_t>(j)] / s0;
        score[static_cast<size_t>(j)] -= d * mj;
        for (int l = j; l < p; ++l) {
          double v = d * (s2(j, l) / s0 - mj * s1[static_cast<size_t>(l)] / s0);
          info(j, l) += v;
          if (l != j) info(l, j) += v;
        }
      }
    }
    i = group_end;
  }
}

double cox_loglik_only(const std::vector<SurvivalRecord>& records, const Matrix& z,
                       const std::vector<int>& order, const std::vector<double>& beta) {
  int p = z.cols;
  double loglik = 0.0;
  double s0 = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    double t = records[static_cast<size_t>(order[i])].duration;
    size_t group_end = i;
    while (group_end < order.size() &&
           records[static_cast<size_t>(order[group_end])].duration == t)
      ++group_end;
    long deaths = 0;
    for (size_t g = i; g < group_end; ++g) {
      int idx = order[g];
      double xb = 0.0;
      for (int j = 0; j < p; ++j) xb += beta[static_cast<size_t>(j)] * z(idx, j);
      s0 += std::exp(xb);
      if (records[static_cast<size_t>(idx)].event) {
        ++deaths;
        loglik += xb;
      }
    }
    if (deaths > 0) loglik -= static_cast<double>(deaths) * std::log(s0);
    i = group_end;
  }
  return loglik;
}

}  // namespace

CoxFit fit_cox(const std::vector<SurvivalRecord>& records, const Matrix& features) {
  int n = features.rows, p = features.cols;
  if (static_cast<size_t>(n) != records.size())
    throw std::invalid_argument("fit_cox: records/features size mismatch");
  if (p < 1) throw std::invalid_argument("fit_cox: need at least one covariate");
  long n_events = 0;
  for (const auto& r : records) {
    if (!(r.duration > 0.0))
      throw std::invalid_argument("fit_cox: durations must be positive");
    if (r.event) ++n_events;
  }
  if (n_events == 0) throw std::runtime_error("fit_cox: no events");

  Standardized st = standardize(features);
  std::vector<int> order = descending_order(records);

  std::vector<double> beta(static_cast<size_t>(p), 0.0);
  double loglik = 0.0;
  std::vector<double> score;
  Matrix info;
  int iter = 0;
  const int max_iter = 100;
  for (; iter < max_iter; ++iter) {
    cox_derivatives(records, st.z, order, beta, loglik, score, info);
    double gmax = 0.0;
    for (double g : score) gmax = std::max(gmax, std::fabs(g));
    if (gmax < 1e-8) break;

    std::vector<double> delta;
    if (!solve_spd(info, score, delta))
      throw std::runtime_error("fit_cox: non-identifiable: singular information");
    double step = 1.0;
    std::vector<double> candidate(beta.size());
    bool improved = false;
    for (int h = 0; h < 40; ++h) {
      for (size_t j = 0; j < beta.size(); ++j)
        candidate[j] = beta[j] + step * delta[j];
      double cand_ll = cox_loglik_only(records, st.z, order, candidate);
      if (std::isfinite(cand_ll) && cand_ll > loglik) {
        beta = candidate;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) {
      // The likelihood is flat to roundoff: near the optimum a Newton nudge
      // moves it by less than one ulp, so no halved step can register an
      // improvement even though the gradient is still above tolerance. The
      // score itself stays accurate here, so finish with pure Newton.
      for (int k = 0; k < 8; ++k) {
        for (size_t j = 0; j < beta.size(); ++j) beta[j] += delta[j];
        cox_derivatives(records, st.z, order, beta, loglik, score, info);
        double g = 0.0;
        for (double v : score) g = std::max(g, std::fabs(v));
        if (g < 1e-8) break;
        if (!solve_spd(info, score, delta)) break;
      }
      break;  // the convergence check below decides
    }
    // A standardized coefficient this large means the hazard ratio per SD
    // overflows anything plausible: the likelihood is monotone in beta.
    for (double b : beta)
      if (std::fabs(b) > 15.0) throw std::runtime_error("fit_cox: separation");
  }

  cox_derivatives(records, st.z, order, beta, loglik, score, info);
  double gmax = 0.0;
  for (double g : score) gmax = std::max(gmax, std::fabs(g));
  if (gmax >= 1e-8)
    throw std::runtime_error("fit_cox: no convergence in " +
                             std::to_string(max_iter) + " iterations");

  Matrix cov_std;
  if (!invert_spd(info, cov_std))
    throw std::runtime_error("fit_cox: non-identifiable: singular information");

  CoxFit fit;
  fit.beta.resize(static_cast<size_t>(p));
  fit.covariance = Matrix(p, p);
  for (int j = 0; j < p; ++j) {
    fit.beta[static_cast<size_t>(j)] =
        beta[static_cast<size_t>(j)] / st.sd[static_cast<size_t>(j)];
    for (int l = 0; l < p; ++l)
      fit.covariance(j, l) = cov_std(j, l) / (st.sd[static_cast<size_t>(j)] *
                                              st.sd[static_cast<size_t>(l)]);
  }
  fit.loglik = loglik;
  fit.n_events = n_events;
  fit.iterations = iter;
  return fit;
}

Matrix schoenfeld_residuals(const CoxFit& fit,
                            const std::vector<SurvivalRecord>& records,
                            const Matrix& features) {
  int n = features.rows, p = features.cols;
  if (static_cast<size_t>(n) != records.size() ||
      static_cast<size_t>(p) != fit.beta.size())
    throw std::invalid_argument("schoenfeld_residuals: dimension mismatch");

  // Ascending stable order; ties keep input order for the output rows.
  std::vector<int> asc(records.size());
  std::iota(asc.begin(), asc.end(), 0);
  std::stable_sort(asc.begin(), asc.end(), [&](int a, int b) {
    return records[static_cast<size_t>(a)].duration <
           records[static_cast<size_t>(b)].duration;
  });

  // Suffix sweep: weighted covariate means over each risk set.
  std::vector<double> s1(static_cast<size_t>(p), 0.0);
  double s0 = 0.0;
  std::vector<std::vector<double>> mean_at(records.size());
  size_t i = records.size();
  while (i > 0) {
    size_t group_end = i;  // one past the last member (ascending indexing)
    double t = records[static_cast<size_t>(asc[i - 1])].duration;
    size_t group_begin = i;
    while (group_begin > 0 &&
           records[static_cast<size_t>(asc[group_begin - 1])].duration == t)
      --group_begin;
    for (size_t g = group_begin; g < group_end; ++g) {
      int idx = asc[g];
      double xb = 0.0;
      for (int j = 0; j < p; ++j) xb += fit.beta[static_cast<size_t>(j)] * features(idx, j);
      double w = std::exp(xb);
      s0 += w;
      for (int j = 0; j < p; ++j) s1[static_cast<size_t>(j)] += w * features(idx, j);
    }
    std::vector<double> mean(static_cast<size_t>(p));
    for (int j = 0; j < p; ++j) mean[static_cast<size_t>(j)] = s1[static_cast<size_t>(j)] / s0;
    for (size_t g = group_begin; g < group_end; ++g)
      mean_at[g] = mean;
    i = group_begin;
  }

  long d = 0;
  for (const auto& r : records)
    if (r.event) ++d;
  Matrix res(static_cast<int>(d), p);
  int row = 0;
  for (size_t g = 0; g < asc.size(); ++g) {
    int idx = asc[g];
    if (!records[static_cast<size_t>(idx)].event) continue;
    for (int j = 0; j < p; ++j)
      res(row, j) = features(idx, j) - mean_at[g][static_cast<size_t>(j)];
    ++row;
  }
  return res;
}

PhaReport pha_test(const CoxFit& fit, const std::vector<SurvivalRecord>& records,
                   const Matrix& features, TimeTransform transform) {
  int p = features.cols;
  long d = fit.n_events;
  if (d < 2) throw std::invalid_argument("pha_test: need at least 2 events");

  Matrix res = schoenfeld_residuals(fit, records, features);

  // Event times ascending, matched to residual rows.
  std::vector<double> event_times;
  event_times.reserve(static_cast<size_t>(d));
  for (const auto& r : records)
    if (r.event) event_times.push_back(r.duration);
  std::sort(event_times.begin(), event_times.end());

  std::vector<double> g(event_times.size());
  if (transform == TimeTransform::Identity) {
    g = event_times;
  } else {
    // One minus the left-continuous product-limit estimate: events at the
    // k-th distinct time get the survival from just before it.
    KmCurve km = km_fit(records);
    size_t step = 0;
    for (size_t k = 0; k < event_times.size(); ++k) {
      while (step < km.event_times.size() && km.event_times[step] < event_times[k])
        ++step;
      g[k] = 1.0 - (step == 0 ? 1.0 : km.estimates[step - 1]);
    }
  }

  double gbar = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
  double sum_xx = 0.0;
  for (double& v : g) {
    v -= gbar;
    sum_xx += v * v;
  }

  PhaReport rep;
  rep.transform = transform;
  rep.df = p;
  rep.covariates.assign(static_cast<size_t>(p), PhaCovariate{});
  if (sum_xx <= 0.0) {
    // All events tied: no time variation to regress against.
    rep.global_p = 1.0;
    return rep;
  }

  std::vector<double> u(static_cast<size_t>(p), 0.0);
  for (size_t k = 0; k < g.size(); ++k)
    for (int j = 0; j < p; ++j)
      u[static_cast<size_t>(j)] += g[k] * res(static_cast<int>(k), j);

  std::vector<double> vu = matvec(fit.covariance, u);
  double quad = std::inner_product(u.begin(), u.end(), vu.begin(), 0.0);
  rep.global_chi2 = static_cast<double>(d) * quad / sum_xx;
  rep.global_p = chi2_sf(rep.global_chi2, static_cast<double>(p));
  for (int j = 0; j < p; ++j) {
    double vjj = fit.covariance(j, j);
    double chi = vjj > 0.0 ? static_cast<double>(d) * vu[static_cast<size_t>(j)] *
                                 vu[static_cast<size_t>(j)] / (vjj * sum_xx)
                           : 0.0;
    rep.covariates[static_cast<size_t>(j)].chi2 = chi;
    rep.covariates[static_cast<size_t>(j)].p = chi2_sf(chi, 1.0);
  }
  rep.rejected = rep.global_p < 0.05;
  return rep;
}

nlohmann::json pha_to_json(const PhaReport& report,
                           const std::vector<std::string>& covariate_names) {
  nlohmann::json j;
  j["transform"] = report.transform == TimeTransform::Km ? "km" : "identity";
  j["covariates"] = nlohmann::json::array();
  for (size_t i = 0; i < report.covariates.size(); ++i) {
    nlohmann::json row;
    row["name"] = i < covariate_names.size() ? covariate_names[i]
                                             : "x" + std::to_string(i);
    row["chi2"] = report.covariates[i].chi2;
    row["p_value"] = report.covariates[i].p;
    j["covariates"].push_back(row);
  }
  j["global"] = {{"chi2", report.global_chi2},
                 {"df", report.df},
                 {"global_p_value", report.global_p}};
  j["rejected"] = report.rejected;
  return j;
}

PhaReport pha_from_json(const nlohmann::json& j, std::vector<std::string>& names) {
  PhaReport report;
  report.transform = j.at("transform").get<std::string>() == "km"
                         ? TimeTransform::Km
                         : TimeTransform::Identity;
  names.clear();
  for (const auto& row : j.at("covariates")) {
    names.push_back(row.at("name").get<std::string>());
    report.covariates.push_back(
        {row.at("chi2").get<double>(), row.at("p_value").get<double>()});
  }
  const auto& g = j.at("global");
  report.global_chi2 = g.at("chi2").get<double>();
  report.df = g.at("df").get<int>();
  report.global_p = g.at("global_p_value").get<double>();
  report.rejected = j.at("rejected").get<bool>();
  return report;
}

}  // namespace exitsurv
