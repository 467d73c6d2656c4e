#include "exitsurv/kaplan_meier.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "exitsurv/special.hpp"

namespace exitsurv {

namespace {

// Index of the largest event time <= t, or -1 if t precedes them all.
long step_index(const std::vector<double>& times, double t) {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  return static_cast<long>(it - times.begin()) - 1;
}

}  // namespace

double KmCurve::eval(double t) const {
  long i = step_index(event_times, t);
  return i < 0 ? 1.0 : estimates[static_cast<size_t>(i)];
}

double KmCurve::band_lower(double t) const {
  long i = step_index(event_times, t);
  return i < 0 ? 1.0 : lower[static_cast<size_t>(i)];
}

double KmCurve::band_upper(double t) const {
  long i = step_index(event_times, t);
  return i < 0 ? 1.0 : upper[static_cast<size_t>(i)];
}

KmCurve km_fit(const std::vector<SurvivalRecord>& records) {
  if (records.empty()) throw std::invalid_argument("km_fit: empty input");
  for (const auto& r : records)
    if (!(r.duration > 0.0))
      throw std::invalid_argument("km_fit: durations must be positive");

  std::vector<SurvivalRecord> sorted = records;
  // Events before censorings at equal times, so a censored subject at t is
  // still at risk for the deaths at t.
  std::sort(sorted.begin(), sorted.end(),
            [](const SurvivalRecord& a, const SurvivalRecord& b) {
              if (a.duration != b.duration) return a.duration < b.duration;
              return a.event && !b.event;
            });

  KmCurve curve;
  double s = 1.0;
  long n_risk = static_cast<long>(sorted.size());
  size_t i = 0;
  while (i < sorted.size()) {
    double t = sorted[i].duration;
    long deaths = 0, censored = 0;
    while (i < sorted.size() && sorted[i].duration == t) {
      if (sorted[i].event) ++deaths;
      else ++censored;
      ++i;
    }
    if (deaths > 0) {
      s *= 1.0 - static_cast<double>(deaths) / static_cast<double>(n_risk);
      curve.event_times.push_back(t);
      curve.estimates.push_back(s);
      curve.at_risk.push_back(n_risk);
      curve.deaths.push_back(deaths);
    }
    n_risk -= deaths + censored;
  }
  return curve;
}

KmCurve km_confidence(KmCurve curve, double level) {
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("km_confidence: level must lie in (0, 1)");
  double z = norm_quantile(0.5 + level / 2.0);

  size_t k = curve.event_times.size();
  curve.lower.assign(k, 0.0);
  curve.upper.assign(k, 0.0);
  double greenwood_sum = 0.0;  // sum of d/(n(n-d)) up to t_k
  for (size_t i = 0; i < k; ++i) {
    double n = static_cast<double>(curve.at_risk[i]);
    double d = static_cast<double>(curve.deaths[i]);
    if (n > d) greenwood_sum += d / (n * (n - d));
    double s = curve.estimates[i];
    if (s <= 0.0 || s >= 1.0) {
      curve.lower[i] = s;  // cloglog undefined; zero-variance limit
      curve.upper[i] = s;
      continue;
    }
    // se of log(-log S) by the delta method on the Greenwood variance.
    double log_s = std::log(s);
    double se = std::sqrt(greenwood_sum) / std::fabs(log_s);
    double theta = std::log(-log_s);
    curve.lower[i] = std::exp(-std::exp(theta + z * se));
    curve.upper[i] = std::exp(-std::exp(theta - z * se));
    curve.lower[i] = std::min(std::max(curve.lower[i], 0.0), 1.0);
    curve.upper[i] = std::min(std::max(curve.upper[i], 0.0), 1.0);
  }
  return curve;
}

void write_km_csv(const KmCurve& curve, std::ostream& out) {
  out << "t,s,lower,upper,n_risk,n_event\n";
  out.precision(17);
  for (size_t i = 0; i < curve.event_times.size(); ++i) {
    double lo = i < curve.lower.size() ? curve.lower[i] : curve.estimates[i];
    double hi = i < curve.upper.size() ? curve.upper[i] : curve.estimates[i];
    out << curve.event_times[i] << ',' << curve.estimates[i] << ',' << lo << ','
        << hi << ',' << curve.at_risk[i] << ',' << curve.deaths[i] << '\n';
  }
}

}  // namespace exitsurv
