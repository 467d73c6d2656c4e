#pragma once

#include <iosfwd>
#include <vector>

#include "exitsurv/data.hpp"

namespace exitsurv {

// Product-limit estimate over the distinct event times. The step function is
// right-continuous: S(t) holds the value at the largest event time <= t, and
// is 1 before the first event.
struct KmCurve {
  std::vector<double> event_times;  // strictly increasing
  std::vector<double> estimates;    // S(t_k), non-increasing
  std::vector<long> at_risk;        // n_k just before t_k
  std::vector<long> deaths;         // d_k at t_k
  std::vector<double> lower;        // filled by km_confidence
  std::vector<double> upper;

  double eval(double t) const;          // S(t)
  double band_lower(double t) const;    // 1 before the first event time
  double band_upper(double t) const;
};

// Ties between events and censorings at the same time: events drop first.
KmCurve km_fit(const std::vector<SurvivalRecord>& records);

// Greenwood variance with complementary log-log 95% bands; degenerate where
// S is 0 or 1 (the transform is undefined there, and the variance limit is 0).
KmCurve km_confidence(KmCurve curve, double level = 0.95);

// Columns: t,s,lower,upper,n_risk,n_event — one row per event time.
void write_km_csv(const KmCurve& curve, std::ostream& out);

}  // namespace exitsurv
