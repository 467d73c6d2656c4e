#pragma once

#include <cstdint>
#include <string>

namespace exitsurv {

// Calendar date backed by a serial day number (days since 1970-01-01,
// proleptic Gregorian). Arithmetic is plain integer day differences.
struct Date {
  std::int64_t days = 0;

  friend auto operator<=>(const Date&, const Date&) = default;
};

constexpr double kDaysPerYear = 365.25;

Date make_date(int year, int month, int day);
void civil_from_days(const Date& d, int& year, int& month, int& day);

// Parses strict ISO-8601 "YYYY-MM-DD". Throws std::invalid_argument on
// malformed input or out-of-range components.
Date parse_date(const std::string& s);
bool try_parse_date(const std::string& s, Date& out);

std::string format_date(const Date& d);

inline std::int64_t days_between(const Date& from, const Date& to) {
  return to.days - from.days;
}

inline double years_between(const Date& from, const Date& to) {
  return static_cast<double>(to.days - from.days) / kDaysPerYear;
}

inline Date add_days(const Date& d, std::int64_t n) { return Date{d.days + n}; }

}  // namespace exitsurv
