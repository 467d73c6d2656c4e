#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

// Shared numeric oracles for the test suite: quadrature and finite
// differences, independent of the library's own derivative code.
namespace testsup {

inline double simpson_rule(const std::function<double(double)>& f, double a,
                           double b) {
  return (b - a) / 6.0 * (f(a) + 4.0 * f((a + b) / 2.0) + f(b));
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double eps, int depth) {
  const double whole = simpson_rule(f, a, b);
  const double m = (a + b) / 2.0;
  const double left = simpson_rule(f, a, m), right = simpson_rule(f, m, b);
  if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * eps)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, m, eps / 2.0, depth - 1) +
         adaptive_simpson(f, m, b, eps / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double eps = 1e-12) {
  return adaptive_simpson(f, a, b, eps, 40);
}

// Five-point central difference, O(h^4) truncation error.
inline double fd_derivative(const std::function<double(double)>& f, double x,
                            double h = 1e-4) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) /
         (12.0 * h);
}

inline std::vector<double> fd_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double hi = h * std::max(1.0, std::fabs(xi));
    auto fi = [&](double v) {
      x[i] = v;
      const double out = f(x);
      x[i] = xi;
      return out;
    };
    g[i] = (-fi(xi + 2 * hi) + 8 * fi(xi + hi) - 8 * fi(xi - hi) +
            fi(xi - 2 * hi)) /
           (12.0 * hi);
  }
  return g;
}

inline double rel_err(double got, double want) {
  return std::fabs(got - want) / std::max(1.0, std::fabs(want));
}

}  // namespace testsup
