#include "exitsurv/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "exitsurv/linalg.hpp"

namespace exitsurv {

namespace {

double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

BfgsResult minimize_bfgs(
    const std::function<double(const std::vector<double>&)>& f,
    const std::function<std::vector<double>(const std::vector<double>&)>& grad,
    std::vector<double> x0, const BfgsOptions& opt) {
  const int n = static_cast<int>(x0.size());
  const double inf = std::numeric_limits<double>::infinity();

  BfgsResult res;
  res.x = std::move(x0);
  res.f = f(res.x);
  if (!std::isfinite(res.f)) res.f = inf;
  res.grad = grad(res.x);

  Matrix h = Matrix::identity(n);  // inverse Hessian approximation
  bool first_update = true;

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    res.iterations = iter;
    if (inf_norm(res.grad) < opt.grad_tol) {
      res.converged = true;
      return res;
    }

    std::vector<double> dir = matvec(h, res.grad);
    for (double& d : dir) d = -d;
    double slope = dot(res.grad, dir);
    if (!(slope < 0.0)) {
      // Not a descent direction; reset to steepest descent.
      h = Matrix::identity(n);
      first_update = true;
      for (int i = 0; i < n; ++i) dir[i] = -res.grad[i];
      slope = dot(res.grad, dir);
    }

    // Backtracking Armijo search.
    const double c1 = 1e-4;
    double alpha = 1.0;
    double f_new = inf;
    std::vector<double> x_new(n);
    bool accepted = false;
    for (int half = 0; half < 60; ++half) {
      for (int i = 0; i < n; ++i) x_new[i] = res.x[i] + alpha * dir[i];
      f_new = f(x_new);
      if (std::isfinite(f_new) && f_new <= res.f + c1 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      res.step_converged = true;
      return res;
    }

    std::vector<double> g_new = grad(x_new);
    std::vector<double> s(n), y(n);
    for (int i = 0; i < n; ++i) {
      s[i] = x_new[i] - res.x[i];
      y[i] = g_new[i] - res.grad[i];
    }

    double step_size = inf_norm(s);
    res.x = std::move(x_new);
    res.f = f_new;
    res.grad = std::move(g_new);

    if (step_size < opt.step_tol * (1.0 + inf_norm(res.x))) {
      res.step_converged = true;
      res.iterations = iter + 1;
      if (inf_norm(res.grad) < opt.grad_tol) res.converged = true;
      return res;
    }

    double sy = dot(s, y);
    if (sy > 1e-12 * std::sqrt(dot(s, s)) * std::sqrt(dot(y, y))) {
      if (first_update) {
        // Scale the initial inverse Hessian (Nocedal & Wright eq. 6.20).
        double yy = dot(y, y);
        if (yy > 0.0) {
          double scale = sy / yy;
          for (int i = 0; i < n; ++i) h(i, i) = scale;
        }
        first_update = false;
      }
      // H <- (I - rho s y') H (I - rho y s') + rho s s'
      double rho = 1.0 / sy;
      std::vector<double> hy = matvec(h, y);
      double yhy = dot(y, hy);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          h(i, j) += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] -
                            s[i] * hy[j]);
    }
  }
  res.iterations = opt.max_iter;
  return res;
}

}  // namespace exitsurv
