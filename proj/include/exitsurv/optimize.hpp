#pragma once

#include <functional>
#include <vector>

namespace exitsurv {

struct BfgsOptions {
  double grad_tol = 1e-9;   // infinity norm of the gradient
  double step_tol = 1e-12;  // infinity norm of the step, relative to |x|
  int max_iter = 500;
};

struct BfgsResult {
  std::vector<double> x;
  double f = 0.0;
  std::vector<double> grad;
  int iterations = 0;
  bool converged = false;      // gradient tolerance met
  bool step_converged = false; // stalled on step size instead
};

// BFGS minimization with backtracking Armijo line search. Non-finite
// objective values are treated as rejected steps. The caller gets the
// last iterate back even without convergence.
BfgsResult minimize_bfgs(
    const std::function<double(const std::vector<double>&)>& f,
    const std::function<std::vector<double>(const std::vector<double>&)>& grad,
    std::vector<double> x0, const BfgsOptions& opt = {});

}  // namespace exitsurv
