#pragma once

#include <cstddef>
#include <vector>

namespace exitsurv {

// Small dense row-major matrix. Everything in this project is at most a
// few dozen rows/columns wide on the parameter side, so no attempt is
// made at blocking or factorization reuse.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

std::vector<double> matvec(const Matrix& m, const std::vector<double>& v);
double quad_form(const Matrix& m, const std::vector<double>& v);  // v' M v

// Cholesky-based inverse for symmetric positive definite matrices.
// Returns false when the factorization breaks down (not PD / singular).
bool invert_spd(const Matrix& m, Matrix& out);

// Solve A x = b for symmetric positive definite A.
bool solve_spd(const Matrix& a, const std::vector<double>& b,
               std::vector<double>& x);

// General inverse via Gauss-Jordan with partial pivoting.
bool invert(const Matrix& m, Matrix& out);

}  // namespace exitsurv
