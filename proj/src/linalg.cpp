#include "exitsurv/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace exitsurv {

std::vector<double> matvec(const Matrix& m, const std::vector<double>& v) {
  std::vector<double> out(m.rows, 0.0);
  for (int i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < m.cols; ++j) s += m(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

double quad_form(const Matrix& m, const std::vector<double>& v) {
  double s = 0.0;
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) s += v[i] * m(i, j) * v[j];
  return s;
}

namespace {

// In-place lower Cholesky factor; false if a pivot is not positive.
bool cholesky(Matrix& m) {
  int n = m.rows;
  for (int j = 0; j < n; ++j) {
    double d = m(j, j);
    for (int k = 0; k < j; ++k) d -= m(j, k) * m(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    d = std::sqrt(d);
    m(j, j) = d;
    for (int i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (int k = 0; k < j; ++k) s -= m(i, k) * m(j, k);
      m(i, j) = s / d;
    }
  }
  return true;
}

void chol_solve(const Matrix& l, std::vector<double>& x) {
  int n = l.rows;
  for (int i = 0; i < n; ++i) {
    double s = x[i];
    for (int k = 0; k < i; ++k) s -= l(i, k) * x[k];
    x[i] = s / l(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = x[i];
    for (int k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
    x[i] = s / l(i, i);
  }
}

}  // namespace

bool invert_spd(const Matrix& m, Matrix& out) {
  if (m.rows != m.cols) return false;
  Matrix l = m;
  if (!cholesky(l)) return false;
  int n = m.rows;
  out = Matrix(n, n);
  std::vector<double> e(n, 0.0);
  for (int j = 0; j < n; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    chol_solve(l, e);
    for (int i = 0; i < n; ++i) out(i, j) = e[i];
  }
  // Symmetrize away rounding drift.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double v = 0.5 * (out(i, j) + out(j, i));
      out(i, j) = out(j, i) = v;
    }
  return true;
}

bool solve_spd(const Matrix& a, const std::vector<double>& b,
               std::vector<double>& x) {
  if (a.rows != a.cols || static_cast<int>(b.size()) != a.rows) return false;
  Matrix l = a;
  if (!cholesky(l)) return false;
  x = b;
  chol_solve(l, x);
  return true;
}

bool invert(const Matrix& m, Matrix& out) {
  if (m.rows != m.cols) return false;
  int n = m.rows;
  Matrix w = m;
  out = Matrix::identity(n);
  for (int col = 0; col < n; ++col) {
    int piv = col;
    double best = std::fabs(w(col, col));
    for (int i = col + 1; i < n; ++i)
      if (std::fabs(w(i, col)) > best) {
        best = std::fabs(w(i, col));
        piv = i;
      }
    if (!(best > 0.0) || !std::isfinite(best)) return false;
    if (piv != col)
      for (int j = 0; j < n; ++j) {
        std::swap(w(piv, j), w(col, j));
        std::swap(out(piv, j), out(col, j));
      }
    double d = w(col, col);
    for (int j = 0; j < n; ++j) {
      w(col, j) /= d;
      out(col, j) /= d;
    }
    for (int i = 0; i < n; ++i) {
      if (i == col) continue;
      double f = w(i, col);
      if (f == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        w(i, j) -= f * w(col, j);
        out(i, j) -= f * out(col, j);
      }
    }
  }
  return true;
}

}  // namespace exitsurv
