#include "amore/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace amore {

bool lstsq(const Mat& A, const Mat& B, Mat& X, double rcond) {
  const int m = A.rows, n = A.cols, k = B.cols;
  if (B.rows != m) throw std::invalid_argument("lstsq: row mismatch");
  if (m < n) return false;

  Mat R = A;
  Mat Q = B;  // transformed right-hand sides

  // Householder triangularization applied to [A | B].
  std::vector<double> v(m);
  for (int j = 0; j < n; ++j) {
    double norm = 0.0;
    for (int i = j; i < m; ++i) norm += R(i, j) * R(i, j);
    norm = std::sqrt(norm);
    if (norm == 0.0) return false;
    const double alpha = R(j, j) >= 0 ? -norm : norm;
    double vnorm2 = 0.0;
    for (int i = j; i < m; ++i) {
      v[i] = R(i, j) - (i == j ? alpha : 0.0);
      vnorm2 += v[i] * v[i];
    }
    if (vnorm2 == 0.0) return false;
    for (int c = j; c < n; ++c) {
      double dot = 0.0;
      for (int i = j; i < m; ++i) dot += v[i] * R(i, c);
      const double f = 2.0 * dot / vnorm2;
      for (int i = j; i < m; ++i) R(i, c) -= f * v[i];
    }
    for (int c = 0; c < k; ++c) {
      double dot = 0.0;
      for (int i = j; i < m; ++i) dot += v[i] * Q(i, c);
      const double f = 2.0 * dot / vnorm2;
      for (int i = j; i < m; ++i) Q(i, c) -= f * v[i];
    }
  }

  double dmax = 0.0, dmin = std::abs(R(0, 0));
  for (int j = 0; j < n; ++j) {
    const double d = std::abs(R(j, j));
    dmax = std::max(dmax, d);
    dmin = std::min(dmin, d);
  }
  if (dmax == 0.0 || dmin < rcond * dmax) return false;

  X = Mat(n, k);
  for (int c = 0; c < k; ++c) {
    for (int i = n - 1; i >= 0; --i) {
      double s = Q(i, c);
      for (int j = i + 1; j < n; ++j) s -= R(i, j) * X(j, c);
      X(i, c) = s / R(i, i);
    }
  }
  return true;
}

}  // namespace amore
