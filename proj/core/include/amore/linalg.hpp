#pragma once

#include <span>
#include <vector>

namespace amore {

// Row-major dense matrix of doubles. Deliberately minimal: the library only
// needs small dense solves (dozens of columns) for the two-stage baseline and
// for test oracles.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
  std::span<double> row(int r) { return {a.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
  std::span<const double> row(int r) const {
    return {a.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
};

// Least squares min ||A X - B||_F via Householder QR with column pivoting
// disabled (A is expected well conditioned after masking). Returns false when
// A is rank deficient relative to rcond; X is untouched in that case.
bool lstsq(const Mat& A, const Mat& B, Mat& X, double rcond = 1e-10);

}  // namespace amore
