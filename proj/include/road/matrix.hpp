#pragma once

#include <cstddef>
#include <vector>

#include "road/errors.hpp"

namespace road {

// Dense row-major matrix of doubles. Deliberately minimal: the training loops
// need predictable memory layout and a deterministic accumulation order more
// than they need expression templates.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), a(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  double* row(std::size_t i) { return a.data() + i * cols; }
  const double* row(std::size_t i) const { return a.data() + i * cols; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// C = A * B
inline Matrix matmul(const Matrix& A, const Matrix& B) {
  if (A.cols != B.rows) throw NumericError("matmul: inner dimensions differ");
  Matrix C(A.rows, B.cols);
  for (std::size_t i = 0; i < A.rows; ++i) {
    const double* ai = A.row(i);
    double* ci = C.row(i);
    for (std::size_t k = 0; k < A.cols; ++k) {
      const double aik = ai[k];
      const double* bk = B.row(k);
      for (std::size_t j = 0; j < B.cols; ++j) ci[j] += aik * bk[j];
    }
  }
  return C;
}

// C = A * B^T; B is (m x k), A is (n x k), C is (n x m)
inline Matrix matmul_nt(const Matrix& A, const Matrix& B) {
  if (A.cols != B.cols) throw NumericError("matmul_nt: inner dimensions differ");
  Matrix C(A.rows, B.rows);
  for (std::size_t i = 0; i < A.rows; ++i) {
    const double* ai = A.row(i);
    double* ci = C.row(i);
    for (std::size_t j = 0; j < B.rows; ++j) {
      const double* bj = B.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < A.cols; ++k) acc += ai[k] * bj[k];
      ci[j] = acc;
    }
  }
  return C;
}

// C = A^T * B; A is (n x r), B is (n x c), C is (r x c)
inline Matrix matmul_tn(const Matrix& A, const Matrix& B) {
  if (A.rows != B.rows) throw NumericError("matmul_tn: outer dimensions differ");
  Matrix C(A.cols, B.cols);
  for (std::size_t n = 0; n < A.rows; ++n) {
    const double* an = A.row(n);
    const double* bn = B.row(n);
    for (std::size_t i = 0; i < A.cols; ++i) {
      const double ani = an[i];
      double* ci = C.row(i);
      for (std::size_t j = 0; j < B.cols; ++j) ci[j] += ani * bn[j];
    }
  }
  return C;
}

}  // namespace road
