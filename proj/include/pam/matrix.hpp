#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pam/common.hpp"

namespace pam {

// Dense row-major matrix, 64-bit values. On-disk formats store 32-bit floats;
// the conversion happens at the serialization boundary only.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}

  double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

  double* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
  const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }

  std::size_t size() const { return data.size(); }

  void zero() { std::fill(data.begin(), data.end(), 0.0); }

  bool same_shape(const Matrix& other) const { return rows == other.rows && cols == other.cols; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i) {
    const double* src = a.row(i);
    for (int j = 0; j < a.cols; ++j) t(j, i) = src[j];
  }
  return t;
}

namespace detail {

// Register-blocked 4x16 panel kernel: accumulates C[i0..i0+4) x [j0..j0+16)
// over the full k range with ascending k. Separate accumulator arrays keep
// the compiler emitting wide FMA without spilling.
template <int NR>
inline void matmul_panel4(const double* __restrict a, const double* __restrict b, double* __restrict c, int i0,
                          int j0, int k, int lda, int ldb, int ldc) {
  double acc0[NR] = {}, acc1[NR] = {}, acc2[NR] = {}, acc3[NR] = {};
  const double* a0 = a + static_cast<std::size_t>(i0 + 0) * lda;
  const double* a1 = a + static_cast<std::size_t>(i0 + 1) * lda;
  const double* a2 = a + static_cast<std::size_t>(i0 + 2) * lda;
  const double* a3 = a + static_cast<std::size_t>(i0 + 3) * lda;
  for (int p = 0; p < k; ++p) {
    const double* __restrict brow = b + static_cast<std::size_t>(p) * ldb + j0;
    const double v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
    for (int s = 0; s < NR; ++s) {
      const double bv = brow[s];
      acc0[s] += v0 * bv;
      acc1[s] += v1 * bv;
      acc2[s] += v2 * bv;
      acc3[s] += v3 * bv;
    }
  }
  double* c0 = c + static_cast<std::size_t>(i0 + 0) * ldc + j0;
  double* c1 = c + static_cast<std::size_t>(i0 + 1) * ldc + j0;
  double* c2 = c + static_cast<std::size_t>(i0 + 2) * ldc + j0;
  double* c3 = c + static_cast<std::size_t>(i0 + 3) * ldc + j0;
  for (int s = 0; s < NR; ++s) {
    c0[s] = acc0[s];
    c1[s] = acc1[s];
    c2[s] = acc2[s];
    c3[s] = acc3[s];
  }
}

// Fallback for edge tiles; same ascending-k reduction order.
inline void matmul_edge(const double* __restrict a, const double* __restrict b, double* __restrict c, int i0,
                        int i1, int j0, int j1, int k, int lda, int ldb, int ldc) {
  for (int i = i0; i < i1; ++i) {
    double* __restrict crow = c + static_cast<std::size_t>(i) * ldc;
    for (int j = j0; j < j1; ++j) crow[j] = 0.0;
    const double* __restrict arow = a + static_cast<std::size_t>(i) * lda;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* __restrict brow = b + static_cast<std::size_t>(p) * ldb;
      for (int j = j0; j < j1; ++j) crow[j] += av * brow[j];
    }
  }
}

inline void matmul_rows(const Matrix& a, const Matrix& b, Matrix& c, int row_begin, int row_end) {
  constexpr int MR = 4;
  constexpr int NR = 16;
  const int n = b.cols;
  const int k = a.cols;
  const int n_main = n - n % NR;
  int i = row_begin;
  for (; i + MR <= row_end; i += MR) {
    for (int j = 0; j < n_main; j += NR)
      matmul_panel4<NR>(a.data.data(), b.data.data(), c.data.data(), i, j, k, a.cols, b.cols, c.cols);
    if (n_main < n) matmul_edge(a.data.data(), b.data.data(), c.data.data(), i, i + MR, n_main, n, k, a.cols, b.cols, c.cols);
  }
  if (i < row_end) matmul_edge(a.data.data(), b.data.data(), c.data.data(), i, row_end, 0, n, k, a.cols, b.cols, c.cols);
}

}  // namespace detail

// C = A * B. Work is partitioned by output row and every dot product reduces
// in ascending-k order, so results are bit-identical for any thread count.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw NumericError("matmul shape mismatch: " + std::to_string(a.rows) + "x" + std::to_string(a.cols) + " * " +
                       std::to_string(b.rows) + "x" + std::to_string(b.cols));
  Matrix c(a.rows, b.cols);
  parallel_for(a.rows, [&](std::int64_t begin, std::int64_t end) {
    detail::matmul_rows(a, b, c, static_cast<int>(begin), static_cast<int>(end));
  });
  return c;
}

// y += x, elementwise
inline void add_inplace(Matrix& y, const Matrix& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += x.data[i];
}

// adds the same row vector to every row
inline void add_row_broadcast(Matrix& m, const std::vector<double>& bias) {
  for (int i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    for (int j = 0; j < m.cols; ++j) r[j] += bias[static_cast<std::size_t>(j)];
  }
}

inline std::vector<double> column_sums(const Matrix& m) {
  std::vector<double> sums(static_cast<std::size_t>(m.cols), 0.0);
  for (int i = 0; i < m.rows; ++i) {
    const double* r = m.row(i);
    for (int j = 0; j < m.cols; ++j) sums[static_cast<std::size_t>(j)] += r[j];
  }
  return sums;
}

inline double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(const double* a, int n) { return std::sqrt(dot(a, a, n)); }

}  // namespace pam
