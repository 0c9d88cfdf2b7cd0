// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#include "groklab/kernels.hpp"

#include <algorithm>

namespace groklab::kernels {
namespace {

// Work below this many multiply-adds stays on one thread; partitioning is
// over output rows, so the threshold only affects speed, never values.
constexpr std::int64_t kParallelMacs = 1 << 16;

// Register tile. For each output element C[i][j] the k loop below runs
// strictly ascending, matching a naive row-major triple loop; the tiling
// only reorders independent output elements.
constexpr int kMr = 4;
constexpr int kNb = 32;

template <bool Accumulate>
void micro_tile(const double* __restrict a, const double* __restrict b,
                double* __restrict c, std::int64_t i0, std::int64_t j0,
                std::int64_t k, std::int64_t n) {
  double acc[kMr][kNb];
  for (int r = 0; r < kMr; ++r) {
    double* crow = c + (i0 + r) * n + j0;
    for (int j = 0; j < kNb; ++j) acc[r][j] = Accumulate ? crow[j] : 0.0;
  }
  for (std::int64_t kk = 0; kk < k; ++kk) {
    const double* __restrict brow = b + kk * n + j0;
    for (int r = 0; r < kMr; ++r) {
      const double av = a[(i0 + r) * k + kk];
#pragma omp simd
      for (int j = 0; j < kNb; ++j) acc[r][j] += av * brow[j];
    }
  }
  for (int r = 0; r < kMr; ++r) {
    double* crow = c + (i0 + r) * n + j0;
    for (int j = 0; j < kNb; ++j) crow[j] = acc[r][j];
  }
}

template <bool Accumulate>
void edge_tile(const double* a, const double* b, double* c, std::int64_t i0,
               std::int64_t ib, std::int64_t j0, std::int64_t jb,
               std::int64_t k, std::int64_t n) {
  for (std::int64_t r = 0; r < ib; ++r) {
    double* crow = c + (i0 + r) * n + j0;
    if (!Accumulate) {
      for (std::int64_t j = 0; j < jb; ++j) crow[j] = 0.0;
    }
    const double* arow = a + (i0 + r) * k;
    for (std::int64_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const double* brow = b + kk * n + j0;
#pragma omp simd
      for (std::int64_t j = 0; j < jb; ++j) crow[j] += av * brow[j];
    }
  }
}

template <bool Accumulate>
void matmul_impl(const double* a, const double* b, double* c, std::int64_t m,
                 std::int64_t k, std::int64_t n) {
  const std::int64_t row_blocks = (m + kMr - 1) / kMr;
  const bool parallel = m * k * n >= kParallelMacs;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::int64_t blk = 0; blk < row_blocks; ++blk) {
    const std::int64_t i0 = blk * kMr;
    const std::int64_t ib = std::min<std::int64_t>(kMr, m - i0);
    std::int64_t j0 = 0;
    if (ib == kMr) {
      for (; j0 + kNb <= n; j0 += kNb) micro_tile<Accumulate>(a, b, c, i0, j0, k, n);
    }
    if (j0 < n || ib < kMr) {
      edge_tile<Accumulate>(a, b, c, i0, ib, j0, n - j0, k, n);
    }
  }
}

}  // namespace

void matmul(const double* a, const double* b, double* c, std::int64_t m,
            std::int64_t k, std::int64_t n, bool accumulate) {
  if (accumulate) {
    matmul_impl<true>(a, b, c, m, k, n);
  } else {
    matmul_impl<false>(a, b, c, m, k, n);
  }
}

void transpose(const double* src, double* dst, std::int64_t rows,
               std::int64_t cols) {
  constexpr std::int64_t kBlock = 32;
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelMacs)
  for (std::int64_t i0 = 0; i0 < rows; i0 += kBlock) {
    const std::int64_t ie = std::min(i0 + kBlock, rows);
    for (std::int64_t j0 = 0; j0 < cols; j0 += kBlock) {
      const std::int64_t je = std::min(j0 + kBlock, cols);
      for (std::int64_t i = i0; i < ie; ++i) {
        for (std::int64_t j = j0; j < je; ++j) dst[j * rows + i] = src[i * cols + j];
      }
    }
  }
}

void axpy(double alpha, const double* x, double* y, std::int64_t n) {
#pragma omp simd
  for (std::int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace groklab::kernels
