// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace groklab::kernels {

// Dense double-precision primitives shared by the tape ops. Every kernel is
// bit-deterministic: for each output element the contraction index is
// consumed in strictly ascending order, so results do not depend on thread
// count or register tiling. Threads partition disjoint output regions only.

/// C = A * B (or C += A * B when `accumulate`); A is m x k, B is k x n,
/// C is m x n, all row-major.
void matmul(const double* a, const double* b, double* c, std::int64_t m,
            std::int64_t k, std::int64_t n, bool accumulate);

/// dst (cols x rows) = transpose of src (rows x cols).
void transpose(const double* src, double* dst, std::int64_t rows,
               std::int64_t cols);

/// y += alpha * x over n elements.
void axpy(double alpha, const double* x, double* y, std::int64_t n);

}  // namespace groklab::kernels
