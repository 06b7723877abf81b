#pragma once

// Raw column-major kernels. The `parallel` namespace holds the OpenMP
// versions used by the library; `serial` holds straightforward reference
// loops kept for testing and benchmarking. Every output entry of a parallel
// kernel is produced by exactly one thread with a fixed summation order, so
// results do not depend on the thread count.

#include <cstddef>
#include <span>

namespace ispasp::kernels {

namespace parallel {

/// c (m x n) = a (m x k) * b (k x n); c is overwritten.
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
/// out (cols x rows) = transpose of in (rows x cols).
void transpose(std::size_t rows, std::size_t cols, const double* in, double* out);
/// out[i] = Σ_j m(i, j)
void column_sums(std::size_t rows, std::size_t cols, const double* m, double* out);
void relu(std::span<double> x);

}  // namespace parallel

namespace serial {

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
void transpose(std::size_t rows, std::size_t cols, const double* in, double* out);
void column_sums(std::size_t rows, std::size_t cols, const double* m, double* out);
void relu(std::span<double> x);

}  // namespace serial

/// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads() noexcept;
void set_threads(int n) noexcept;

}  // namespace ispasp::kernels
