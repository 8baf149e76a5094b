#pragma once

#include <cstddef>

// Dense row-major matrix kernels. The functions in `hindsight::kernels` are
// OpenMP-parallel over output rows; `hindsight::kernels::reference` holds the
// plain serial loops they are tested and benchmarked against.
//
// All kernels accumulate into C (C += ...). Each output row is produced by a
// single thread with a fixed summation order, so results do not depend on
// the thread count.

namespace hindsight::kernels {

// C[m,n] += A[m,k] * B[k,n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
// C[m,n] += A[m,k] * B[n,k]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
// C[m,n] += A[k,m]^T * B[k,n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);

// y[r,c] += bias[c] over all rows
void add_row_bias(std::size_t rows, std::size_t cols, const double* bias, double* y);
// out[c] += sum_r x[r,c]
void column_sums(std::size_t rows, std::size_t cols, const double* x, double* out);

// Work (m*n*k) below which the parallel kernels stay on the calling thread.
inline constexpr std::size_t kParallelThreshold = 1u << 15;

int max_threads();

namespace reference {
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
void add_row_bias(std::size_t rows, std::size_t cols, const double* bias, double* y);
void column_sums(std::size_t rows, std::size_t cols, const double* x, double* out);
}  // namespace reference

}  // namespace hindsight::kernels
