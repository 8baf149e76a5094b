#include "hindsight/kernels.hpp"

#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hindsight::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

constexpr std::size_t kTileRows = 4;
constexpr std::size_t kTileCols = 16;

// c[MR x NR] += a[MR x k] * b[k x NR], accumulated in a register tile so the
// sum over p is formed before it touches c.
template <std::size_t MR, std::size_t NR>
inline void tile(std::size_t k, const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
                 std::size_t ldc) {
  double acc[MR][NR] = {};
  for (std::size_t p = 0; p < k; ++p) {
    const double* __restrict brow = b + p * ldb;
    for (std::size_t r = 0; r < MR; ++r) {
      const double av = a[r * lda + p];
#pragma omp simd
      for (std::size_t j = 0; j < NR; ++j) acc[r][j] += av * brow[j];
    }
  }
  for (std::size_t r = 0; r < MR; ++r)
    for (std::size_t j = 0; j < NR; ++j) c[r * ldc + j] += acc[r][j];
}

template <std::size_t NR>
inline std::size_t column_tiles(std::size_t j, std::size_t i, std::size_t mr, std::size_t n, std::size_t k,
                                const double* a, const double* b, double* c) {
  for (; j + NR <= n; j += NR) {
    if (mr == kTileRows) {
      tile<kTileRows, NR>(k, a + i * k, k, b + j, n, c + i * n + j, n);
    } else {
      for (std::size_t r = 0; r < mr; ++r) tile<1, NR>(k, a + (i + r) * k, k, b + j, n, c + (i + r) * n + j, n);
    }
  }
  return j;
}

void row_block(std::size_t i, std::size_t mr, std::size_t n, std::size_t k, const double* a, const double* b,
               double* c) {
  std::size_t j = column_tiles<kTileCols>(0, i, mr, n, k, a, b, c);
  j = column_tiles<8>(j, i, mr, n, k, a, b, c);
  j = column_tiles<4>(j, i, mr, n, k, a, b, c);
  column_tiles<1>(j, i, mr, n, k, a, b, c);
}

std::vector<double> transpose(std::size_t rows, std::size_t cols, const double* x) {
  std::vector<double> t(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = x[r * cols + c];
  return t;
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  const bool parallel = m * n * k >= kParallelThreshold && m > kTileRows;
  const auto blocks = static_cast<std::ptrdiff_t>((m + kTileRows - 1) / kTileRows);
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const auto i = static_cast<std::size_t>(blk) * kTileRows;
    row_block(i, std::min(kTileRows, m - i), n, k, a, b, c);
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  const auto bt = transpose(n, k, b);
  gemm_nn(m, n, k, a, bt.data(), c);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  const auto at = transpose(k, m, a);
  gemm_nn(m, n, k, at.data(), b, c);
}

void add_row_bias(std::size_t rows, std::size_t cols, const double* bias, double* y) {
  const bool parallel = rows * cols >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
    double* __restrict yrow = y + r * cols;
#pragma omp simd
    for (std::size_t c = 0; c < cols; ++c) yrow[c] += bias[c];
  }
}

void column_sums(std::size_t rows, std::size_t cols, const double* x, double* out) {
  // Column-parallel so each output element keeps a serial row order.
  const bool parallel = rows * cols >= kParallelThreshold && cols > 1;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(cols); ++c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) acc += x[r * cols + c];
    out[c] += acc;
  }
}

namespace reference {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] += acc;
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * n + j] += acc;
    }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] += acc;
    }
}

void add_row_bias(std::size_t rows, std::size_t cols, const double* bias, double* y) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] += bias[c];
}

void column_sums(std::size_t rows, std::size_t cols, const double* x, double* out) {
  for (std::size_t c = 0; c < cols; ++c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) acc += x[r * cols + c];
    out[c] += acc;
  }
}

}  // namespace reference
}  // namespace hindsight::kernels
