#pragma once

// Dense row-major matrices and the single-threaded GEMM kernels that carry
// nearly all of the arithmetic in this library. The float path dispatches at
// runtime to AVX-512 or AVX2 microkernels with a portable fallback; summation
// order is fixed per path, so results are reproducible run to run.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define LOGSIEVE_X86 1
#endif

namespace logsieve {

template <class S>
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<S> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, S(0)) {}

  S* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
  const S* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }
  S& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  S at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }
  size_t size() const { return data.size(); }

  void set_zero() { std::fill(data.begin(), data.end(), S(0)); }

  void resize(int r, int c) {
    rows = r;
    cols = c;
    data.assign(static_cast<size_t>(r) * c, S(0));
  }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

template <class S>
Matrix<S> transposed(const Matrix<S>& a) {
  Matrix<S> t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i) {
    const S* src = a.row(i);
    for (int j = 0; j < a.cols; ++j) t.at(j, i) = src[j];
  }
  return t;
}

namespace detail {

// Portable saxpy-form GEMM: per output row the k-loop runs in index order,
// which keeps results deterministic and lets the compiler vectorize over j.
template <class S>
void gemm_generic(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    S* ci = c + static_cast<size_t>(i) * n;
    if (!accumulate) std::fill(ci, ci + n, S(0));
    const S* ai = a + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const S aip = ai[p];
      const S* bp = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

#ifdef LOGSIEVE_X86

#pragma GCC push_options
#pragma GCC target("avx512f")

// 12x32 register tile: 24 zmm accumulators against 2 packed B columns. The
// packed B panel for a 32-wide tile is k*32 floats, which stays in L1 for the
// layer sizes this library runs.
template <int MR, int NV>
inline void kernel512(const float* a, size_t lda, const float* bp, float* c,
                      size_t ldc, int k, bool accumulate) {
  static_assert(MR >= 1 && NV >= 1 && MR * NV <= 24);
  // unroll pragmas keep the accumulator tile in registers
  __m512 acc[MR][NV];
#pragma GCC unroll 12
  for (int r = 0; r < MR; ++r)
#pragma GCC unroll 2
    for (int q = 0; q < NV; ++q)
      acc[r][q] = accumulate ? _mm512_loadu_ps(c + r * ldc + q * 16) : _mm512_setzero_ps();
  for (int p = 0; p < k; ++p) {
    const float* brow = bp + static_cast<size_t>(p) * (NV * 16);
    __m512 b[NV];
#pragma GCC unroll 2
    for (int q = 0; q < NV; ++q) b[q] = _mm512_loadu_ps(brow + q * 16);
#pragma GCC unroll 12
    for (int r = 0; r < MR; ++r) {
      __m512 av = _mm512_set1_ps(a[r * lda + p]);
#pragma GCC unroll 2
      for (int q = 0; q < NV; ++q) acc[r][q] = _mm512_fmadd_ps(av, b[q], acc[r][q]);
    }
  }
#pragma GCC unroll 12
  for (int r = 0; r < MR; ++r)
#pragma GCC unroll 2
    for (int q = 0; q < NV; ++q) _mm512_storeu_ps(c + r * ldc + q * 16, acc[r][q]);
}

template <int NV>
inline void tile512(const float* a, const float* bpanel, float* c, int m, int k,
                    size_t ldc, bool accumulate) {
  int i = 0;
  for (; i + 12 <= m; i += 12)
    kernel512<12, NV>(a + static_cast<size_t>(i) * k, k, bpanel,
                      c + static_cast<size_t>(i) * ldc, ldc, k, accumulate);
  for (; i + 4 <= m; i += 4)
    kernel512<4, NV>(a + static_cast<size_t>(i) * k, k, bpanel,
                     c + static_cast<size_t>(i) * ldc, ldc, k, accumulate);
  for (; i < m; ++i)
    kernel512<1, NV>(a + static_cast<size_t>(i) * k, k, bpanel,
                     c + static_cast<size_t>(i) * ldc, ldc, k, accumulate);
}

inline void gemm_avx512(const float* a, const float* b, float* c, int m, int k, int n,
                        bool accumulate, std::vector<float>& pack) {
  int j = 0;
  for (int width = 32; width >= 16; width -= 16) {
    for (; j + width <= n; j += width) {
      pack.resize(static_cast<size_t>(k) * width);
      for (int p = 0; p < k; ++p)
        std::memcpy(pack.data() + static_cast<size_t>(p) * width,
                    b + static_cast<size_t>(p) * n + j,
                    static_cast<size_t>(width) * sizeof(float));
      if (width == 32)
        tile512<2>(a, pack.data(), c + j, m, k, n, accumulate);
      else
        tile512<1>(a, pack.data(), c + j, m, k, n, accumulate);
    }
  }
  if (j < n) {
    // narrow column remainder, plain loops
    for (int i = 0; i < m; ++i) {
      float* ci = c + static_cast<size_t>(i) * n;
      if (!accumulate)
        for (int q = j; q < n; ++q) ci[q] = 0.0f;
      const float* ai = a + static_cast<size_t>(i) * k;
      for (int p = 0; p < k; ++p) {
        const float aip = ai[p];
        const float* bp = b + static_cast<size_t>(p) * n;
        for (int q = j; q < n; ++q) ci[q] += aip * bp[q];
      }
    }
  }
}

#pragma GCC pop_options

#pragma GCC push_options
#pragma GCC target("avx2,fma")

inline void kernel256_4x16(const float* a, size_t lda, const float* bp, float* c,
                           size_t ldc, int k, bool accumulate) {
  __m256 acc[4][2];
#pragma GCC unroll 4
  for (int r = 0; r < 4; ++r)
#pragma GCC unroll 2
    for (int q = 0; q < 2; ++q)
      acc[r][q] = accumulate ? _mm256_loadu_ps(c + r * ldc + q * 8) : _mm256_setzero_ps();
  for (int p = 0; p < k; ++p) {
    const float* brow = bp + static_cast<size_t>(p) * 16;
    __m256 b0 = _mm256_loadu_ps(brow);
    __m256 b1 = _mm256_loadu_ps(brow + 8);
#pragma GCC unroll 4
    for (int r = 0; r < 4; ++r) {
      __m256 av = _mm256_set1_ps(a[r * lda + p]);
      acc[r][0] = _mm256_fmadd_ps(av, b0, acc[r][0]);
      acc[r][1] = _mm256_fmadd_ps(av, b1, acc[r][1]);
    }
  }
#pragma GCC unroll 4
  for (int r = 0; r < 4; ++r)
#pragma GCC unroll 2
    for (int q = 0; q < 2; ++q) _mm256_storeu_ps(c + r * ldc + q * 8, acc[r][q]);
}

inline void kernel256_1x16(const float* a, const float* bp, float* c, int k,
                           bool accumulate) {
  __m256 acc0 = accumulate ? _mm256_loadu_ps(c) : _mm256_setzero_ps();
  __m256 acc1 = accumulate ? _mm256_loadu_ps(c + 8) : _mm256_setzero_ps();
  for (int p = 0; p < k; ++p) {
    const float* brow = bp + static_cast<size_t>(p) * 16;
    __m256 av = _mm256_set1_ps(a[p]);
    acc0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow), acc0);
    acc1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + 8), acc1);
  }
  _mm256_storeu_ps(c, acc0);
  _mm256_storeu_ps(c + 8, acc1);
}

inline void gemm_avx2(const float* a, const float* b, float* c, int m, int k, int n,
                      bool accumulate, std::vector<float>& pack) {
  int j = 0;
  for (; j + 16 <= n; j += 16) {
    pack.resize(static_cast<size_t>(k) * 16);
    for (int p = 0; p < k; ++p)
      std::memcpy(pack.data() + static_cast<size_t>(p) * 16,
                  b + static_cast<size_t>(p) * n + j, 16 * sizeof(float));
    int i = 0;
    for (; i + 4 <= m; i += 4)
      kernel256_4x16(a + static_cast<size_t>(i) * k, k, pack.data(),
                     c + static_cast<size_t>(i) * n + j, n, k, accumulate);
    for (; i < m; ++i)
      kernel256_1x16(a + static_cast<size_t>(i) * k, pack.data(),
                     c + static_cast<size_t>(i) * n + j, k, accumulate);
  }
  if (j < n) {
    for (int i = 0; i < m; ++i) {
      float* ci = c + static_cast<size_t>(i) * n;
      if (!accumulate)
        for (int q = j; q < n; ++q) ci[q] = 0.0f;
      const float* ai = a + static_cast<size_t>(i) * k;
      for (int p = 0; p < k; ++p) {
        const float aip = ai[p];
        const float* bp = b + static_cast<size_t>(p) * n;
        for (int q = j; q < n; ++q) ci[q] += aip * bp[q];
      }
    }
  }
}

#pragma GCC pop_options

enum class SimdLevel { scalar, avx2, avx512 };

inline SimdLevel simd_level() {
  static const SimdLevel level = [] {
    __builtin_cpu_init();
    if (__builtin_cpu_supports("avx512f")) return SimdLevel::avx512;
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
      return SimdLevel::avx2;
    return SimdLevel::scalar;
  }();
  return level;
}

#endif  // LOGSIEVE_X86

}  // namespace detail

// C = A * B, or C += A * B when accumulate is set. Shapes must agree.
inline void matmul(const Matrix<float>& a, const Matrix<float>& b, Matrix<float>& c,
                   bool accumulate = false) {
  if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols)
    throw std::invalid_argument("matmul: shape mismatch (" + std::to_string(a.rows) + "x" +
                                std::to_string(a.cols) + ") * (" + std::to_string(b.rows) +
                                "x" + std::to_string(b.cols) + ")");
#ifdef LOGSIEVE_X86
  thread_local std::vector<float> pack;
  switch (detail::simd_level()) {
    case detail::SimdLevel::avx512:
      detail::gemm_avx512(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols,
                          b.cols, accumulate, pack);
      return;
    case detail::SimdLevel::avx2:
      detail::gemm_avx2(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols,
                        b.cols, accumulate, pack);
      return;
    case detail::SimdLevel::scalar:
      break;
  }
#endif
  detail::gemm_generic(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols,
                       b.cols, accumulate);
}

inline void matmul(const Matrix<double>& a, const Matrix<double>& b, Matrix<double>& c,
                   bool accumulate = false) {
  if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols)
    throw std::invalid_argument("matmul: shape mismatch");
  detail::gemm_generic(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols,
                       b.cols, accumulate);
}

}  // namespace logsieve
