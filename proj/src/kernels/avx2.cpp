// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0
//
// Compiled with -mavx2 -mfma. Nothing in here may run before dispatch.cpp
// has confirmed CPU support.

#include "mmt/kernels.hpp"

#if defined(MMT_HAVE_AVX2)

#include <immintrin.h>

namespace mmt::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline void add_store(double* dst, __m256d v) {
  _mm256_storeu_pd(dst, _mm256_add_pd(_mm256_loadu_pd(dst), v));
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d y0 = _mm256_loadu_pd(y + i);
    __m256d y1 = _mm256_loadu_pd(y + i + 4);
    y0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), y0);
    y1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), y1);
    _mm256_storeu_pd(y + i, y0);
    _mm256_storeu_pd(y + i + 4, y1);
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double dot(const double* x, const double* y, std::size_t n) {
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), a1);
  }
  for (; i + 4 <= n; i += 4) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
  }
  double acc = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

// Shared 4x8 register tile for gemm_nn / gemm_tn. `a_at(r, p)` returns the
// A element feeding output row r at reduction index p; B rows are contiguous.
template <typename AAt>
inline void tile_4x8(std::size_t k, std::size_t n, AAt a_at, const double* b,
                     double* c, std::size_t ldc) {
  __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
  __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
  __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
  __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * n);
    const __m256d b1 = _mm256_loadu_pd(b + p * n + 4);
    __m256d a = _mm256_set1_pd(a_at(0, p));
    c00 = _mm256_fmadd_pd(a, b0, c00);
    c01 = _mm256_fmadd_pd(a, b1, c01);
    a = _mm256_set1_pd(a_at(1, p));
    c10 = _mm256_fmadd_pd(a, b0, c10);
    c11 = _mm256_fmadd_pd(a, b1, c11);
    a = _mm256_set1_pd(a_at(2, p));
    c20 = _mm256_fmadd_pd(a, b0, c20);
    c21 = _mm256_fmadd_pd(a, b1, c21);
    a = _mm256_set1_pd(a_at(3, p));
    c30 = _mm256_fmadd_pd(a, b0, c30);
    c31 = _mm256_fmadd_pd(a, b1, c31);
  }
  add_store(c, c00);
  add_store(c + 4, c01);
  add_store(c + ldc, c10);
  add_store(c + ldc + 4, c11);
  add_store(c + 2 * ldc, c20);
  add_store(c + 2 * ldc + 4, c21);
  add_store(c + 3 * ldc, c30);
  add_store(c + 3 * ldc + 4, c31);
}

template <typename AAt>
inline void tile_4x4(std::size_t k, std::size_t n, AAt a_at, const double* b,
                     double* c, std::size_t ldc) {
  __m256d c0 = _mm256_setzero_pd(), c1 = _mm256_setzero_pd();
  __m256d c2 = _mm256_setzero_pd(), c3 = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * n);
    c0 = _mm256_fmadd_pd(_mm256_set1_pd(a_at(0, p)), b0, c0);
    c1 = _mm256_fmadd_pd(_mm256_set1_pd(a_at(1, p)), b0, c1);
    c2 = _mm256_fmadd_pd(_mm256_set1_pd(a_at(2, p)), b0, c2);
    c3 = _mm256_fmadd_pd(_mm256_set1_pd(a_at(3, p)), b0, c3);
  }
  add_store(c, c0);
  add_store(c + ldc, c1);
  add_store(c + 2 * ldc, c2);
  add_store(c + 3 * ldc, c3);
}

template <typename AAt>
inline void gemm_rows_b_contig(std::size_t m, std::size_t n, std::size_t k,
                               AAt a_at, const double* b, double* c) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    auto at = [&](std::size_t r, std::size_t p) { return a_at(i + r, p); };
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) tile_4x8(k, n, at, b + j, c + i * n + j, n);
    for (; j + 4 <= n; j += 4) tile_4x4(k, n, at, b + j, c + i * n + j, n);
    for (; j < n; ++j) {
      for (std::size_t r = 0; r < 4; ++r) {
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += at(r, p) * b[p * n + j];
        c[(i + r) * n + j] += acc;
      }
    }
  }
  for (; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) axpy(a_at(i, p), b + p * n, ci, n);
  }
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c) {
  gemm_rows_b_contig(
      m, n, k, [a, k](std::size_t r, std::size_t p) { return a[r * k + p]; }, b, c);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c) {
  gemm_rows_b_contig(
      m, n, k, [a, m](std::size_t r, std::size_t p) { return a[p * m + r]; }, b, c);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c) {
  const std::size_t kv = k & ~std::size_t{3};
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const double* b0 = b + j * k;
      const double* b1 = b0 + k;
      const double* b2 = b1 + k;
      const double* b3 = b2 + k;
      __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
      for (std::size_t p = 0; p < kv; p += 4) {
        const __m256d av = _mm256_loadu_pd(ai + p);
        s0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + p), s0);
        s1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + p), s1);
        s2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b2 + p), s2);
        s3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b3 + p), s3);
      }
      double r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
      for (std::size_t p = kv; p < k; ++p) {
        r0 += ai[p] * b0[p];
        r1 += ai[p] * b1[p];
        r2 += ai[p] * b2[p];
        r3 += ai[p] * b3[p];
      }
      ci[j] += r0;
      ci[j + 1] += r1;
      ci[j + 2] += r2;
      ci[j + 3] += r3;
    }
    for (; j < n; ++j) ci[j] += dot(ai, b + j * k, k);
  }
}

void adam(double* param, double* m, double* v, const double* grad,
          std::size_t n, const AdamCoeffs& c) {
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d omb1 = _mm256_set1_pd(1.0 - c.beta1);
  const __m256d omb2 = _mm256_set1_pd(1.0 - c.beta2);
  const __m256d inv_bias1 = _mm256_set1_pd(1.0 / c.bias1);
  const __m256d inv_bias2 = _mm256_set1_pd(1.0 / c.bias2);
  const __m256d lr = _mm256_set1_pd(c.lr);
  const __m256d eps = _mm256_set1_pd(c.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    __m256d mv = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    mv = _mm256_fmadd_pd(b1, mv, _mm256_mul_pd(omb1, g));
    vv = _mm256_fmadd_pd(b2, vv, _mm256_mul_pd(omb2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_mul_pd(mv, inv_bias1);
    const __m256d vhat = _mm256_mul_pd(vv, inv_bias2);
    const __m256d step =
        _mm256_div_pd(_mm256_mul_pd(lr, mhat), _mm256_add_pd(_mm256_sqrt_pd(vhat), eps));
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
  }
  if (i < n) {
    scalar_table().adam(param + i, m + i, v + i, grad + i, n - i, c);
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{"avx2", gemm_nn, gemm_nt, gemm_tn,
                                 dot,    axpy,    adam};
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &table : nullptr;
}

}  // namespace mmt::kernels

#else

namespace mmt::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace mmt::kernels

#endif
