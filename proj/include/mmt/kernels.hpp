// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>

// Dense double-precision inner loops. Every kernel has a portable scalar
// reference and an AVX2+FMA variant; the active table is picked once at
// startup from CPUID and can be forced with MMT_KERNELS=scalar|avx2.
//
// All matrices are row-major and densely packed. The gemm kernels
// accumulate into C (C += ...), they never overwrite it.

namespace mmt::kernels {

struct AdamCoeffs {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias1;  // 1 - beta1^t
  double bias2;  // 1 - beta2^t
};

struct KernelTable {
  std::string_view name;

  // C[m x n] += A[m x k] * B[k x n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);
  // C[m x n] += A[m x k] * B[n x k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);
  // C[m x n] += A[k x m]^T * B[k x n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);

  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // Bias-corrected Adam update over one flat parameter buffer.
  void (*adam)(double* param, double* m, double* v, const double* grad,
               std::size_t n, const AdamCoeffs& c);
};

const KernelTable& scalar_table();

/// nullptr when the binary or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

/// Table used by all tensor ops.
const KernelTable& active();

/// Override the active table ("scalar" or "avx2"). Returns false if the
/// requested variant is unavailable; the active table is then unchanged.
bool select(std::string_view name);

}  // namespace mmt::kernels
