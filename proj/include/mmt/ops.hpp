// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "mmt/tensor.hpp"
#include "mmt/types.hpp"

// Differentiable operations. Each op computes its value eagerly and, when a
// tape is active and any input requires grad, records its backward rule.
// 2-D operands are [rows x cols]; "row-wise" ops act on the trailing axis.

namespace mmt::ops {

/// [m x k] * [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// [m x k] * [n x k]^T -> [m x n]
Tensor matmul_bt(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// x[r, c] + bias[c]
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor relu(const Tensor& x);
/// Sum of all elements, as a scalar.
Tensor sum(const Tensor& x);

/// Softmax over the trailing axis with max subtraction.
Tensor softmax(const Tensor& x);

/// gain * x / sqrt(mean(x^2) + eps), row-wise.
Tensor rms_norm(const Tensor& x, const Tensor& gain, double eps);

/// Rows of `table` selected by `ids`.
Tensor embedding(const Tensor& table, std::span<const TokenId> ids);

/// Mean over non-ignored rows of -log softmax(logits)[target].
Tensor cross_entropy(const Tensor& logits, std::span<const TokenId> targets,
                     TokenId ignore_id);

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor concat_rows(const std::vector<Tensor>& parts);

/// One attention problem inside a packed batch: query rows
/// [q_begin, q_begin+q_len) attend key/value rows [k_begin, k_begin+k_len).
struct AttentionSegment {
  std::size_t q_begin = 0;
  std::size_t q_len = 0;
  std::size_t k_begin = 0;
  std::size_t k_len = 0;
};

struct AttentionSpec {
  std::vector<AttentionSegment> segments;
  std::size_t n_heads = 1;
  /// Query i may only see keys j <= i (requires q_len == k_len).
  bool causal = false;
};

/// Scaled dot-product multi-head attention over already-projected
/// q [Tq x d], k [Tk x d], v [Tk x d]. Heads are contiguous column blocks.
/// Query rows not covered by any segment produce zeros.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                 const AttentionSpec& spec);

}  // namespace mmt::ops
