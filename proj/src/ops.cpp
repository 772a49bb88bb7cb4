// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mmt/error.hpp"
#include "mmt/kernels.hpp"

namespace mmt::ops {
namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;

ImplPtr new_impl(Shape shape) {
  auto impl = std::make_shared<TensorImpl>();
  impl->data.assign(numel(shape), 0.0);
  impl->shape = std::move(shape);
  return impl;
}

bool wants_grad(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

// Records the rule produced by `make_rule` when gradients are wanted.
template <typename MakeRule>
Tensor emit(ImplPtr out, bool needs_grad, MakeRule&& make_rule) {
  if (needs_grad) {
    out->requires_grad = true;
    Tape::active()->record(out, make_rule());
  }
  return Tensor(std::move(out));
}

void require_2d(const Tensor& t, const char* op) {
  if (t.dim() != 2) {
    throw DimensionError(std::string(op) + ": expected a 2-D tensor, got " + shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

const kernels::KernelTable& K() { return kernels::active(); }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.size(0), k = a.size(1), n = b.size(1);
  if (b.size(0) != k) {
    throw DimensionError("matmul: inner dimensions differ for " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
  }
  auto out = new_impl({m, n});
  K().gemm_nn(m, n, k, a.data().data(), b.data().data(), out->data.data());
  return emit(out, wants_grad({&a, &b}), [&] {
    return [ai = a.impl(), bi = b.impl(), o = out.get(), m, n, k] {
      const double* g = o->grad.data();
      if (ai->requires_grad) K().gemm_nt(m, k, n, g, bi->data.data(), ai->ensure_grad().data());
      if (bi->requires_grad) K().gemm_tn(k, n, m, ai->data.data(), g, bi->ensure_grad().data());
    };
  });
}

Tensor matmul_bt(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul_bt");
  require_2d(b, "matmul_bt");
  const std::size_t m = a.size(0), k = a.size(1), n = b.size(0);
  if (b.size(1) != k) {
    throw DimensionError("matmul_bt: inner dimensions differ for " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()) + "^T");
  }
  auto out = new_impl({m, n});
  K().gemm_nt(m, n, k, a.data().data(), b.data().data(), out->data.data());
  return emit(out, wants_grad({&a, &b}), [&] {
    return [ai = a.impl(), bi = b.impl(), o = out.get(), m, n, k] {
      const double* g = o->grad.data();
      // dA = G B, dB = G^T A
      if (ai->requires_grad) K().gemm_nn(m, k, n, g, bi->data.data(), ai->ensure_grad().data());
      if (bi->requires_grad) K().gemm_tn(n, k, m, g, ai->data.data(), bi->ensure_grad().data());
    };
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto out = new_impl(a.shape());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) out->data[i] = x[i] + y[i];
  return emit(out, wants_grad({&a, &b}), [&] {
    return [ai = a.impl(), bi = b.impl(), o = out.get()] {
      for (auto* p : {ai.get(), bi.get()}) {
        if (!p->requires_grad) continue;
        auto& g = p->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
      }
    };
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto out = new_impl(a.shape());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) out->data[i] = x[i] - y[i];
  return emit(out, wants_grad({&a, &b}), [&] {
    return [ai = a.impl(), bi = b.impl(), o = out.get()] {
      if (ai->requires_grad) {
        auto& g = ai->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
      }
      if (bi->requires_grad) {
        auto& g = bi->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o->grad[i];
      }
    };
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto out = new_impl(a.shape());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) out->data[i] = x[i] * y[i];
  return emit(out, wants_grad({&a, &b}), [&] {
    return [ai = a.impl(), bi = b.impl(), o = out.get()] {
      // Read both operands before writing: a and b may be the same tensor.
      const std::vector<double>& xa = ai->data;
      const std::vector<double>& xb = bi->data;
      if (ai->requires_grad) {
        auto& g = ai->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * xb[i];
      }
      if (bi->requires_grad) {
        auto& g = bi->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * xa[i];
      }
    };
  });
}

Tensor scale(const Tensor& a, double factor) {
  auto out = new_impl(a.shape());
  auto x = a.data();
  for (std::size_t i = 0; i < x.size(); ++i) out->data[i] = x[i] * factor;
  return emit(out, wants_grad({&a}), [&] {
    return [ai = a.impl(), o = out.get(), factor] {
      auto& g = ai->ensure_grad();
      K().axpy(factor, o->grad.data(), g.data(), g.size());
    };
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.numel() != x.cols()) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match " +
                         shape_str(x.shape()));
  }
  const std::size_t rows = x.rows(), cols = x.cols();
  auto out = new_impl(x.shape());
  auto xv = x.data(), bv = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out->data[r * cols + c] = xv[r * cols + c] + bv[c];
  }
  return emit(out, wants_grad({&x, &bias}), [&] {
    return [xi = x.impl(), bi = bias.impl(), o = out.get(), rows, cols] {
      if (xi->requires_grad) {
        auto& g = xi->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
      }
      if (bi->requires_grad) {
        auto& g = bi->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) g[c] += o->grad[r * cols + c];
        }
      }
    };
  });
}

Tensor relu(const Tensor& x) {
  auto out = new_impl(x.shape());
  auto xv = x.data();
  for (std::size_t i = 0; i < xv.size(); ++i) out->data[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return emit(out, wants_grad({&x}), [&] {
    return [xi = x.impl(), o = out.get()] {
      auto& g = xi->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (xi->data[i] > 0.0) g[i] += o->grad[i];
      }
    };
  });
}

Tensor sum(const Tensor& x) {
  auto out = new_impl({});
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  out->data[0] = acc;
  return emit(out, wants_grad({&x}), [&] {
    return [xi = x.impl(), o = out.get()] {
      const double g0 = o->grad[0];
      for (double& g : xi->ensure_grad()) g += g0;
    };
  });
}

Tensor softmax(const Tensor& x) {
  const std::size_t rows = x.rows(), cols = x.cols();
  auto out = new_impl(x.shape());
  auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * cols;
    double* y = out->data.data() + r * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) {
      if (!std::isfinite(in[c])) throw NumericError("softmax: non-finite input");
      mx = std::max(mx, in[c]);
    }
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (y[c] = std::exp(in[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) y[c] /= z;
  }
  return emit(out, wants_grad({&x}), [&] {
    return [xi = x.impl(), o = out.get(), rows, cols] {
      auto& g = xi->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = o->data.data() + r * cols;
        const double* dy = o->grad.data() + r * cols;
        const double s = K().dot(dy, y, cols);
        for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += y[c] * (dy[c] - s);
      }
    };
  });
}

Tensor rms_norm(const Tensor& x, const Tensor& gain, double eps) {
  const std::size_t rows = x.rows(), d = x.cols();
  if (gain.numel() != d) {
    throw DimensionError("rms_norm: gain " + shape_str(gain.shape()) + " does not match " +
                         shape_str(x.shape()));
  }
  auto out = new_impl(x.shape());
  std::vector<double> inv_rms(rows);
  auto xv = x.data(), gv = gain.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * d;
    const double ms = K().dot(in, in, d) / static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(ms + eps);
    inv_rms[r] = inv;
    for (std::size_t c = 0; c < d; ++c) out->data[r * d + c] = gv[c] * (in[c] * inv);
  }
  return emit(out, wants_grad({&x, &gain}), [&] {
    return [xi = x.impl(), gi = gain.impl(), o = out.get(), inv = std::move(inv_rms), rows, d] {
      const double* xd = xi->data.data();
      const double* gd = gi->data.data();
      const double* dy = o->grad.data();
      if (gi->requires_grad) {
        auto& gg = gi->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < d; ++c) gg[c] += dy[r * d + c] * xd[r * d + c] * inv[r];
        }
      }
      if (xi->requires_grad) {
        auto& gx = xi->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          const double* in = xd + r * d;
          const double* dyr = dy + r * d;
          double proj = 0.0;
          for (std::size_t c = 0; c < d; ++c) proj += gd[c] * dyr[c] * in[c];
          const double k = proj * inv[r] * inv[r] * inv[r] / static_cast<double>(d);
          for (std::size_t c = 0; c < d; ++c) {
            gx[r * d + c] += gd[c] * dyr[c] * inv[r] - in[c] * k;
          }
        }
      }
    };
  });
}

Tensor embedding(const Tensor& table, std::span<const TokenId> ids) {
  require_2d(table, "embedding");
  const std::size_t vocab = table.size(0), d = table.size(1);
  if (ids.empty()) throw DimensionError("embedding: empty id sequence");
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw IndexError("embedding: token " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(vocab));
    }
  }
  auto out = new_impl({ids.size(), d});
  auto tv = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[i]) * d, d, out->data.data() + i * d);
  }
  return emit(out, wants_grad({&table}), [&] {
    return [ti = table.impl(), o = out.get(), idv = TokenSeq(ids.begin(), ids.end()), d] {
      auto& g = ti->ensure_grad();
      for (std::size_t i = 0; i < idv.size(); ++i) {
        double* row = g.data() + static_cast<std::size_t>(idv[i]) * d;
        const double* src = o->grad.data() + i * d;
        for (std::size_t c = 0; c < d; ++c) row[c] += src[c];
      }
    };
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const TokenId> targets,
                     TokenId ignore_id) {
  require_2d(logits, "cross_entropy");
  const std::size_t rows = logits.size(0), vocab = logits.size(1);
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for logits " + shape_str(logits.shape()));
  }
  std::size_t count = 0;
  for (TokenId t : targets) {
    if (t == ignore_id) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw IndexError("cross_entropy: target " + std::to_string(t) + " outside vocabulary of " +
                       std::to_string(vocab));
    }
    ++count;
  }
  if (count == 0) throw ContractError("empty loss: every target position is ignored");

  // Softmax probabilities of the kept rows are needed by the backward rule.
  std::vector<double> probs(rows * vocab, 0.0);
  double total = 0.0;
  auto lv = logits.data();
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] == ignore_id) continue;
    const double* in = lv.data() + r * vocab;
    double* p = probs.data() + r * vocab;
    const double mx = *std::max_element(in, in + vocab);
    double z = 0.0;
    for (std::size_t c = 0; c < vocab; ++c) z += (p[c] = std::exp(in[c] - mx));
    for (std::size_t c = 0; c < vocab; ++c) p[c] /= z;
    total += (std::log(z) + mx) - in[targets[r]];
  }
  auto out = new_impl({});
  out->data[0] = total / static_cast<double>(count);
  return emit(out, wants_grad({&logits}), [&] {
    return [li = logits.impl(), o = out.get(), p = std::move(probs),
            tv = TokenSeq(targets.begin(), targets.end()), ignore_id, count, rows, vocab] {
      auto& g = li->ensure_grad();
      const double s = o->grad[0] / static_cast<double>(count);
      for (std::size_t r = 0; r < rows; ++r) {
        if (tv[r] == ignore_id) continue;
        K().axpy(s, p.data() + r * vocab, g.data() + r * vocab, vocab);
        g[r * vocab + static_cast<std::size_t>(tv[r])] -= s;
      }
    };
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  require_2d(x, "slice_rows");
  if (count == 0 || begin + count > x.size(0)) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " + shape_str(x.shape()));
  }
  const std::size_t d = x.size(1);
  auto out = new_impl({count, d});
  std::copy_n(x.data().data() + begin * d, count * d, out->data.data());
  return emit(out, wants_grad({&x}), [&] {
    return [xi = x.impl(), o = out.get(), begin, d] {
      auto& g = xi->ensure_grad();
      for (std::size_t i = 0; i < o->grad.size(); ++i) g[begin * d + i] += o->grad[i];
    };
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  const std::size_t d = parts.front().cols();
  std::size_t rows = 0;
  bool needs = false;
  for (const Tensor& p : parts) {
    require_2d(p, "concat_rows");
    if (p.size(1) != d) {
      throw DimensionError("concat_rows: column mismatch " + shape_str(parts.front().shape()) +
                           " vs " + shape_str(p.shape()));
    }
    rows += p.size(0);
    needs = needs || p.requires_grad();
  }
  needs = needs && Tape::active() != nullptr;
  auto out = new_impl({rows, d});
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    std::copy(p.data().begin(), p.data().end(), out->data.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += p.numel();
  }
  return emit(out, needs, [&] {
    std::vector<ImplPtr> impls;
    for (const Tensor& p : parts) impls.push_back(p.impl());
    return [impls = std::move(impls), o = out.get()] {
      std::size_t off = 0;
      for (const ImplPtr& p : impls) {
        if (p->requires_grad) {
          auto& g = p->ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[off + i];
        }
        off += p->data.size();
      }
    };
  });
}

namespace {

// Copies head `h` of rows [begin, begin+len) out of a [T x d] buffer.
void gather_head(const double* src, std::size_t d, std::size_t dh, std::size_t h,
                 std::size_t begin, std::size_t len, double* dst) {
  for (std::size_t r = 0; r < len; ++r) {
    std::copy_n(src + (begin + r) * d + h * dh, dh, dst + r * dh);
  }
}

void scatter_add_head(const double* src, std::size_t d, std::size_t dh, std::size_t h,
                      std::size_t begin, std::size_t len, double* dst) {
  for (std::size_t r = 0; r < len; ++r) {
    double* row = dst + (begin + r) * d + h * dh;
    for (std::size_t c = 0; c < dh; ++c) row[c] += src[r * dh + c];
  }
}

}  // namespace

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                 const AttentionSpec& spec) {
  require_2d(q, "attention");
  require_2d(k, "attention");
  require_2d(v, "attention");
  const std::size_t d = q.size(1);
  if (k.size(1) != d || v.size(1) != d || k.size(0) != v.size(0)) {
    throw DimensionError("attention: incompatible q " + shape_str(q.shape()) + ", k " +
                         shape_str(k.shape()) + ", v " + shape_str(v.shape()));
  }
  if (spec.n_heads == 0 || d % spec.n_heads != 0) {
    throw DimensionError("attention: " + std::to_string(spec.n_heads) +
                         " heads do not divide width " + std::to_string(d));
  }
  for (const AttentionSegment& s : spec.segments) {
    if (s.q_len == 0 || s.k_len == 0 || s.q_begin + s.q_len > q.size(0) ||
        s.k_begin + s.k_len > k.size(0)) {
      throw DimensionError("attention: segment outside operands");
    }
    if (spec.causal && s.q_len != s.k_len) {
      throw DimensionError("attention: causal segment needs equal query and key lengths");
    }
  }
  const std::size_t heads = spec.n_heads, dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto& kt = K();

  auto out = new_impl(q.shape());
  // Attention weights for every (segment, head), kept for backward.
  std::vector<double> probs;
  std::vector<std::size_t> prob_offset;
  std::vector<double> qh, kh, vh, oh;
  for (const AttentionSegment& s : spec.segments) {
    qh.resize(s.q_len * dh);
    kh.resize(s.k_len * dh);
    vh.resize(s.k_len * dh);
    for (std::size_t h = 0; h < heads; ++h) {
      gather_head(q.data().data(), d, dh, h, s.q_begin, s.q_len, qh.data());
      gather_head(k.data().data(), d, dh, h, s.k_begin, s.k_len, kh.data());
      gather_head(v.data().data(), d, dh, h, s.k_begin, s.k_len, vh.data());
      prob_offset.push_back(probs.size());
      probs.resize(probs.size() + s.q_len * s.k_len, 0.0);
      double* p = probs.data() + prob_offset.back();
      kt.gemm_nt(s.q_len, s.k_len, dh, qh.data(), kh.data(), p);
      for (std::size_t i = 0; i < s.q_len; ++i) {
        double* row = p + i * s.k_len;
        const std::size_t visible = spec.causal ? i + 1 : s.k_len;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < visible; ++j) mx = std::max(mx, row[j] * inv_sqrt);
        double z = 0.0;
        for (std::size_t j = 0; j < visible; ++j) z += (row[j] = std::exp(row[j] * inv_sqrt - mx));
        for (std::size_t j = 0; j < visible; ++j) row[j] /= z;
        for (std::size_t j = visible; j < s.k_len; ++j) row[j] = 0.0;
      }
      oh.assign(s.q_len * dh, 0.0);
      kt.gemm_nn(s.q_len, dh, s.k_len, p, vh.data(), oh.data());
      scatter_add_head(oh.data(), d, dh, h, s.q_begin, s.q_len, out->data.data());
    }
  }

  return emit(out, wants_grad({&q, &k, &v}), [&] {
    return [qi = q.impl(), ki = k.impl(), vi = v.impl(), o = out.get(), spec,
            probs = std::move(probs), prob_offset = std::move(prob_offset), heads, dh, d,
            inv_sqrt] {
      const auto& kt = K();
      std::vector<double> qh, kh, vh, go, dp, dq, dk, dv;
      double* gq = qi->requires_grad ? qi->ensure_grad().data() : nullptr;
      double* gk = ki->requires_grad ? ki->ensure_grad().data() : nullptr;
      double* gv = vi->requires_grad ? vi->ensure_grad().data() : nullptr;
      std::size_t slot = 0;
      for (const AttentionSegment& s : spec.segments) {
        qh.resize(s.q_len * dh);
        kh.resize(s.k_len * dh);
        vh.resize(s.k_len * dh);
        go.resize(s.q_len * dh);
        for (std::size_t h = 0; h < heads; ++h, ++slot) {
          const double* p = probs.data() + prob_offset[slot];
          gather_head(o->grad.data(), d, dh, h, s.q_begin, s.q_len, go.data());
          gather_head(vi->data.data(), d, dh, h, s.k_begin, s.k_len, vh.data());
          if (gv) {
            dv.assign(s.k_len * dh, 0.0);
            kt.gemm_tn(s.k_len, dh, s.q_len, p, go.data(), dv.data());
            scatter_add_head(dv.data(), d, dh, h, s.k_begin, s.k_len, gv);
          }
          if (!gq && !gk) continue;
          // dS = P * (dP - rowsum(dP * P)), scaled back through 1/sqrt(dh).
          dp.assign(s.q_len * s.k_len, 0.0);
          kt.gemm_nt(s.q_len, s.k_len, dh, go.data(), vh.data(), dp.data());
          for (std::size_t i = 0; i < s.q_len; ++i) {
            double* row = dp.data() + i * s.k_len;
            const double* pr = p + i * s.k_len;
            const double dotp = kt.dot(row, pr, s.k_len);
            for (std::size_t j = 0; j < s.k_len; ++j) row[j] = pr[j] * (row[j] - dotp) * inv_sqrt;
          }
          gather_head(qi->data.data(), d, dh, h, s.q_begin, s.q_len, qh.data());
          gather_head(ki->data.data(), d, dh, h, s.k_begin, s.k_len, kh.data());
          if (gq) {
            dq.assign(s.q_len * dh, 0.0);
            kt.gemm_nn(s.q_len, dh, s.k_len, dp.data(), kh.data(), dq.data());
            scatter_add_head(dq.data(), d, dh, h, s.q_begin, s.q_len, gq);
          }
          if (gk) {
            dk.assign(s.k_len * dh, 0.0);
            kt.gemm_tn(s.k_len, dh, s.q_len, dp.data(), qh.data(), dk.data());
            scatter_add_head(dk.data(), d, dh, h, s.k_begin, s.k_len, gk);
          }
        }
      }
    };
  });
}

}  // namespace mmt::ops
