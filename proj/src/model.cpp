// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmt/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "mmt/error.hpp"
#include "mmt/rng.hpp"

namespace mmt {

namespace {

constexpr std::array<std::string_view, kNumParamGroups> kGroupNames = {
    "Emb",    "Enc_Att", "Enc_FFN", "Enc_LN",  "Dec_Att",
    "Dec_CrossAtt", "Dec_FFN", "Dec_LN", "Enc_Mod", "Dec_Mod"};

}  // namespace

std::string_view group_name(ParamGroup g) { return kGroupNames.at(static_cast<std::size_t>(g)); }

std::optional<ParamGroup> parse_group(std::string_view name) {
  for (std::size_t i = 0; i < kGroupNames.size(); ++i) {
    if (kGroupNames[i] == name) return static_cast<ParamGroup>(i);
  }
  return std::nullopt;
}

bool is_module_group(ParamGroup g) { return g == ParamGroup::EncMod || g == ParamGroup::DecMod; }

std::string_view variant_name(Variant v) { return v == Variant::Modular ? "modular" : "dense"; }

std::optional<Variant> parse_variant(std::string_view name) {
  if (name == "modular") return Variant::Modular;
  if (name == "dense") return Variant::Dense;
  return std::nullopt;
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v <= 0) throw ConfigError(std::string(what) + " must be positive, got " + std::to_string(v));
  };
  positive(n_languages, "n_languages");
  positive(n_enc_layers, "n_enc_layers");
  positive(n_dec_layers, "n_dec_layers");
  positive(d_model, "d_model");
  positive(n_heads, "n_heads");
  positive(d_ff, "d_ff");
  positive(d_bottleneck, "d_bottleneck");
  positive(vocab_size, "vocab_size");
  positive(max_len, "max_len");
  if (d_model % n_heads != 0) {
    throw ConfigError("n_heads (" + std::to_string(n_heads) + ") must divide d_model (" +
                      std::to_string(d_model) + ")");
  }
  if (!(norm_eps >= 0.0)) throw ConfigError("norm_eps must be non-negative");
  if (slice_size < 0) throw ConfigError("slice_size must be non-negative");
  if (slice_size > 0 && static_cast<long>(slice_size) * n_languages > vocab_size) {
    throw ConfigError("n_languages * slice_size exceeds vocab_size");
  }
  if (!(surface_tie >= 0.0 && surface_tie <= 1.0)) throw ConfigError("surface_tie must lie in [0, 1]");
}

ParamCounts param_counts(const ModelConfig& c) {
  const std::int64_t d = c.d_model, ff = c.d_ff, b = c.d_bottleneck;
  const std::int64_t attn = 4 * d * d;
  const std::int64_t ffn = 2 * d * ff;
  ParamCounts out;
  out.shared = static_cast<std::int64_t>(c.vocab_size) * d + 2 * static_cast<std::int64_t>(c.max_len) * d;
  out.shared += c.n_enc_layers * (attn + ffn + 2 * d);
  out.shared += c.n_dec_layers * (2 * attn + ffn + 3 * d);
  out.shared += d;  // final decoder norm
  out.per_language = c.n_layers() * (b * d + b + d * b + d);
  return out;
}

Tensor adapter_apply(const Tensor& h, const AdapterUnit& unit) {
  using namespace ops;
  Tensor hidden = relu(add_bias(matmul_bt(h, unit.down), unit.down_bias));
  return add(h, add_bias(matmul_bt(hidden, unit.up), unit.up_bias));
}

PackedBatch pack_batch(const std::vector<SequencePair>& items) {
  PackedBatch b;
  std::vector<std::size_t> by_lang(items.size());
  std::iota(by_lang.begin(), by_lang.end(), std::size_t{0});
  std::stable_sort(by_lang.begin(), by_lang.end(), [&](std::size_t x, std::size_t y) {
    return items[x].lang.index < items[y].lang.index;
  });
  b.order.assign(items.size(), 0);
  for (std::size_t slot = 0; slot < by_lang.size(); ++slot) {
    const SequencePair& it = items[by_lang[slot]];
    b.order[by_lang[slot]] = slot;
    if (it.src.empty()) throw ContractError("pack_batch: empty source sequence");
    PackedBatch::Span s{b.src.size(), it.src.size()};
    PackedBatch::Span t{b.tgt.size(), it.tgt_in.size()};
    b.src.insert(b.src.end(), it.src.begin(), it.src.end());
    b.tgt.insert(b.tgt.end(), it.tgt_in.begin(), it.tgt_in.end());
    for (std::size_t p = 0; p < s.len; ++p) b.src_pos.push_back(static_cast<TokenId>(p));
    for (std::size_t p = 0; p < t.len; ++p) b.tgt_pos.push_back(static_cast<TokenId>(p));
    b.src_seqs.push_back(s);
    b.tgt_seqs.push_back(t);
    if (b.blocks.empty() || b.blocks.back().lang != it.lang) {
      b.blocks.push_back({it.lang, s, t});
    } else {
      b.blocks.back().src.len += s.len;
      b.blocks.back().tgt.len += t.len;
    }
  }
  return b;
}

Model::Model(const ModelConfig& cfg, Variant variant) : cfg_(cfg), variant_(variant) {
  cfg_.validate();
  const std::size_t d = cfg.d_model, ff = cfg.d_ff, b = cfg.d_bottleneck;
  token_emb_ = add_param("emb.token", ParamGroup::Emb, -1, {static_cast<std::size_t>(cfg.vocab_size), d});
  enc_pos_ = add_param("emb.pos_enc", ParamGroup::Emb, -1, {static_cast<std::size_t>(cfg.max_len), d});
  dec_pos_ = add_param("emb.pos_dec", ParamGroup::Emb, -1, {static_cast<std::size_t>(cfg.max_len), d});

  auto attention = [&](const std::string& prefix, ParamGroup g) {
    AttentionWeights w;
    w.q = add_param(prefix + ".q", g, -1, {d, d});
    w.k = add_param(prefix + ".k", g, -1, {d, d});
    w.v = add_param(prefix + ".v", g, -1, {d, d});
    w.o = add_param(prefix + ".o", g, -1, {d, d});
    return w;
  };
  for (int i = 0; i < cfg.n_enc_layers; ++i) {
    const std::string p = "enc." + std::to_string(i);
    EncoderLayer l;
    l.ln_attn = add_param(p + ".ln_attn", ParamGroup::EncLN, -1, {d});
    l.attn = attention(p + ".attn", ParamGroup::EncAtt);
    l.ln_ffn = add_param(p + ".ln_ffn", ParamGroup::EncLN, -1, {d});
    l.w1 = add_param(p + ".ffn.w1", ParamGroup::EncFFN, -1, {d, ff});
    l.w2 = add_param(p + ".ffn.w2", ParamGroup::EncFFN, -1, {ff, d});
    enc_.push_back(std::move(l));
  }
  for (int i = 0; i < cfg.n_dec_layers; ++i) {
    const std::string p = "dec." + std::to_string(i);
    DecoderLayer l;
    l.ln_self = add_param(p + ".ln_self", ParamGroup::DecLN, -1, {d});
    l.self_attn = attention(p + ".self", ParamGroup::DecAtt);
    l.ln_cross = add_param(p + ".ln_cross", ParamGroup::DecLN, -1, {d});
    l.cross_attn = attention(p + ".cross", ParamGroup::DecCrossAtt);
    l.ln_ffn = add_param(p + ".ln_ffn", ParamGroup::DecLN, -1, {d});
    l.w1 = add_param(p + ".ffn.w1", ParamGroup::DecFFN, -1, {d, ff});
    l.w2 = add_param(p + ".ffn.w2", ParamGroup::DecFFN, -1, {ff, d});
    dec_.push_back(std::move(l));
  }
  dec_ln_final_ = add_param("dec.ln_final", ParamGroup::DecLN, -1, {d});

  const int banks = variant == Variant::Modular ? cfg.n_languages : 1;
  adapters_.resize(static_cast<std::size_t>(banks));
  for (int bank = 0; bank < banks; ++bank) {
    for (int layer = 0; layer < cfg.n_layers(); ++layer) {
      const bool encoder = layer < cfg.n_enc_layers;
      const ParamGroup g = encoder ? ParamGroup::EncMod : ParamGroup::DecMod;
      // Dense models keep their one shared bank in the module groups too,
      // so it is frozen at fine-tuning exactly like modular adapters.
      const int lang = variant == Variant::Modular ? bank : -1;
      const std::string p = "adapter." + std::to_string(bank) + "." + std::to_string(layer);
      AdapterUnit u;
      u.bank = bank;
      u.layer = layer;
      u.down = add_param(p + ".down", g, lang, {b, d});
      u.down_bias = add_param(p + ".down_bias", g, lang, {b});
      u.up = add_param(p + ".up", g, lang, {d, b});
      u.up_bias = add_param(p + ".up_bias", g, lang, {d});
      adapters_[static_cast<std::size_t>(bank)].push_back(std::move(u));
    }
  }
}

Model::Model(const ModelConfig& cfg, Variant variant, std::uint64_t seed) : Model(cfg, variant) {
  initialize(seed);
}

Tensor& Model::add_param(std::string name, ParamGroup group, int language, Shape shape) {
  params_.push_back(Param{std::move(name), group, language, Tensor::zeros(std::move(shape), true)});
  return params_.back().value;
}

void Model::initialize(std::uint64_t seed) {
  Rng rng(seed);
  auto fill_normal = [&](Tensor& t, double stddev) {
    for (double& x : t.mutable_data()) x = stddev * rng.normal();
  };
  for (Param& p : params_) {
    Tensor& t = p.value;
    const std::string& n = p.name;
    auto ends_with = [&](std::string_view s) {
      return n.size() >= s.size() && n.compare(n.size() - s.size(), s.size(), s) == 0;
    };
    if (n == "emb.token") {
      init_token_embeddings(t, rng);
    } else if (n == "emb.pos_enc" || n == "emb.pos_dec") {
      fill_normal(t, 0.5);
    } else if (t.dim() == 1 && (p.group == ParamGroup::EncLN || p.group == ParamGroup::DecLN)) {
      std::fill(t.mutable_data().begin(), t.mutable_data().end(), 1.0);
    } else if (ends_with(".down")) {
      fill_normal(t, 1.0 / std::sqrt(static_cast<double>(cfg_.d_model)));
    } else if (is_module_group(p.group)) {
      // up-projection and both biases start at zero: identity adapters
    } else {
      fill_normal(t, 1.0 / std::sqrt(static_cast<double>(t.size(0))));
    }
  }
}

// Rows k, V_s + k, 2 V_s + k, ... (same in-slice index, i.e. the same
// surface form in every language) share a common component of weight
// surface_tie. Rows past the language slices are independent.
void Model::init_token_embeddings(Tensor& table, Rng& rng) const {
  constexpr double kStd = 0.5;
  const auto d = static_cast<std::size_t>(cfg_.d_model);
  auto data = table.mutable_data();
  for (double& x : data) x = kStd * rng.normal();
  if (cfg_.slice_size <= 0 || cfg_.surface_tie == 0.0) return;
  const auto vs = static_cast<std::size_t>(cfg_.slice_size);
  const std::size_t tied_rows = std::min<std::size_t>(
      static_cast<std::size_t>(cfg_.n_languages) * vs, table.rows());
  std::vector<double> shared(vs * d);
  for (double& x : shared) x = kStd * rng.normal();
  const double a = cfg_.surface_tie;
  const double b = std::sqrt(1.0 - a * a);
  for (std::size_t r = 0; r < tied_rows; ++r) {
    const double* s = &shared[(r % vs) * d];
    for (std::size_t c = 0; c < d; ++c) data[r * d + c] = a * s[c] + b * data[r * d + c];
  }
}

Model Model::clone() const {
  Model m(cfg_, variant_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto src = params_[i].value.data();
    std::copy(src.begin(), src.end(), m.params_[i].value.mutable_data().begin());
  }
  m.override_ = override_;
  m.adapters_enabled_ = adapters_enabled_;
  return m;
}

std::size_t Model::param_index(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw IndexError("no parameter named '" + std::string(name) + "'");
}

void Model::check_language(LanguageId lang) const {
  if (lang.index < 0 || lang.index >= cfg_.n_languages) {
    throw IndexError("routing: language " + std::to_string(lang.index) + " outside [0, " +
                     std::to_string(cfg_.n_languages) + ")");
  }
}

const AdapterUnit& Model::route(LanguageId lang, int layer) const {
  check_language(lang);
  if (layer < 0 || layer >= cfg_.n_layers()) {
    throw IndexError("routing: layer " + std::to_string(layer) + " outside [0, " +
                     std::to_string(cfg_.n_layers()) + ")");
  }
  const std::size_t bank = variant_ == Variant::Modular ? static_cast<std::size_t>(lang.index) : 0;
  return adapters_[bank][static_cast<std::size_t>(layer)];
}

void Model::swap_language(LanguageId lang) {
  check_language(lang);
  override_ = lang;
}

Tensor Model::apply_adapters(const Tensor& x, const PackedBatch& batch, bool encoder,
                             int layer) const {
  if (!adapters_enabled_) return x;
  if (override_) return adapter_apply(x, route(*override_, layer));
  if (batch.blocks.size() == 1) return adapter_apply(x, route(batch.blocks.front().lang, layer));
  std::vector<Tensor> parts;
  parts.reserve(batch.blocks.size());
  for (const PackedBatch::Block& blk : batch.blocks) {
    const PackedBatch::Span& rows = encoder ? blk.src : blk.tgt;
    if (rows.len == 0) continue;
    parts.push_back(adapter_apply(ops::slice_rows(x, rows.begin, rows.len), route(blk.lang, layer)));
  }
  return ops::concat_rows(parts);
}

Tensor Model::ffn(const Tensor& x, const Tensor& w1, const Tensor& w2) const {
  return ops::matmul(ops::relu(ops::matmul(x, w1)), w2);
}

namespace {

Tensor project_attention(const Tensor& queries_from, const Tensor& keys_from, const Tensor& wq,
                         const Tensor& wk, const Tensor& wv, const Tensor& wo,
                         const ops::AttentionSpec& spec) {
  using namespace ops;
  Tensor ctx = attention(matmul(queries_from, wq), matmul(keys_from, wk),
                         matmul(keys_from, wv), spec);
  return matmul(ctx, wo);
}

void check_lengths(const PackedBatch& batch, int max_len) {
  for (const auto& s : batch.src_seqs) {
    if (s.len > static_cast<std::size_t>(max_len)) {
      throw DimensionError("source length " + std::to_string(s.len) + " exceeds max_len " +
                           std::to_string(max_len));
    }
  }
  for (const auto& s : batch.tgt_seqs) {
    if (s.len > static_cast<std::size_t>(max_len)) {
      throw DimensionError("target length " + std::to_string(s.len) + " exceeds max_len " +
                           std::to_string(max_len));
    }
  }
}

}  // namespace

Tensor Model::encode_batch(const PackedBatch& batch) const {
  using namespace ops;
  check_lengths(batch, cfg_.max_len);
  for (const auto& blk : batch.blocks) check_language(blk.lang);
  AttentionSpec spec;
  spec.n_heads = static_cast<std::size_t>(cfg_.n_heads);
  for (const auto& s : batch.src_seqs) spec.segments.push_back({s.begin, s.len, s.begin, s.len});

  Tensor x = add(embedding(token_emb_, batch.src), embedding(enc_pos_, batch.src_pos));
  for (std::size_t i = 0; i < enc_.size(); ++i) {
    const EncoderLayer& l = enc_[i];
    Tensor h = rms_norm(x, l.ln_attn, cfg_.norm_eps);
    x = add(x, project_attention(h, h, l.attn.q, l.attn.k, l.attn.v, l.attn.o, spec));
    x = add(x, ffn(rms_norm(x, l.ln_ffn, cfg_.norm_eps), l.w1, l.w2));
    x = apply_adapters(x, batch, true, static_cast<int>(i));
  }
  return x;
}

Tensor Model::decode_batch(const PackedBatch& batch, const Tensor& encoded) const {
  using namespace ops;
  if (batch.tgt.empty()) throw ContractError("decode: empty target prefix");
  AttentionSpec self_spec, cross_spec;
  self_spec.n_heads = cross_spec.n_heads = static_cast<std::size_t>(cfg_.n_heads);
  self_spec.causal = true;
  for (std::size_t i = 0; i < batch.tgt_seqs.size(); ++i) {
    const auto& t = batch.tgt_seqs[i];
    const auto& s = batch.src_seqs[i];
    if (t.len == 0) continue;
    self_spec.segments.push_back({t.begin, t.len, t.begin, t.len});
    cross_spec.segments.push_back({t.begin, t.len, s.begin, s.len});
  }

  Tensor y = add(embedding(token_emb_, batch.tgt), embedding(dec_pos_, batch.tgt_pos));
  for (std::size_t i = 0; i < dec_.size(); ++i) {
    const DecoderLayer& l = dec_[i];
    Tensor h = rms_norm(y, l.ln_self, cfg_.norm_eps);
    y = add(y, project_attention(h, h, l.self_attn.q, l.self_attn.k, l.self_attn.v,
                                 l.self_attn.o, self_spec));
    h = rms_norm(y, l.ln_cross, cfg_.norm_eps);
    y = add(y, project_attention(h, encoded, l.cross_attn.q, l.cross_attn.k, l.cross_attn.v,
                                 l.cross_attn.o, cross_spec));
    y = add(y, ffn(rms_norm(y, l.ln_ffn, cfg_.norm_eps), l.w1, l.w2));
    y = apply_adapters(y, batch, false, cfg_.n_enc_layers + static_cast<int>(i));
  }
  Tensor h = rms_norm(y, dec_ln_final_, cfg_.norm_eps);
  // Tied output head, rescaled by 1/sqrt(d) as in T5.
  return matmul_bt(scale(h, 1.0 / std::sqrt(static_cast<double>(cfg_.d_model))), token_emb_);
}

Tensor Model::forward_batch(const PackedBatch& batch) const {
  return decode_batch(batch, encode_batch(batch));
}

Tensor Model::encode(std::span<const TokenId> tokens, LanguageId lang) const {
  return encode_batch(pack_batch({SequencePair{tokens, {}, lang}}));
}

Tensor Model::forward(std::span<const TokenId> src, std::span<const TokenId> tgt_in,
                      LanguageId lang) const {
  return forward_batch(pack_batch({SequencePair{src, tgt_in, lang}}));
}

}  // namespace mmt
