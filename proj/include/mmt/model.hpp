// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmt/ops.hpp"
#include "mmt/rng.hpp"
#include "mmt/tensor.hpp"
#include "mmt/types.hpp"

namespace mmt {

/// Freeze/ownership label carried by every parameter tensor.
enum class ParamGroup : std::uint8_t {
  Emb,
  EncAtt,
  EncFFN,
  EncLN,
  DecAtt,
  DecCrossAtt,
  DecFFN,
  DecLN,
  EncMod,
  DecMod,
};

inline constexpr int kNumParamGroups = 10;

std::string_view group_name(ParamGroup g);
/// Accepts the canonical spelling ("Dec_FFN", "Enc_Mod", ...).
std::optional<ParamGroup> parse_group(std::string_view name);
bool is_module_group(ParamGroup g);

struct ModelConfig {
  int n_languages = 5;
  int n_enc_layers = 2;
  int n_dec_layers = 2;
  int d_model = 64;
  int n_heads = 4;
  int d_ff = 128;
  int d_bottleneck = 32;
  int vocab_size = 339;
  int max_len = 24;
  double norm_eps = 1e-6;
  /// Tokens per language slice (0: no slice structure). Used only by the
  /// token-embedding initializer.
  int slice_size = 0;
  /// Weight of the component shared by rows with the same in-slice index.
  double surface_tie = 0.0;

  int n_layers() const { return n_enc_layers + n_dec_layers; }
  /// Throws ConfigError naming the first violated constraint.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Modular: one adapter bank per language. Dense: a single bank shared by
/// every language (same per-forward parameter count as modular).
enum class Variant : std::uint8_t { Modular, Dense };

std::string_view variant_name(Variant v);
std::optional<Variant> parse_variant(std::string_view name);

struct ParamCounts {
  std::int64_t shared = 0;
  std::int64_t per_language = 0;
};

/// Analytic count of shared parameters and of one language's adapters.
ParamCounts param_counts(const ModelConfig& cfg);

struct Param {
  std::string name;
  ParamGroup group;
  int language;  // -1 for shared parameters
  Tensor value;
};

/// One language's bottleneck adapter at one layer:
/// h + relu(h D^T + b_D) U^T + b_U, D [bottleneck x d], U [d x bottleneck].
struct AdapterUnit {
  int bank = 0;
  int layer = 0;
  Tensor down;
  Tensor down_bias;
  Tensor up;
  Tensor up_bias;
};

Tensor adapter_apply(const Tensor& h, const AdapterUnit& unit);

/// Several source/target sequences packed row-wise. Examples are ordered by
/// language so each language's rows form one contiguous block.
struct PackedBatch {
  struct Span {
    std::size_t begin = 0;
    std::size_t len = 0;
  };
  struct Block {
    LanguageId lang;
    Span src;
    Span tgt;
  };

  TokenSeq src;
  TokenSeq src_pos;
  TokenSeq tgt;
  TokenSeq tgt_pos;
  std::vector<Span> src_seqs;
  std::vector<Span> tgt_seqs;
  std::vector<Block> blocks;
  /// order[i] = index of the caller's i-th example inside the packed layout.
  std::vector<std::size_t> order;
};

struct SequencePair {
  std::span<const TokenId> src;
  std::span<const TokenId> tgt_in;  // may be empty for encoder-only use
  LanguageId lang;
};

PackedBatch pack_batch(const std::vector<SequencePair>& items);

class Model {
 public:
  Model(const ModelConfig& cfg, Variant variant, std::uint64_t seed);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  /// Deep copy of every parameter.
  Model clone() const;

  const ModelConfig& config() const { return cfg_; }
  Variant variant() const { return variant_; }
  int n_banks() const { return static_cast<int>(adapters_.size()); }

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  /// Index into params() by name; throws IndexError if absent.
  std::size_t param_index(std::string_view name) const;

  /// Adapter unit serving `lang` at `layer` (encoder layers first).
  const AdapterUnit& route(LanguageId lang, int layer) const;

  /// Routes all subsequent calls through `lang`'s modules.
  void swap_language(LanguageId lang);
  void clear_language_override() { override_.reset(); }
  std::optional<LanguageId> language_override() const { return override_; }

  /// Disables every adapter (the plain shared transformer).
  void set_adapters_enabled(bool on) { adapters_enabled_ = on; }
  bool adapters_enabled() const { return adapters_enabled_; }

  Tensor encode(std::span<const TokenId> tokens, LanguageId lang) const;
  /// Logits [tgt_in.size() x vocab].
  Tensor forward(std::span<const TokenId> src, std::span<const TokenId> tgt_in,
                 LanguageId lang) const;

  /// Encoder output for every packed source row.
  Tensor encode_batch(const PackedBatch& batch) const;
  /// Decoder logits for every packed target row.
  Tensor decode_batch(const PackedBatch& batch, const Tensor& encoded) const;
  Tensor forward_batch(const PackedBatch& batch) const;

 private:
  struct AttentionWeights {
    Tensor q, k, v, o;
  };
  struct EncoderLayer {
    Tensor ln_attn, ln_ffn;
    AttentionWeights attn;
    Tensor w1, w2;
  };
  struct DecoderLayer {
    Tensor ln_self, ln_cross, ln_ffn;
    AttentionWeights self_attn, cross_attn;
    Tensor w1, w2;
  };

  Model(const ModelConfig& cfg, Variant variant);  // zero-filled structure
  void initialize(std::uint64_t seed);
  void init_token_embeddings(Tensor& table, Rng& rng) const;
  Tensor& add_param(std::string name, ParamGroup group, int language, Shape shape);
  void check_language(LanguageId lang) const;
  Tensor apply_adapters(const Tensor& x, const PackedBatch& batch, bool encoder,
                        int layer) const;
  Tensor ffn(const Tensor& x, const Tensor& w1, const Tensor& w2) const;

  ModelConfig cfg_;
  Variant variant_;
  std::vector<Param> params_;
  Tensor token_emb_, enc_pos_, dec_pos_, dec_ln_final_;
  std::vector<EncoderLayer> enc_;
  std::vector<DecoderLayer> dec_;
  std::vector<std::vector<AdapterUnit>> adapters_;  // [bank][layer]
  std::optional<LanguageId> override_;
  bool adapters_enabled_ = true;
};

}  // namespace mmt
