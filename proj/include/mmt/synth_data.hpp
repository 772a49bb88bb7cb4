// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mmt/rng.hpp"
#include "mmt/types.hpp"

// Toy multilingual world. A single bigram chain over [0, V_b) generates
// language-neutral "pivot" sentences; language l renders pivot token t as
// l*V_b + perm_l(t). Slices are disjoint, so language identity is exact.
//
// Vocabulary layout, low to high:
//   [0, n_slices*V_b)  language slices
//   PAD, BOS, EOS
//   sentinels S_0 .. S_{n_sentinels-1}

namespace mmt {

struct VocabLayout {
  int n_slices = 5;  // trained languages plus reserved slots
  int base_vocab = 64;
  int n_sentinels = 8;

  TokenId pad() const { return n_slices * base_vocab; }
  TokenId bos() const { return pad() + 1; }
  TokenId eos() const { return pad() + 2; }
  TokenId sentinel(int i) const { return pad() + 3 + i; }
  int vocab_size() const { return n_slices * base_vocab + 3 + n_sentinels; }

  bool is_content(TokenId t) const { return t >= 0 && t < pad(); }
  bool is_sentinel(TokenId t) const { return t >= sentinel(0) && t < vocab_size(); }
  /// Slice owning a content token.
  std::optional<LanguageId> slice_of(TokenId t) const;

  void validate() const;
  friend bool operator==(const VocabLayout&, const VocabLayout&) = default;
};

class SyntheticLanguage {
 public:
  SyntheticLanguage(LanguageId id, std::vector<TokenId> permutation);

  LanguageId id() const { return id_; }
  int base_vocab() const { return static_cast<int>(perm_.size()); }
  TokenId offset() const { return id_.index * base_vocab(); }
  const std::vector<TokenId>& permutation() const { return perm_; }

  /// Throws IndexError for pivot tokens outside [0, V_b).
  TokenSeq render(std::span<const TokenId> pivot) const;
  /// Inverse of render; throws IndexError for tokens outside this slice.
  TokenSeq derender(std::span<const TokenId> tokens) const;
  /// Pivot value of one token, or nullopt if it is not in this slice.
  std::optional<TokenId> derender_one(TokenId t) const;

 private:
  LanguageId id_;
  std::vector<TokenId> perm_;
  std::vector<TokenId> inverse_;
};

/// All languages of one corpus. Languages [0, n_trained) are pretrained;
/// the remaining slots are reserved (never seen in pretraining).
struct LanguageSet {
  VocabLayout layout;
  int n_trained = 4;
  std::vector<SyntheticLanguage> languages;

  /// Seeded permutations per slot. Every language keeps a shared base
  /// permutation on a random cognate_rate fraction of pivots and shuffles
  /// the rest among their own surface forms; cognate_rate = 0 gives
  /// independent permutations. If `related_to` is set, every reserved slot
  /// copies that trained language's permutation (planted relatedness).
  static LanguageSet make(const VocabLayout& layout, int n_trained, std::uint64_t lexicon_seed,
                          std::optional<int> related_to, double cognate_rate = 0.0);

  const SyntheticLanguage& at(LanguageId id) const;
};

/// Fixed first-order chain: each token has `branching` successors with
/// seeded Dirichlet(1) weights; sentences start uniformly.
class BigramChain {
 public:
  static BigramChain from_seed(std::uint64_t grammar_seed, int base_vocab, int branching);

  int base_vocab() const { return static_cast<int>(succ_.size()); }
  /// Transition probability P(next = b | prev = a).
  double prob(TokenId a, TokenId b) const;
  TokenId next(TokenId prev, Rng& rng) const;

 private:
  std::vector<std::vector<std::pair<TokenId, double>>> succ_;
};

/// Pivot sentence of uniform length in [8, max_len - 4].
TokenSeq gen_pivot(const BigramChain& chain, int max_len, Rng& rng);

struct SpanCorruption {
  TokenSeq input;   // originals with each noise span replaced by one sentinel
  TokenSeq target;  // S_0 span_0 S_1 span_1 ... EOS
  std::size_t noise_tokens = 0;
};

/// T5-style span corruption. round(L*density) noise tokens split into
/// max(1, round(noise/mean_span)) spans; inputs start with a kept span.
/// Returns nullopt (skip this example) for sequences shorter than 4.
std::optional<SpanCorruption> span_corrupt(std::span<const TokenId> tokens, double noise_density,
                                           double mean_span_len, const VocabLayout& layout,
                                           Rng& rng);

/// Re-inserts target spans at their sentinels.
TokenSeq splice(std::span<const TokenId> input, std::span<const TokenId> target,
                const VocabLayout& layout);

struct Example {
  LanguageId lang;
  TokenSeq input;
  TokenSeq target;  // always ends with EOS

  friend bool operator==(const Example&, const Example&) = default;
};

/// Target tokens without the trailing EOS.
std::span<const TokenId> target_content(const Example& ex, const VocabLayout& layout);

/// Extraction task: the target keeps the even positions of the input.
Example gen_task(const SyntheticLanguage& lang, const BigramChain& chain, const VocabLayout& layout,
                 int max_len, Rng& rng);

struct LidResult {
  LanguageId lang;
  double confidence = 0.0;
};

/// Majority slice over content tokens; ties go to the lowest id.
/// nullopt when the sequence has no content tokens.
std::optional<LidResult> lid(std::span<const TokenId> tokens, const VocabLayout& layout);

/// Position-wise agreement after mapping each sequence back to pivot space
/// through its own detected language. Denominator is the longer length.
/// Throws Undetermined when either language cannot be detected.
double meaning_match(std::span<const TokenId> output, std::span<const TokenId> reference,
                     const LanguageSet& langs);

struct DataConfig {
  int n_languages = 4;  // trained languages
  int n_reserved = 1;
  int base_vocab = 64;
  int n_sentinels = 8;
  int max_len = 24;
  int branching = 4;
  std::optional<int> related_to = 0;
  std::uint64_t grammar_seed = 11;
  std::uint64_t lexicon_seed = 12;
  std::uint64_t sample_seed = 13;
  int pretrain_per_lang = 2000;
  int heldout_per_lang = 64;
  int task_train_per_lang = 1000;
  int task_dev_per_lang = 64;
  int task_test_per_lang = 100;
  double noise_density = 0.15;
  double mean_span = 3.0;
  double cognate_rate = 0.9;

  VocabLayout layout() const { return {n_languages + n_reserved, base_vocab, n_sentinels}; }
  void validate() const;
  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct Corpus {
  std::vector<Example> pretrain;          // span corruption, trained languages
  std::vector<Example> pretrain_heldout;  // span corruption, trained languages
  std::vector<Example> task_train;        // extraction, trained languages
  std::vector<Example> task_dev;          // extraction, trained languages
  std::vector<Example> task_test;         // extraction, every slot incl. reserved

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

LanguageSet make_languages(const DataConfig& cfg);
BigramChain make_chain(const DataConfig& cfg);

/// Pure function of the config; each (split, language) uses its own
/// forked stream so shards can be produced independently.
Corpus generate_corpus(const DataConfig& cfg);

/// Examples of one language.
std::vector<Example> filter_language(const std::vector<Example>& xs, LanguageId lang);

}  // namespace mmt
