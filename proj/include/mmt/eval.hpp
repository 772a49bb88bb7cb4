// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmt/model.hpp"
#include "mmt/synth_data.hpp"

namespace mmt {

/// Next-token logits given the decoder prefix (BOS first).
using StepScorer = std::function<std::vector<double>(std::span<const TokenId> prefix)>;

/// Greedy decoding from BOS. Stops at EOS (not emitted) or after max_len
/// tokens. Ties go to the lowest token id.
TokenSeq greedy_decode(const StepScorer& scorer, TokenId bos, TokenId eos, int max_len);

/// Greedy decoding through the model. Output length is capped at
/// min(max_len, model max_len).
TokenSeq greedy_decode(const Model& model, std::span<const TokenId> input, LanguageId lang,
                       int max_len, const VocabLayout& layout);

/// Batched greedy decoding; the encoder runs once per batch. Identical
/// results to calling the single-example overload in a loop.
std::vector<TokenSeq> greedy_decode_batch(const Model& model,
                                          std::span<const std::span<const TokenId>> inputs,
                                          std::span<const LanguageId> langs, int max_len,
                                          const VocabLayout& layout);

struct DecodeResult {
  TokenSeq output;
  std::optional<LidResult> detected;  // nullopt: no content tokens
  double meaning = 0.0;
  bool exact = false;
};

/// Scores one output against an example's reference target.
DecodeResult score_output(TokenSeq output, const Example& ex, const LanguageSet& langs);

/// Fraction of results whose detected language is `target`. Throws
/// Undetermined on an empty list.
double target_language_rate(std::span<const DecodeResult> results, LanguageId target);

struct TaskMetrics {
  std::size_t n = 0;
  double exact_match = 0.0;
  double meaning = 0.0;
  double target_rate = 0.0;
  /// detected_counts[l]: outputs detected as language l; the last entry
  /// counts outputs without content tokens.
  std::vector<std::size_t> detected_counts;
};

TaskMetrics aggregate(std::span<const DecodeResult> results, LanguageId target,
                      const VocabLayout& layout);

using ExampleDecoder = std::function<TokenSeq(const Example&)>;

/// Decodes every example with `decode` and aggregates against `target`.
TaskMetrics task_eval(const ExampleDecoder& decode, std::span<const Example> examples,
                      LanguageId target, const LanguageSet& langs);

/// Routes the model through `inference_lang`, decodes every example and
/// restores the previous routing. The target language for the rate is the
/// examples' own language. Throws Undetermined on an empty list and
/// ContractError if the examples mix languages.
TaskMetrics task_eval(Model& model, std::span<const Example> examples, LanguageId inference_lang,
                      const LanguageSet& langs, std::vector<DecodeResult>* results = nullptr);

struct SweepEntry {
  LanguageId module;
  TaskMetrics metrics;
  double score = 0.0;
};

struct SweepReport {
  std::vector<SweepEntry> entries;  // candidate order
  std::vector<int> ranking;         // module ids, best first
};

/// Evaluates `examples` routed through every candidate module in
/// [0, n_candidates). Ranked by meaning accuracy, then exact match, ties to
/// the lower id.
SweepReport module_sweep(Model& model, std::span<const Example> examples, int n_candidates,
                         const LanguageSet& langs);

struct EvalRow {
  LanguageId lang;
  bool zero_shot = true;
  TaskMetrics metrics;
};

/// Machine lines ("eval\t<lang>\t<zero_shot>\t<em>\t<meaning>\t<rate>\t<counts>")
/// followed by a human table of languages x metrics and detected languages.
void write_eval_report(std::ostream& os, std::span<const EvalRow> rows, int n_slices);

void write_sweep_report(std::ostream& os, const SweepReport& report);

}  // namespace mmt
