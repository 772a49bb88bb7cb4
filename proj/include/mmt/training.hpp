// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmt/freezing.hpp"
#include "mmt/model.hpp"
#include "mmt/synth_data.hpp"

namespace mmt {

struct TrainConfig {
  double lr = 1e-3;
  int warmup_steps = 50;
  int steps = 2000;
  int batch_size = 16;
  std::uint64_t seed = 1;
  int eval_every = 250;  // 0: evaluate only before and after training
  std::vector<LanguageId> languages;  // fine-tuning source languages

  void validate(bool finetune) const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct OptimState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;

  static OptimState for_params(std::span<const Tensor> params);
  static OptimState for_model(const Model& model);
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

/// One bias-corrected Adam step. Parameters with trainable[i] == false are
/// not read or written, and neither are their moments. Missing gradients
/// count as zero.
void adam_step(std::span<Tensor> params, OptimState& state, const TrainMask& trainable, double lr);

std::vector<Tensor> param_tensors(const Model& model);

struct MetricRecord {
  std::int64_t step = 0;
  Phase phase = Phase::Pretrain;
  int language = -1;  // -1: aggregate over languages
  std::string metric;
  double value = 0.0;

  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

struct MetricsHistory {
  std::vector<MetricRecord> records;
  /// Fine-tuning: step whose parameters were kept (lowest dev loss).
  std::int64_t selected_step = -1;

  /// Values of `metric` for `language` at `step`, if recorded.
  std::optional<double> find(std::int64_t step, int language, std::string_view metric) const;
  std::int64_t last_step() const;
};

std::string_view phase_name(Phase p);

/// One tab-separated line per record: step, phase, language, metric, value.
/// Values are printed with 17 significant digits so logs are byte-stable.
void write_metrics(std::ostream& os, const MetricsHistory& history);

/// Sum of token cross-entropies and number of scored tokens under teacher
/// forcing.
struct NllSum {
  double total = 0.0;
  std::size_t tokens = 0;
};
NllSum teacher_forced_nll(const Model& model, std::span<const Example> examples,
                          const VocabLayout& layout);

/// exp(mean token cross-entropy) over `lang`'s examples in `heldout`.
double perplexity(const Model& model, std::span<const Example> heldout, LanguageId lang,
                  const VocabLayout& layout);

/// Joint pretraining of shared parameters and modules with round-robin
/// language mixing inside each batch.
MetricsHistory pretrain(Model& model, std::span<const Example> train,
                        std::span<const Example> heldout, const VocabLayout& layout,
                        int n_trained_languages, const TrainConfig& cfg);

/// Fine-tuning on cfg.languages under `freeze`. Modules stay frozen. The
/// parameters at the eval point with the lowest mean source-language dev
/// loss are restored before returning.
MetricsHistory finetune(Model& model, std::span<const Example> task_train,
                        std::span<const Example> task_dev, const VocabLayout& layout,
                        const FreezeConfig& freeze, const TrainConfig& cfg);

}  // namespace mmt
