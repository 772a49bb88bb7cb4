// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mmt/eval.hpp"
#include "mmt/freezing.hpp"
#include "mmt/run_config.hpp"
#include "mmt/training.hpp"

namespace mmt {

/// Config plus the languages and corpus it generates.
struct World {
  RunConfig cfg;
  LanguageSet langs;
  Corpus corpus;

  static World make(const RunConfig& cfg);
  /// Same world with the corpus read from `dir` instead of generated.
  static World load(const RunConfig& cfg, const std::filesystem::path& dir);
};

/// Freshly initialized model of cfg.experiment.variant, seeded from
/// cfg.train.seed.
Model build_model(const RunConfig& cfg);

MetricsHistory run_pretrain(Model& model, const World& world);
MetricsHistory run_finetune(Model& model, const World& world, const FreezeConfig& freeze);

/// One row per evaluation language: decode the language's test split with
/// the model routed through that language's module.
std::vector<EvalRow> run_evaluate(Model& model, const World& world);

/// Mean of the metrics over the zero-shot trained languages (trained, not
/// a fine-tuning source).
struct ZeroShotSummary {
  double exact_match = 0.0;
  double meaning = 0.0;
  double target_rate = 0.0;
  double source_exact_match = 0.0;  // mean over source languages
  double source_target_rate = 0.0;
};
ZeroShotSummary summarize(const std::vector<EvalRow>& rows, const World& world);

struct FreezeSweepRow {
  std::string config;
  ZeroShotSummary summary;
  std::size_t violations = 0;
};
/// Fine-tunes a copy of `pretrained` under each of s1..s14.
std::vector<FreezeSweepRow> sweep_freeze(const Model& pretrained, const World& world);
void write_freeze_sweep(std::ostream& os, const std::vector<FreezeSweepRow>& rows);

struct BottleneckSweepRow {
  int d_bottleneck = 0;
  double ratio = 0.0;
  double heldout_ppl = 0.0;  // mean over trained languages, final step
  ZeroShotSummary summary;
};
/// Pretrains, fine-tunes and evaluates at d_bottleneck = d/8, d/4, d/2, d.
std::vector<BottleneckSweepRow> sweep_bottleneck(const World& world);
void write_bottleneck_sweep(std::ostream& os, const std::vector<BottleneckSweepRow>& rows);

/// module_sweep over the trained modules for every reserved language.
std::vector<SweepReport> sweep_modules(Model& model, const World& world);

}  // namespace mmt
