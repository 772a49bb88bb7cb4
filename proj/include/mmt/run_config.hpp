// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mmt/model.hpp"
#include "mmt/synth_data.hpp"
#include "mmt/training.hpp"

namespace mmt {

struct TrainSettings {
  double lr = 1e-3;
  int warmup_steps = 50;
  int pretrain_steps = 2000;
  int finetune_steps = 1000;
  int batch_size = 16;
  std::uint64_t seed = 1;
  int eval_every = 250;
  int finetune_eval_every = 100;

  friend bool operator==(const TrainSettings&, const TrainSettings&) = default;
};

struct ExperimentSettings {
  std::string freeze = "s7";
  std::vector<LanguageId> source_languages{LanguageId{0}};
  std::vector<LanguageId> eval_languages;  // empty: every slot
  Variant variant = Variant::Modular;

  friend bool operator==(const ExperimentSettings&, const ExperimentSettings&) = default;
};

/// Everything needed to reproduce a run. The model's language count,
/// vocabulary size, maximum length and slice size are derived from the
/// data section.
struct RunConfig {
  ModelConfig model;
  DataConfig data;
  TrainSettings train;
  ExperimentSettings experiment;

  RunConfig();
  /// Recomputes the derived model fields from the data section.
  void derive();
  /// Throws ConfigError naming the offending key.
  void validate() const;

  TrainConfig pretrain_config() const;
  TrainConfig finetune_config() const;
  std::vector<LanguageId> resolved_eval_languages() const;

  /// Canonical text form; parse(to_text()) reproduces the config exactly.
  std::string to_text() const;
  /// Keys absent from `text` keep their defaults. `origin` prefixes
  /// error messages.
  static RunConfig parse(std::string_view text, std::string_view origin = "config");
  static RunConfig load(const std::filesystem::path& path);

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Throws FormatError (prefix "incompatible checkpoint") when a checkpoint
/// config cannot serve the requested one: variant, language count or any
/// shape-determining field differs.
void check_compatible(const RunConfig& checkpoint, const RunConfig& requested);

}  // namespace mmt
