// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mmt/model.hpp"

namespace mmt {

/// Named subset of the freezable shared groups
/// {Emb, Enc_LN, Dec_LN, Dec_Att, Dec_CrossAtt, Dec_FFN}.
struct FreezeConfig {
  std::string name;
  std::set<ParamGroup> frozen_groups;

  friend bool operator==(const FreezeConfig&, const FreezeConfig&) = default;
};

enum class Phase { Pretrain, Finetune };

/// "none" or s1..s14. Throws ConfigError listing valid names otherwise.
FreezeConfig config_from_name(std::string_view name);

/// The fourteen table configurations in order s1..s14.
const std::vector<FreezeConfig>& freeze_table();

/// trainable[i] refers to model.params()[i].
using TrainMask = std::vector<bool>;

/// Pretrain: every parameter. Finetune: shared parameters outside the
/// frozen groups; adapter modules are always frozen.
TrainMask build_mask(const Model& model, const FreezeConfig& cfg, Phase phase);

using ParamSnapshot = std::vector<std::vector<double>>;

ParamSnapshot snapshot(const Model& model);

struct FreezeReport {
  std::vector<std::string> violations;  // frozen parameters that changed
  std::vector<std::string> stale;       // trainable parameters that did not change
  bool ok() const { return violations.empty(); }
};

/// Compares two snapshots bit-exactly under `mask`. `stale` is only
/// populated when `expect_updates` is set (at least one step with a
/// nonzero gradient happened between the snapshots).
FreezeReport verify_frozen(const Model& model, const ParamSnapshot& before,
                           const ParamSnapshot& after, const TrainMask& mask,
                           bool expect_updates = false);

}  // namespace mmt
