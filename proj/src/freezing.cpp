// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmt/freezing.hpp"

#include <cstring>

#include "mmt/error.hpp"

namespace mmt {

namespace {

using G = ParamGroup;

std::vector<FreezeConfig> make_table() {
  // Columns of the freezing table: Emb, Enc_LN, Dec_LN, Dec_Att,
  // Dec_CrossAtt, Dec_FFN. Encoder attention and FFN are always trained.
  return {
      {"s1", {}},
      {"s2", {G::EncLN, G::DecLN}},
      {"s3", {G::Emb}},
      {"s4", {G::Emb, G::EncLN, G::DecLN}},
      {"s5", {G::Emb, G::DecLN, G::DecAtt, G::DecCrossAtt, G::DecFFN}},
      {"s6", {G::Emb, G::DecLN, G::DecCrossAtt, G::DecFFN}},
      {"s7", {G::Emb, G::DecLN, G::DecFFN}},
      {"s8", {G::EncLN, G::DecLN, G::DecCrossAtt, G::DecFFN}},
      {"s9", {G::EncLN, G::DecLN, G::DecFFN}},
      {"s10", {G::Emb, G::EncLN, G::DecLN, G::DecCrossAtt, G::DecFFN}},
      {"s11", {G::DecLN, G::DecCrossAtt, G::DecFFN}},
      {"s12", {G::DecLN, G::DecAtt, G::DecFFN}},
      {"s13", {G::DecLN, G::DecFFN}},
      {"s14", {G::Emb, G::EncLN, G::DecLN, G::DecFFN}},
  };
}

}  // namespace

const std::vector<FreezeConfig>& freeze_table() {
  static const std::vector<FreezeConfig> table = make_table();
  return table;
}

FreezeConfig config_from_name(std::string_view name) {
  if (name == "none") return {"none", {}};
  for (const FreezeConfig& c : freeze_table()) {
    if (c.name == name) return c;
  }
  std::string valid = "none";
  for (const FreezeConfig& c : freeze_table()) valid += ", " + c.name;
  throw ConfigError("unknown freeze configuration '" + std::string(name) + "'; valid: " + valid);
}

TrainMask build_mask(const Model& model, const FreezeConfig& cfg, Phase phase) {
  for (ParamGroup g : cfg.frozen_groups) {
    if (g == G::EncAtt || g == G::EncFFN || is_module_group(g)) {
      throw ConfigError("freeze configuration '" + cfg.name + "' lists non-freezable group " +
                        std::string(group_name(g)));
    }
  }
  const auto& params = model.params();
  TrainMask mask(params.size(), false);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto g = static_cast<int>(params[i].group);
    if (g < 0 || g >= kNumParamGroups) {
      throw IntegrityError("parameter '" + params[i].name + "' carries no valid group label");
    }
    if (phase == Phase::Pretrain) {
      mask[i] = true;
    } else {
      mask[i] = !is_module_group(params[i].group) && !cfg.frozen_groups.contains(params[i].group);
    }
  }
  return mask;
}

ParamSnapshot snapshot(const Model& model) {
  ParamSnapshot s;
  s.reserve(model.params().size());
  for (const Param& p : model.params()) s.emplace_back(p.value.data().begin(), p.value.data().end());
  return s;
}

FreezeReport verify_frozen(const Model& model, const ParamSnapshot& before,
                           const ParamSnapshot& after, const TrainMask& mask,
                           bool expect_updates) {
  const auto& params = model.params();
  if (before.size() != params.size() || after.size() != params.size() ||
      mask.size() != params.size()) {
    throw IntegrityError("verify_frozen: snapshots cover different parameter sets");
  }
  FreezeReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (before[i].size() != after[i].size()) {
      throw IntegrityError("verify_frozen: size mismatch for '" + params[i].name + "'");
    }
    const bool same = before[i].empty() ||
                      std::memcmp(before[i].data(), after[i].data(),
                                  before[i].size() * sizeof(double)) == 0;
    if (!mask[i] && !same) report.violations.push_back(params[i].name);
    if (mask[i] && same && expect_updates) report.stale.push_back(params[i].name);
  }
  return report;
}

}  // namespace mmt
