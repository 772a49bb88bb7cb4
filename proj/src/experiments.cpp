// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmt/experiments.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "mmt/corpus_io.hpp"
#include "mmt/error.hpp"

namespace mmt {

World World::make(const RunConfig& cfg) {
  cfg.validate();
  return World{cfg, make_languages(cfg.data), generate_corpus(cfg.data)};
}

World World::load(const RunConfig& cfg, const std::filesystem::path& dir) {
  cfg.validate();
  return World{cfg, make_languages(cfg.data), read_corpus(dir, cfg.data.layout(), cfg.data.n_languages)};
}

Model build_model(const RunConfig& cfg) {
  return Model(cfg.model, cfg.experiment.variant, mix_seed(cfg.train.seed, 0x30de1));
}

MetricsHistory run_pretrain(Model& model, const World& world) {
  return pretrain(model, world.corpus.pretrain, world.corpus.pretrain_heldout, world.cfg.data.layout(),
                  world.cfg.data.n_languages, world.cfg.pretrain_config());
}

MetricsHistory run_finetune(Model& model, const World& world, const FreezeConfig& freeze) {
  return finetune(model, world.corpus.task_train, world.corpus.task_dev, world.cfg.data.layout(), freeze,
                  world.cfg.finetune_config());
}

namespace {

bool is_source(const World& w, LanguageId l) {
  const auto& s = w.cfg.experiment.source_languages;
  return std::find(s.begin(), s.end(), l) != s.end();
}

}  // namespace

std::vector<EvalRow> run_evaluate(Model& model, const World& world) {
  std::vector<EvalRow> rows;
  for (LanguageId l : world.cfg.resolved_eval_languages()) {
    const std::vector<Example> test = filter_language(world.corpus.task_test, l);
    rows.push_back({l, !is_source(world, l), task_eval(model, test, l, world.langs)});
  }
  return rows;
}

ZeroShotSummary summarize(const std::vector<EvalRow>& rows, const World& world) {
  ZeroShotSummary s;
  int n_zero = 0;
  int n_src = 0;
  for (const EvalRow& r : rows) {
    if (r.lang.index >= world.cfg.data.n_languages) continue;
    if (r.zero_shot) {
      s.exact_match += r.metrics.exact_match;
      s.meaning += r.metrics.meaning;
      s.target_rate += r.metrics.target_rate;
      ++n_zero;
    } else {
      s.source_exact_match += r.metrics.exact_match;
      s.source_target_rate += r.metrics.target_rate;
      ++n_src;
    }
  }
  if (n_zero > 0) {
    s.exact_match /= n_zero;
    s.meaning /= n_zero;
    s.target_rate /= n_zero;
  }
  if (n_src > 0) {
    s.source_exact_match /= n_src;
    s.source_target_rate /= n_src;
  }
  return s;
}

std::vector<FreezeSweepRow> sweep_freeze(const Model& pretrained, const World& world) {
  std::vector<FreezeSweepRow> rows;
  for (const FreezeConfig& fc : freeze_table()) {
    Model m = pretrained.clone();
    const ParamSnapshot before = snapshot(m);
    const TrainMask mask = build_mask(m, fc, Phase::Finetune);
    run_finetune(m, world, fc);
    const FreezeReport report = verify_frozen(m, before, snapshot(m), mask);
    rows.push_back({fc.name, summarize(run_evaluate(m, world), world), report.violations.size()});
  }
  return rows;
}

void write_freeze_sweep(std::ostream& os, const std::vector<FreezeSweepRow>& rows) {
  char line[160];
  for (const FreezeSweepRow& r : rows) {
    std::snprintf(line, sizeof line, "freeze\t%s\t%.17g\t%.17g\t%.17g\t%.17g\t%zu\n", r.config.c_str(),
                  r.summary.source_exact_match, r.summary.exact_match, r.summary.meaning,
                  r.summary.target_rate, r.violations);
    os << line;
  }
  os << "\nconfig  frozen groups                               src-EM  zs-EM  zs-meaning  zs-target-rate\n";
  for (const FreezeSweepRow& r : rows) {
    std::string groups;
    for (ParamGroup g : config_from_name(r.config).frozen_groups) {
      groups += (groups.empty() ? "" : ",") + std::string(group_name(g));
    }
    if (groups.empty()) groups = "-";
    std::snprintf(line, sizeof line, "%-6s  %-42s  %6.3f  %5.3f  %10.3f  %14.3f\n", r.config.c_str(),
                  groups.c_str(), r.summary.source_exact_match, r.summary.exact_match, r.summary.meaning,
                  r.summary.target_rate);
    os << line;
  }
}

std::vector<BottleneckSweepRow> sweep_bottleneck(const World& world) {
  std::vector<BottleneckSweepRow> rows;
  const int d = world.cfg.model.d_model;
  for (int div : {8, 4, 2, 1}) {
    World w = world;
    w.cfg.model.d_bottleneck = std::max(1, d / div);
    w.cfg.validate();
    Model m = build_model(w.cfg);
    const MetricsHistory h = run_pretrain(m, w);
    const double ppl = h.find(h.last_step(), -1, "heldout_ppl").value_or(0.0);
    run_finetune(m, w, config_from_name(w.cfg.experiment.freeze));
    rows.push_back({w.cfg.model.d_bottleneck, 1.0 / div, ppl, summarize(run_evaluate(m, w), w)});
  }
  return rows;
}

void write_bottleneck_sweep(std::ostream& os, const std::vector<BottleneckSweepRow>& rows) {
  char line[160];
  double lo = 1.0, hi = 0.0;
  for (const BottleneckSweepRow& r : rows) {
    std::snprintf(line, sizeof line, "bottleneck\t%d\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\n", r.d_bottleneck,
                  r.ratio, r.heldout_ppl, r.summary.source_exact_match, r.summary.meaning,
                  r.summary.target_rate);
    os << line;
    lo = std::min(lo, r.summary.meaning);
    hi = std::max(hi, r.summary.meaning);
  }
  std::snprintf(line, sizeof line, "spread\tzero_shot_meaning\t%.17g\n", rows.empty() ? 0.0 : hi - lo);
  os << line;
  os << "\nbottleneck  ratio   heldout-ppl  src-EM  zs-meaning  zs-target-rate\n";
  for (const BottleneckSweepRow& r : rows) {
    std::snprintf(line, sizeof line, "%10d  %5.3f  %12.4f  %6.3f  %10.3f  %14.3f\n", r.d_bottleneck, r.ratio,
                  r.heldout_ppl, r.summary.source_exact_match, r.summary.meaning, r.summary.target_rate);
    os << line;
  }
}

std::vector<SweepReport> sweep_modules(Model& model, const World& world) {
  std::vector<SweepReport> out;
  const int n = world.cfg.data.n_languages;
  for (int l = n; l < world.cfg.data.layout().n_slices; ++l) {
    const std::vector<Example> test = filter_language(world.corpus.task_test, LanguageId{l});
    if (test.empty()) throw ContractError("no test examples for reserved language " + std::to_string(l));
    out.push_back(module_sweep(model, test, n, world.langs));
  }
  return out;
}

}  // namespace mmt
