// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

// mmt5: data generation, training, evaluation and sweeps for the modular
// seq2seq model. Run `mmt5 --help` or `mmt5 <command> --help`.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "mmt/checkpoint.hpp"
#include "mmt/corpus_io.hpp"
#include "mmt/error.hpp"
#include "mmt/experiments.hpp"
#include "mmt/kernels.hpp"

namespace {

struct CommonOpts {
  std::string config;
  std::string checkpoint;
  std::string out;
  std::string data;
  std::string metrics;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> freeze;
  std::optional<std::string> variant;
};

mmt::RunConfig apply_overrides(mmt::RunConfig cfg, const CommonOpts& o) {
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.freeze) cfg.experiment.freeze = *o.freeze;
  if (o.variant) {
    auto v = mmt::parse_variant(*o.variant);
    if (!v) throw mmt::ConfigError("--variant must be 'modular' or 'dense'");
    cfg.experiment.variant = *v;
  }
  cfg.derive();
  cfg.validate();
  return cfg;
}

mmt::RunConfig requested_config(const CommonOpts& o) {
  return apply_overrides(o.config.empty() ? mmt::RunConfig{} : mmt::RunConfig::load(o.config), o);
}

// A checkpoint command without --config runs with the checkpoint's own
// config (plus flag overrides).
mmt::LoadedCheckpoint open_checkpoint(const CommonOpts& o, mmt::RunConfig& cfg) {
  if (o.config.empty()) {
    mmt::LoadedCheckpoint ck = mmt::load_checkpoint(o.checkpoint);
    cfg = apply_overrides(ck.config, o);
    mmt::check_compatible(ck.config, cfg);
    return ck;
  }
  cfg = requested_config(o);
  return mmt::load_checkpoint(o.checkpoint, cfg);
}

mmt::World open_world(const mmt::RunConfig& cfg, const CommonOpts& o) {
  return o.data.empty() ? mmt::World::make(cfg) : mmt::World::load(cfg, o.data);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw mmt::IoError("cannot write " + path);
  return out;
}

void write_metrics_file(const std::string& path, const mmt::MetricsHistory& h) {
  auto out = open_out(path);
  mmt::write_metrics(out, h);
}

std::string metrics_path(const CommonOpts& o) { return o.metrics.empty() ? o.out + ".metrics.tsv" : o.metrics; }

// Writes to --out when given, otherwise stdout.
template <typename F>
void emit(const CommonOpts& o, F&& write) {
  if (o.out.empty()) {
    write(std::cout);
  } else {
    auto out = open_out(o.out);
    write(out);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Modular multilingual seq2seq toolkit"};
  app.require_subcommand(1);
  CommonOpts o;

  auto add_common = [&](CLI::App* c, bool needs_ckpt, bool out_required) {
    c->add_option("--config", o.config, "Run config file (key = value with [sections])")->check(CLI::ExistingFile);
    if (needs_ckpt) c->add_option("--checkpoint", o.checkpoint, "Input checkpoint")->required()->check(CLI::ExistingFile);
    auto* out = c->add_option("--out", o.out, "Output path");
    if (out_required) out->required();
    c->add_option("--data", o.data, "Corpus directory from generate-data (default: generate in memory)")
        ->check(CLI::ExistingDirectory);
    c->add_option("--seed", o.seed, "Override train.seed (model init and batch order)");
    c->add_option("--freeze", o.freeze, "Freeze config: none or s1..s14");
    c->add_option("--variant", o.variant, "modular or dense")->check(CLI::IsMember({"modular", "dense"}));
  };

  auto* gen = app.add_subcommand("generate-data", "Write the synthetic corpus to a directory");
  add_common(gen, false, true);

  auto* pre = app.add_subcommand("pretrain", "Span-corruption pretraining; writes a checkpoint");
  add_common(pre, false, true);
  pre->add_option("--metrics", o.metrics, "Metrics log path (default: <out>.metrics.tsv)");

  auto* fin = app.add_subcommand("finetune", "Fine-tune a checkpoint on the source languages");
  add_common(fin, true, true);
  fin->add_option("--metrics", o.metrics, "Metrics log path (default: <out>.metrics.tsv)");

  auto* ev = app.add_subcommand("evaluate", "Per-language task evaluation report");
  add_common(ev, true, false);

  auto* sf = app.add_subcommand("sweep-freeze", "Fine-tune a pretrained checkpoint under s1..s14");
  add_common(sf, true, false);

  auto* sb = app.add_subcommand("sweep-bottleneck", "Pretrain+fine-tune at bottlenecks d/8, d/4, d/2, d");
  add_common(sb, false, false);

  auto* sm = app.add_subcommand("sweep-modules", "Route reserved-language inputs through every module");
  add_common(sm, true, false);

  CLI11_PARSE(app, argc, argv);

  try {
    std::fprintf(stderr, "kernels: %s\n", std::string(mmt::kernels::active().name).c_str());
    if (*gen) {
      const mmt::RunConfig cfg = requested_config(o);
      const mmt::Corpus corpus = mmt::generate_corpus(cfg.data);
      mmt::write_corpus(o.out, corpus, cfg.data.layout(), cfg.data.n_languages);
      auto out = open_out((std::filesystem::path(o.out) / "config.txt").string());
      out << cfg.to_text();
    } else if (*pre) {
      const mmt::RunConfig cfg = requested_config(o);
      const mmt::World world = open_world(cfg, o);
      mmt::Model model = mmt::build_model(cfg);
      const mmt::MetricsHistory h = mmt::run_pretrain(model, world);
      mmt::save_checkpoint(o.out, model, cfg);
      write_metrics_file(metrics_path(o), h);
    } else if (*fin) {
      mmt::RunConfig cfg;
      mmt::LoadedCheckpoint ck = open_checkpoint(o, cfg);
      const mmt::World world = open_world(cfg, o);
      const mmt::FreezeConfig fc = mmt::config_from_name(cfg.experiment.freeze);
      const mmt::ParamSnapshot before = mmt::snapshot(ck.model);
      const mmt::TrainMask mask = mmt::build_mask(ck.model, fc, mmt::Phase::Finetune);
      const mmt::MetricsHistory h = mmt::run_finetune(ck.model, world, fc);
      const mmt::FreezeReport rep = mmt::verify_frozen(ck.model, before, mmt::snapshot(ck.model), mask);
      if (!rep.ok()) {
        for (const auto& v : rep.violations) std::fprintf(stderr, "frozen parameter changed: %s\n", v.c_str());
        return 3;
      }
      mmt::save_checkpoint(o.out, ck.model, cfg);
      write_metrics_file(metrics_path(o), h);
    } else if (*ev) {
      mmt::RunConfig cfg;
      mmt::LoadedCheckpoint ck = open_checkpoint(o, cfg);
      const mmt::World world = open_world(cfg, o);
      const auto rows = mmt::run_evaluate(ck.model, world);
      emit(o, [&](std::ostream& os) { mmt::write_eval_report(os, rows, cfg.data.layout().n_slices); });
    } else if (*sf) {
      mmt::RunConfig cfg;
      mmt::LoadedCheckpoint ck = open_checkpoint(o, cfg);
      const mmt::World world = open_world(cfg, o);
      const auto rows = mmt::sweep_freeze(ck.model, world);
      emit(o, [&](std::ostream& os) { mmt::write_freeze_sweep(os, rows); });
    } else if (*sb) {
      const mmt::RunConfig cfg = requested_config(o);
      const mmt::World world = open_world(cfg, o);
      const auto rows = mmt::sweep_bottleneck(world);
      emit(o, [&](std::ostream& os) { mmt::write_bottleneck_sweep(os, rows); });
    } else if (*sm) {
      mmt::RunConfig cfg;
      mmt::LoadedCheckpoint ck = open_checkpoint(o, cfg);
      const mmt::World world = open_world(cfg, o);
      const auto reports = mmt::sweep_modules(ck.model, world);
      emit(o, [&](std::ostream& os) {
        for (std::size_t i = 0; i < reports.size(); ++i) {
          os << "reserved language " << cfg.data.n_languages + static_cast<int>(i) << "\n";
          mmt::write_sweep_report(os, reports[i]);
        }
      });
    }
  } catch (const mmt::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
