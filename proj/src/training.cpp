// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmt/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "mmt/error.hpp"
#include "mmt/kernels.hpp"
#include "mmt/rng.hpp"

namespace mmt {

void TrainConfig::validate(bool finetune) const {
  if (steps < 0) throw ConfigError("train: steps must be non-negative");
  if (batch_size <= 0) throw ConfigError("train: batch_size must be positive");
  if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
  if (warmup_steps < 0 || eval_every < 0) throw ConfigError("train: warmup/eval_every must be non-negative");
  if (finetune && languages.empty()) throw ConfigError("train: fine-tuning needs source languages");
}

OptimState OptimState::for_params(std::span<const Tensor> params) {
  OptimState s;
  for (const Tensor& p : params) {
    s.m.emplace_back(p.numel(), 0.0);
    s.v.emplace_back(p.numel(), 0.0);
  }
  return s;
}

OptimState OptimState::for_model(const Model& model) {
  return for_params(param_tensors(model));
}

std::vector<Tensor> param_tensors(const Model& model) {
  std::vector<Tensor> out;
  for (const Param& p : model.params()) out.push_back(p.value);
  return out;
}

void adam_step(std::span<Tensor> params, OptimState& state, const TrainMask& trainable, double lr) {
  if (state.m.size() != params.size() || trainable.size() != params.size()) {
    throw ContractError("adam_step: optimizer state / mask do not match the parameter list");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const kernels::AdamCoeffs c{lr, kAdamBeta1, kAdamBeta2, kAdamEps,
                              1.0 - std::pow(kAdamBeta1, t), 1.0 - std::pow(kAdamBeta2, t)};
  const auto& k = kernels::active();
  std::vector<double> zeros;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!trainable[i]) continue;
    Tensor& p = params[i];
    if (state.m[i].size() != p.numel()) throw ContractError("adam_step: moment shape mismatch");
    const double* g = nullptr;
    if (p.has_grad()) {
      g = p.grad().data();
    } else {
      zeros.assign(p.numel(), 0.0);
      g = zeros.data();
    }
    k.adam(p.mutable_data().data(), state.m[i].data(), state.v[i].data(), g, p.numel(), c);
  }
}

std::string_view phase_name(Phase p) { return p == Phase::Pretrain ? "pretrain" : "finetune"; }

std::optional<double> MetricsHistory::find(std::int64_t step, int language,
                                           std::string_view metric) const {
  for (const MetricRecord& r : records) {
    if (r.step == step && r.language == language && r.metric == metric) return r.value;
  }
  return std::nullopt;
}

std::int64_t MetricsHistory::last_step() const {
  return records.empty() ? -1 : records.back().step;
}

void write_metrics(std::ostream& os, const MetricsHistory& history) {
  char buf[64];
  for (const MetricRecord& r : history.records) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    os << r.step << '\t' << phase_name(r.phase) << '\t' << r.language << '\t' << r.metric << '\t'
       << buf << '\n';
  }
}

namespace {

struct TeacherBatch {
  PackedBatch packed;
  TokenSeq targets;  // aligned with packed target rows
};

TeacherBatch make_teacher_batch(std::span<const Example* const> exs, const VocabLayout& layout) {
  std::vector<TokenSeq> tgt_in(exs.size());
  std::vector<SequencePair> items;
  items.reserve(exs.size());
  for (std::size_t i = 0; i < exs.size(); ++i) {
    const Example& e = *exs[i];
    if (e.target.empty()) throw ContractError("teacher forcing: example without target");
    tgt_in[i].push_back(layout.bos());
    tgt_in[i].insert(tgt_in[i].end(), e.target.begin(), e.target.end() - 1);
    items.push_back({e.input, tgt_in[i], e.lang});
  }
  TeacherBatch b{pack_batch(items), {}};
  b.targets.assign(b.packed.tgt.size(), layout.pad());
  for (std::size_t i = 0; i < exs.size(); ++i) {
    const auto& span = b.packed.tgt_seqs[b.packed.order[i]];
    std::copy(exs[i]->target.begin(), exs[i]->target.end(),
              b.targets.begin() + static_cast<std::ptrdiff_t>(span.begin));
  }
  return b;
}

double lr_at(const TrainConfig& cfg, std::int64_t step) {
  if (cfg.warmup_steps <= 0) return cfg.lr;
  const double ramp = static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps);
  return cfg.lr * std::min(1.0, ramp);
}

// Per-language queues cycled round-robin; each queue reshuffles when drained.
class RoundRobinSampler {
 public:
  RoundRobinSampler(std::span<const Example> data, const std::vector<LanguageId>& langs,
                    std::uint64_t seed)
      : rng_(seed) {
    for (LanguageId l : langs) {
      Queue q;
      for (const Example& e : data) {
        if (e.lang == l) q.items.push_back(&e);
      }
      if (q.items.empty()) {
        throw ContractError("data coverage: no training examples for language " +
                            std::to_string(l.index));
      }
      queues_.push_back(std::move(q));
    }
    for (Queue& q : queues_) rng_.shuffle(q.items.begin(), q.items.end());
  }

  std::vector<const Example*> next_batch(int size) {
    std::vector<const Example*> out;
    for (int i = 0; i < size; ++i) {
      Queue& q = queues_[turn_];
      turn_ = (turn_ + 1) % queues_.size();
      if (q.cursor == q.items.size()) {
        rng_.shuffle(q.items.begin(), q.items.end());
        q.cursor = 0;
      }
      out.push_back(q.items[q.cursor++]);
    }
    return out;
  }

 private:
  struct Queue {
    std::vector<const Example*> items;
    std::size_t cursor = 0;
  };
  Rng rng_;
  std::vector<Queue> queues_;
  std::size_t turn_ = 0;
};

double train_step(Model& model, std::vector<Tensor>& params, OptimState& opt,
                  const TrainMask& mask, const std::vector<const Example*>& batch,
                  const VocabLayout& layout, double lr, std::int64_t step) {
  TeacherBatch tb = make_teacher_batch(batch, layout);
  Tape tape;
  double loss_value = 0.0;
  {
    TapeScope scope(tape);
    Tensor logits = model.forward_batch(tb.packed);
    Tensor loss = ops::cross_entropy(logits, tb.targets, layout.pad());
    loss_value = loss.item();
    if (!std::isfinite(loss_value)) {
      throw NumericError("non-finite training loss at step " + std::to_string(step) +
                         " (batch of " + std::to_string(batch.size()) + " examples, lr " +
                         std::to_string(lr) + ")");
    }
    tape.backward(loss);
  }
  adam_step(params, opt, mask, lr);
  for (Tensor& p : params) p.zero_grad();
  return loss_value;
}

std::vector<LanguageId> first_languages(int n) {
  std::vector<LanguageId> out;
  for (int l = 0; l < n; ++l) out.push_back(LanguageId{l});
  return out;
}

}  // namespace

NllSum teacher_forced_nll(const Model& model, std::span<const Example> examples,
                          const VocabLayout& layout) {
  constexpr std::size_t kChunk = 64;
  NllSum acc;
  std::vector<const Example*> ptrs;
  for (std::size_t begin = 0; begin < examples.size(); begin += kChunk) {
    ptrs.clear();
    for (std::size_t i = begin; i < std::min(examples.size(), begin + kChunk); ++i) {
      ptrs.push_back(&examples[i]);
    }
    TeacherBatch tb = make_teacher_batch(ptrs, layout);
    const std::size_t n = static_cast<std::size_t>(
        std::count_if(tb.targets.begin(), tb.targets.end(), [&](TokenId t) { return t != layout.pad(); }));
    const Tensor loss = ops::cross_entropy(model.forward_batch(tb.packed), tb.targets, layout.pad());
    acc.total += loss.item() * static_cast<double>(n);
    acc.tokens += n;
  }
  return acc;
}

double perplexity(const Model& model, std::span<const Example> heldout, LanguageId lang,
                  const VocabLayout& layout) {
  std::vector<Example> mine;
  for (const Example& e : heldout) {
    if (e.lang == lang) mine.push_back(e);
  }
  if (mine.empty()) {
    throw Undetermined("perplexity: no held-out examples for language " + std::to_string(lang.index));
  }
  const NllSum s = teacher_forced_nll(model, mine, layout);
  return std::exp(s.total / static_cast<double>(s.tokens));
}

MetricsHistory pretrain(Model& model, std::span<const Example> train,
                        std::span<const Example> heldout, const VocabLayout& layout,
                        int n_trained_languages, const TrainConfig& cfg) {
  cfg.validate(false);
  const std::vector<LanguageId> langs = first_languages(n_trained_languages);
  RoundRobinSampler sampler(train, langs, cfg.seed);
  std::map<int, std::vector<Example>> heldout_by_lang;
  for (LanguageId l : langs) {
    for (const Example& e : heldout) {
      if (e.lang == l) heldout_by_lang[l.index].push_back(e);
    }
    if (heldout_by_lang[l.index].empty()) {
      throw ContractError("data coverage: no held-out examples for language " + std::to_string(l.index));
    }
  }

  std::vector<Tensor> params = param_tensors(model);
  OptimState opt = OptimState::for_params(params);
  const TrainMask mask = build_mask(model, config_from_name("none"), Phase::Pretrain);
  MetricsHistory history;
  double train_sum = 0.0;
  int train_count = 0;

  auto evaluate = [&](std::int64_t step) {
    double mean_ppl = 0.0;
    for (LanguageId l : langs) {
      const NllSum s = teacher_forced_nll(model, heldout_by_lang[l.index], layout);
      const double loss = s.total / static_cast<double>(s.tokens);
      history.records.push_back({step, Phase::Pretrain, l.index, "heldout_loss", loss});
      history.records.push_back({step, Phase::Pretrain, l.index, "heldout_ppl", std::exp(loss)});
      mean_ppl += std::exp(loss);
    }
    history.records.push_back(
        {step, Phase::Pretrain, -1, "heldout_ppl", mean_ppl / static_cast<double>(langs.size())});
    if (train_count > 0) {
      history.records.push_back({step, Phase::Pretrain, -1, "train_loss", train_sum / train_count});
    }
    train_sum = 0.0;
    train_count = 0;
  };

  evaluate(0);
  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    train_sum += train_step(model, params, opt, mask, sampler.next_batch(cfg.batch_size), layout,
                            lr_at(cfg, step), step);
    ++train_count;
    const std::int64_t done = step + 1;
    if ((cfg.eval_every > 0 && done % cfg.eval_every == 0) || done == cfg.steps) evaluate(done);
  }
  return history;
}

MetricsHistory finetune(Model& model, std::span<const Example> task_train,
                        std::span<const Example> task_dev, const VocabLayout& layout,
                        const FreezeConfig& freeze, const TrainConfig& cfg) {
  cfg.validate(true);
  RoundRobinSampler sampler(task_train, cfg.languages, cfg.seed);
  std::map<int, std::vector<Example>> dev_by_lang;
  for (LanguageId l : cfg.languages) {
    for (const Example& e : task_dev) {
      if (e.lang == l) dev_by_lang[l.index].push_back(e);
    }
    if (dev_by_lang[l.index].empty()) {
      throw ContractError("data coverage: no dev examples for language " + std::to_string(l.index));
    }
  }

  std::vector<Tensor> params = param_tensors(model);
  OptimState opt = OptimState::for_params(params);
  const TrainMask mask = build_mask(model, freeze, Phase::Finetune);
  MetricsHistory history;
  double best_loss = INFINITY;
  std::vector<std::vector<double>> best_values;
  double train_sum = 0.0;
  int train_count = 0;

  auto evaluate = [&](std::int64_t step) {
    double mean = 0.0;
    for (LanguageId l : cfg.languages) {
      const NllSum s = teacher_forced_nll(model, dev_by_lang[l.index], layout);
      const double loss = s.total / static_cast<double>(s.tokens);
      history.records.push_back({step, Phase::Finetune, l.index, "dev_loss", loss});
      mean += loss;
    }
    mean /= static_cast<double>(cfg.languages.size());
    history.records.push_back({step, Phase::Finetune, -1, "dev_loss", mean});
    if (train_count > 0) {
      history.records.push_back({step, Phase::Finetune, -1, "train_loss", train_sum / train_count});
    }
    train_sum = 0.0;
    train_count = 0;
    if (mean < best_loss) {
      best_loss = mean;
      history.selected_step = step;
      best_values.clear();
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (mask[i]) best_values.emplace_back(params[i].data().begin(), params[i].data().end());
      }
    }
  };

  evaluate(0);
  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    train_sum += train_step(model, params, opt, mask, sampler.next_batch(cfg.batch_size), layout,
                            lr_at(cfg, step), step);
    ++train_count;
    const std::int64_t done = step + 1;
    if ((cfg.eval_every > 0 && done % cfg.eval_every == 0) || done == cfg.steps) evaluate(done);
  }
  std::size_t k = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!mask[i]) continue;
    std::copy(best_values[k].begin(), best_values[k].end(), params[i].mutable_data().begin());
    ++k;
  }
  history.records.push_back(
      {history.last_step(), Phase::Finetune, -1, "selected_step", static_cast<double>(history.selected_step)});
  return history;
}

}  // namespace mmt
