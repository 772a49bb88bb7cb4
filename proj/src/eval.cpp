// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmt/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "mmt/error.hpp"

namespace mmt {

namespace {

TokenId argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return static_cast<TokenId>(best);
}

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// Restores the model's routing override when leaving scope.
class OverrideGuard {
 public:
  explicit OverrideGuard(Model& m) : model_(m), saved_(m.language_override()) {}
  ~OverrideGuard() {
    if (saved_) {
      model_.swap_language(*saved_);
    } else {
      model_.clear_language_override();
    }
  }
  OverrideGuard(const OverrideGuard&) = delete;
  OverrideGuard& operator=(const OverrideGuard&) = delete;

 private:
  Model& model_;
  std::optional<LanguageId> saved_;
};

}  // namespace

TokenSeq greedy_decode(const StepScorer& scorer, TokenId bos, TokenId eos, int max_len) {
  TokenSeq prefix{bos};
  TokenSeq out;
  while (static_cast<int>(out.size()) < max_len) {
    const std::vector<double> logits = scorer(prefix);
    const TokenId t = argmax(logits);
    if (t == eos) break;
    out.push_back(t);
    prefix.push_back(t);
  }
  return out;
}

std::vector<TokenSeq> greedy_decode_batch(const Model& model,
                                          std::span<const std::span<const TokenId>> inputs,
                                          std::span<const LanguageId> langs, int max_len,
                                          const VocabLayout& layout) {
  if (inputs.size() != langs.size()) throw ContractError("greedy_decode_batch: inputs/langs size mismatch");
  const std::size_t n = inputs.size();
  std::vector<TokenSeq> out(n);
  if (n == 0) return out;
  const int limit = std::min(max_len, model.config().max_len);
  std::vector<TokenSeq> prefix(n, TokenSeq{layout.bos()});
  std::vector<bool> done(n, false);

  auto pack = [&] {
    std::vector<SequencePair> items;
    items.reserve(n);
    for (std::size_t i = 0; i < n; ++i) items.push_back({inputs[i], prefix[i], langs[i]});
    return pack_batch(items);
  };
  PackedBatch batch = pack();
  const Tensor encoded = model.encode_batch(batch);
  const std::size_t vocab = static_cast<std::size_t>(model.config().vocab_size);

  for (int step = 0; step < limit; ++step) {
    if (step > 0) batch = pack();
    const Tensor logits = model.decode_batch(batch, encoded);
    std::size_t open = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i]) continue;
      const auto& s = batch.tgt_seqs[batch.order[i]];
      const std::size_t row = s.begin + s.len - 1;
      const TokenId t = argmax(logits.data().subspan(row * vocab, vocab));
      if (t == layout.eos()) {
        done[i] = true;
        continue;
      }
      out[i].push_back(t);
      prefix[i].push_back(t);
      ++open;
    }
    if (open == 0) break;
  }
  return out;
}

TokenSeq greedy_decode(const Model& model, std::span<const TokenId> input, LanguageId lang,
                       int max_len, const VocabLayout& layout) {
  const std::span<const TokenId> one[1] = {input};
  const LanguageId l[1] = {lang};
  return std::move(greedy_decode_batch(model, one, l, max_len, layout).front());
}

DecodeResult score_output(TokenSeq output, const Example& ex, const LanguageSet& langs) {
  DecodeResult r;
  r.output = std::move(output);
  r.detected = lid(r.output, langs.layout);
  const auto ref = target_content(ex, langs.layout);
  try {
    r.meaning = meaning_match(r.output, ref, langs);
  } catch (const Undetermined&) {
    r.meaning = 0.0;
  }
  r.exact = std::equal(r.output.begin(), r.output.end(), ref.begin(), ref.end());
  return r;
}

double target_language_rate(std::span<const DecodeResult> results, LanguageId target) {
  if (results.empty()) throw Undetermined("target_language_rate: no results");
  std::size_t hits = 0;
  for (const DecodeResult& r : results) {
    if (r.detected && r.detected->lang == target) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

TaskMetrics aggregate(std::span<const DecodeResult> results, LanguageId target,
                      const VocabLayout& layout) {
  if (results.empty()) throw Undetermined("task metrics over an empty example list");
  TaskMetrics m;
  m.n = results.size();
  m.detected_counts.assign(static_cast<std::size_t>(layout.n_slices) + 1, 0);
  for (const DecodeResult& r : results) {
    m.exact_match += r.exact ? 1.0 : 0.0;
    m.meaning += r.meaning;
    if (r.detected) {
      ++m.detected_counts[static_cast<std::size_t>(r.detected->lang.index)];
    } else {
      ++m.detected_counts.back();
    }
  }
  const double n = static_cast<double>(m.n);
  m.exact_match /= n;
  m.meaning /= n;
  m.target_rate = target_language_rate(results, target);
  return m;
}

TaskMetrics task_eval(const ExampleDecoder& decode, std::span<const Example> examples,
                      LanguageId target, const LanguageSet& langs) {
  std::vector<DecodeResult> results;
  results.reserve(examples.size());
  for (const Example& ex : examples) results.push_back(score_output(decode(ex), ex, langs));
  return aggregate(results, target, langs.layout);
}

TaskMetrics task_eval(Model& model, std::span<const Example> examples, LanguageId inference_lang,
                      const LanguageSet& langs, std::vector<DecodeResult>* results) {
  if (examples.empty()) throw Undetermined("task_eval: no examples");
  const LanguageId target = examples.front().lang;
  for (const Example& ex : examples) {
    if (ex.lang != target) throw ContractError("task_eval: examples mix languages");
  }
  OverrideGuard guard(model);
  model.swap_language(inference_lang);

  constexpr std::size_t kChunk = 64;
  std::vector<DecodeResult> local;
  local.reserve(examples.size());
  const int max_len = model.config().max_len;
  for (std::size_t begin = 0; begin < examples.size(); begin += kChunk) {
    const std::size_t end = std::min(examples.size(), begin + kChunk);
    std::vector<std::span<const TokenId>> inputs;
    std::vector<LanguageId> ls;
    for (std::size_t i = begin; i < end; ++i) {
      inputs.emplace_back(examples[i].input);
      ls.push_back(examples[i].lang);
    }
    std::vector<TokenSeq> outs = greedy_decode_batch(model, inputs, ls, max_len, langs.layout);
    for (std::size_t i = begin; i < end; ++i) {
      local.push_back(score_output(std::move(outs[i - begin]), examples[i], langs));
    }
  }
  TaskMetrics m = aggregate(local, target, langs.layout);
  if (results) *results = std::move(local);
  return m;
}

SweepReport module_sweep(Model& model, std::span<const Example> examples, int n_candidates,
                         const LanguageSet& langs) {
  SweepReport report;
  for (int c = 0; c < n_candidates; ++c) {
    TaskMetrics m = task_eval(model, examples, LanguageId{c}, langs);
    const double score = m.meaning;
    report.entries.push_back({LanguageId{c}, std::move(m), score});
  }
  report.ranking.resize(report.entries.size());
  std::iota(report.ranking.begin(), report.ranking.end(), 0);
  std::stable_sort(report.ranking.begin(), report.ranking.end(), [&](int a, int b) {
    const SweepEntry& x = report.entries[static_cast<std::size_t>(a)];
    const SweepEntry& y = report.entries[static_cast<std::size_t>(b)];
    if (x.score != y.score) return x.score > y.score;
    return x.metrics.exact_match > y.metrics.exact_match;
  });
  return report;
}

void write_eval_report(std::ostream& os, std::span<const EvalRow> rows, int n_slices) {
  for (const EvalRow& r : rows) {
    os << "eval\t" << r.lang.index << '\t' << (r.zero_shot ? 1 : 0) << '\t'
       << fmt(r.metrics.exact_match) << '\t' << fmt(r.metrics.meaning) << '\t'
       << fmt(r.metrics.target_rate) << '\t';
    for (std::size_t i = 0; i < r.metrics.detected_counts.size(); ++i) {
      os << (i ? "," : "") << r.metrics.detected_counts[i];
    }
    os << '\n';
  }
  os << "\nlang  zero-shot      EM  meaning  target-rate  detected as";
  for (int l = 0; l < n_slices; ++l) os << "  L" << l;
  os << "  none\n";
  for (const EvalRow& r : rows) {
    char line[128];
    std::snprintf(line, sizeof line, "%4d  %9s  %6.3f  %7.3f  %11.3f  %11s", r.lang.index,
                  r.zero_shot ? "yes" : "no", r.metrics.exact_match, r.metrics.meaning,
                  r.metrics.target_rate, "");
    os << line;
    for (std::size_t c : r.metrics.detected_counts) {
      std::snprintf(line, sizeof line, "  %3zu", c);
      os << line;
    }
    os << '\n';
  }
}

void write_sweep_report(std::ostream& os, const SweepReport& report) {
  for (const SweepEntry& e : report.entries) {
    os << "sweep\t" << e.module.index << '\t' << fmt(e.score) << '\t' << fmt(e.metrics.exact_match)
       << '\t' << fmt(e.metrics.target_rate) << '\n';
  }
  os << "ranking";
  for (int id : report.ranking) os << ' ' << id;
  os << "\n\nmodule  meaning      EM  target-rate\n";
  for (int id : report.ranking) {
    const SweepEntry& e = report.entries[static_cast<std::size_t>(id)];
    char line[96];
    std::snprintf(line, sizeof line, "%6d  %7.3f  %6.3f  %11.3f\n", id, e.score,
                  e.metrics.exact_match, e.metrics.target_rate);
    os << line;
  }
}

}  // namespace mmt
