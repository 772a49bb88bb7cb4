// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "mmt/error.hpp"
#include "mmt/eval.hpp"

namespace {

using mmt::DecodeResult;
using mmt::Example;
using mmt::LanguageId;
using mmt::LanguageSet;
using mmt::Model;
using mmt::TokenId;
using mmt::TokenSeq;
using mmt::VocabLayout;

const VocabLayout kLayout{5, 16, 4};
constexpr TokenId kBos = 80, kEos = 82;

LanguageSet langs() { return LanguageSet::make(kLayout, 4, 12, 0, 0.9); }

// ---- greedy_decode on rigged scorers ---------------------------------------------

std::vector<double> one_hot(TokenId t, std::size_t v = 87) {
  std::vector<double> row(v, 0.0);
  row[static_cast<std::size_t>(t)] = 1.0;
  return row;
}

TEST(GreedyDecode, EosFirstGivesEmptyOutput) {
  const mmt::StepScorer eos_now = [](std::span<const TokenId>) { return one_hot(kEos); };
  EXPECT_TRUE(mmt::greedy_decode(eos_now, kBos, kEos, 10).empty());
}

TEST(GreedyDecode, RiggedCopyThenEos) {
  const TokenSeq input = {3, 1, 4, 1, 5};
  const mmt::StepScorer copy = [&](std::span<const TokenId> prefix) {
    const std::size_t pos = prefix.size() - 1;
    return one_hot(pos < input.size() ? input[pos] : kEos);
  };
  EXPECT_EQ(mmt::greedy_decode(copy, kBos, kEos, 10), input);
  EXPECT_EQ(mmt::greedy_decode(copy, kBos, kEos, 3), (TokenSeq{3, 1, 4}));
  EXPECT_EQ(mmt::greedy_decode(copy, kBos, kEos, 10), mmt::greedy_decode(copy, kBos, kEos, 10));
}

TEST(GreedyDecode, TiesBreakToLowestId) {
  const mmt::StepScorer tie = [](std::span<const TokenId> prefix) {
    std::vector<double> row(87, -1.0);
    if (prefix.size() > 2) {
      row[kEos] = 5.0;
    } else {
      row[9] = row[4] = row[60] = 2.0;
    }
    return row;
  };
  EXPECT_EQ(mmt::greedy_decode(tie, kBos, kEos, 10), (TokenSeq{4, 4}));
}

// ---- target_language_rate ----------------------------------------------------------

DecodeResult detected_as(std::optional<int> l) {
  DecodeResult r;
  if (l) r.detected = mmt::LidResult{LanguageId{*l}, 1.0};
  return r;
}

TEST(TargetRate, ExamplesAndEmpty) {
  const std::vector<DecodeResult> all = {detected_as(2), detected_as(2)};
  EXPECT_EQ(mmt::target_language_rate(all, LanguageId{2}), 1.0);
  EXPECT_EQ(mmt::target_language_rate(all, LanguageId{0}), 0.0);
  EXPECT_THROW(mmt::target_language_rate({}, LanguageId{0}), mmt::Undetermined);
}

TEST(TargetRate, MatchesRecountAndIsPermutationInvariant) {
  mmt::Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<DecodeResult> rs;
    const std::size_t n = 1 + rng.below(30);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = rng.below(6);
      rs.push_back(detected_as(k == 5 ? std::nullopt : std::optional<int>(static_cast<int>(k))));
    }
    const LanguageId target{static_cast<int>(rng.below(5))};
    std::size_t hits = 0;
    for (const auto& r : rs) hits += (r.detected && r.detected->lang == target) ? 1 : 0;
    const double rate = mmt::target_language_rate(rs, target);
    EXPECT_EQ(rate, static_cast<double>(hits) / static_cast<double>(n));
    EXPECT_GE(rate, 0.0);
    EXPECT_LE(rate, 1.0);
    rng.shuffle(rs.begin(), rs.end());
    EXPECT_EQ(mmt::target_language_rate(rs, target), rate);
  }
}

// ---- scoring and task_eval with rigged decoders ---------------------------------------

TEST(ScoreOutput, ExactImpliesFullMeaningAndTargetLanguage) {
  const LanguageSet ls = langs();
  const Example ex{LanguageId{1}, ls.languages[1].render(TokenSeq{1, 2, 3}), ls.languages[1].render(TokenSeq{1, 3})};
  Example with_eos = ex;
  with_eos.target.push_back(kLayout.eos());
  const DecodeResult r = mmt::score_output(ls.languages[1].render(TokenSeq{1, 3}), with_eos, ls);
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(r.meaning, 1.0);
  EXPECT_EQ(r.detected->lang.index, 1);
  const DecodeResult wrong = mmt::score_output(ls.languages[0].render(TokenSeq{1, 3}), with_eos, ls);
  EXPECT_FALSE(wrong.exact);
  EXPECT_EQ(wrong.meaning, 1.0);
  EXPECT_EQ(wrong.detected->lang.index, 0);
  const DecodeResult empty = mmt::score_output({}, with_eos, ls);
  EXPECT_EQ(empty.meaning, 0.0);
  EXPECT_FALSE(empty.detected.has_value());
}

TEST(TaskEval, RiggedCopyModelOnExtraction) {
  const LanguageSet ls = langs();
  mmt::Rng rng(4);
  std::vector<Example> xs;
  std::size_t len_one = 0;
  for (int i = 0; i < 60; ++i) {
    const std::size_t len = 1 + rng.below(5);
    TokenSeq pivot(len);
    for (TokenId& t : pivot) t = static_cast<TokenId>(rng.below(16));
    TokenSeq evens;
    for (std::size_t k = 0; k < len; k += 2) evens.push_back(pivot[k]);
    Example ex{LanguageId{2}, ls.languages[2].render(pivot), ls.languages[2].render(evens)};
    ex.target.push_back(kLayout.eos());
    xs.push_back(ex);
    len_one += len == 1;
  }
  const mmt::ExampleDecoder copy = [](const Example& e) { return e.input; };
  const mmt::TaskMetrics m = mmt::task_eval(copy, xs, LanguageId{2}, ls);
  EXPECT_DOUBLE_EQ(m.exact_match, static_cast<double>(len_one) / 60.0);
  EXPECT_EQ(m.target_rate, 1.0);
  EXPECT_EQ(m.n, 60u);
  EXPECT_EQ(m.detected_counts[2], 60u);
  EXPECT_EQ(m.detected_counts.size(), 6u);
}

// ---- model-backed decoding --------------------------------------------------------

mmt::ModelConfig small_model() {
  mmt::ModelConfig c;
  c.n_languages = 5;
  c.vocab_size = kLayout.vocab_size();
  c.max_len = 12;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ff = 8;
  c.d_bottleneck = 4;
  c.n_enc_layers = 1;
  c.n_dec_layers = 1;
  return c;
}

void randomize_adapters(Model& m, std::uint64_t seed) {
  mmt::Rng rng(seed);
  for (mmt::Param& p : m.params()) {
    if (mmt::is_module_group(p.group)) {
      for (double& x : p.value.mutable_data()) x = 0.7 * rng.normal();
    }
  }
}

std::vector<Example> examples_for(int lang, int n, std::uint64_t seed) {
  const LanguageSet ls = langs();
  const auto chain = mmt::BigramChain::from_seed(1, 16, 4);
  mmt::Rng rng(seed);
  std::vector<Example> xs;
  for (int i = 0; i < n; ++i) xs.push_back(mmt::gen_task(ls.languages[lang], chain, kLayout, 12, rng));
  return xs;
}

TEST(ModelDecode, BatchEqualsSingleAndIsDeterministic) {
  Model m(small_model(), mmt::Variant::Modular, 3);
  randomize_adapters(m, 4);
  std::vector<Example> xs = examples_for(1, 5, 1);
  for (const Example& e : examples_for(3, 4, 2)) xs.push_back(e);
  std::vector<std::span<const TokenId>> inputs;
  std::vector<LanguageId> ls;
  for (const Example& e : xs) {
    inputs.emplace_back(e.input);
    ls.push_back(e.lang);
  }
  const auto batch = mmt::greedy_decode_batch(m, inputs, ls, 20, kLayout);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const TokenSeq single = mmt::greedy_decode(m, xs[i].input, xs[i].lang, 20, kLayout);
    EXPECT_EQ(batch[i], single) << i;
    EXPECT_LE(single.size(), 12u);
  }
  EXPECT_EQ(mmt::greedy_decode_batch(m, inputs, ls, 20, kLayout), batch);
}

TEST(ModelTaskEval, EmptyAndMixedInputs) {
  Model m(small_model(), mmt::Variant::Modular, 3);
  const LanguageSet ls = langs();
  EXPECT_THROW(mmt::task_eval(m, std::span<const Example>{}, LanguageId{0}, ls), mmt::Undetermined);
  std::vector<Example> mixed = examples_for(0, 2, 1);
  mixed.push_back(examples_for(1, 1, 2)[0]);
  EXPECT_THROW(mmt::task_eval(m, mixed, LanguageId{0}, ls), mmt::ContractError);
}

TEST(ModelTaskEval, RestoresRouting) {
  Model m(small_model(), mmt::Variant::Modular, 3);
  const LanguageSet ls = langs();
  m.swap_language(LanguageId{2});
  mmt::task_eval(m, examples_for(0, 3, 1), LanguageId{1}, ls);
  EXPECT_EQ(m.language_override(), LanguageId{2});
  m.clear_language_override();
  mmt::task_eval(m, examples_for(0, 3, 1), LanguageId{1}, ls);
  EXPECT_FALSE(m.language_override().has_value());
}

TEST(ModelTaskEval, SwapEqualsModelWhoseOnlyBankIsTheSwappedOne) {
  Model m(small_model(), mmt::Variant::Modular, 5);
  randomize_adapters(m, 6);
  const LanguageSet ls = langs();
  const std::vector<Example> xs = examples_for(4, 12, 3);
  std::vector<DecodeResult> swapped;
  const mmt::TaskMetrics a = mmt::task_eval(m, xs, LanguageId{1}, ls, &swapped);

  // Copy bank 1 into every bank; plain routing by example language then
  // has no choice but bank 1's weights.
  Model only = m.clone();
  for (mmt::Param& p : only.params()) {
    if (p.language < 0) continue;
    std::string name = p.name;
    const auto first = name.find('.');
    const auto second = name.find('.', first + 1);
    name.replace(first + 1, second - first - 1, "1");
    const auto src = m.params()[m.param_index(name)].value.data();
    std::copy(src.begin(), src.end(), p.value.mutable_data().begin());
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    EXPECT_EQ(mmt::greedy_decode(only, xs[i].input, xs[i].lang, 12, kLayout), swapped[i].output) << i;
  }
  EXPECT_EQ(a.n, xs.size());
}

// ---- module_sweep -----------------------------------------------------------------

TEST(ModuleSweep, IdenticalAdaptersTieToLowerId) {
  Model m(small_model(), mmt::Variant::Modular, 7);
  randomize_adapters(m, 8);
  // Make modules 0..3 identical to module 0.
  for (mmt::Param& p : m.params()) {
    if (p.language <= 0) continue;
    std::string name = p.name;
    const auto first = name.find('.');
    const auto second = name.find('.', first + 1);
    name.replace(first + 1, second - first - 1, "0");
    const auto src = m.params()[m.param_index(name)].value.data();
    std::vector<double> copy(src.begin(), src.end());
    std::copy(copy.begin(), copy.end(), p.value.mutable_data().begin());
  }
  const mmt::SweepReport r = mmt::module_sweep(m, examples_for(4, 10, 9), 4, langs());
  ASSERT_EQ(r.entries.size(), 4u);
  EXPECT_EQ(r.ranking, (std::vector<int>{0, 1, 2, 3}));
  for (const auto& e : r.entries) {
    EXPECT_EQ(e.score, r.entries[0].score);
    EXPECT_EQ(e.metrics.exact_match, r.entries[0].metrics.exact_match);
  }
}

TEST(ModuleSweep, RankingSortedAndCoversCandidates) {
  Model m(small_model(), mmt::Variant::Modular, 10);
  randomize_adapters(m, 11);
  const mmt::SweepReport r = mmt::module_sweep(m, examples_for(4, 10, 12), 4, langs());
  ASSERT_EQ(r.entries.size(), 4u);
  std::vector<int> sorted = r.ranking;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<int>{0, 1, 2, 3}));
  for (std::size_t i = 0; i + 1 < r.ranking.size(); ++i) {
    EXPECT_GE(r.entries[r.ranking[i]].score, r.entries[r.ranking[i + 1]].score);
  }
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(r.entries[i].module.index, static_cast<int>(i));
}

// ---- reports --------------------------------------------------------------------

TEST(Reports, EvalReportHasOneMachineLinePerRow) {
  mmt::TaskMetrics tm;
  tm.n = 2;
  tm.exact_match = 0.5;
  tm.meaning = 0.75;
  tm.target_rate = 1.0;
  tm.detected_counts = {0, 2, 0, 0, 0, 0};
  const std::vector<mmt::EvalRow> rows = {{LanguageId{0}, false, tm}, {LanguageId{1}, true, tm}};
  std::ostringstream os;
  mmt::write_eval_report(os, rows, 5);
  const std::string s = os.str();
  EXPECT_NE(s.find("eval\t0\t0\t0.5\t0.75\t1\t0,2,0,0,0,0\n"), std::string::npos) << s;
  EXPECT_NE(s.find("eval\t1\t1\t"), std::string::npos) << s;
  std::size_t lines = 0;
  for (std::size_t p = 0; (p = s.find("eval\t", p)) != std::string::npos; ++p) ++lines;
  EXPECT_EQ(lines, 2u);
}

}  // namespace
