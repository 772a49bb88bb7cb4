// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "mmt/error.hpp"
#include "mmt/training.hpp"

namespace {

using mmt::LanguageId;
using mmt::Model;
using mmt::Phase;

struct Fixture {
  mmt::DataConfig data;
  mmt::ModelConfig model;
  mmt::Corpus corpus;

  Fixture() {
    data.pretrain_per_lang = 40;
    data.heldout_per_lang = 6;
    data.task_train_per_lang = 40;
    data.task_dev_per_lang = 6;
    data.task_test_per_lang = 4;
    data.base_vocab = 16;
    corpus = mmt::generate_corpus(data);
    model.n_languages = data.layout().n_slices;
    model.vocab_size = data.layout().vocab_size();
    model.max_len = data.max_len;
    model.d_model = 16;
    model.n_heads = 2;
    model.d_ff = 24;
    model.d_bottleneck = 8;
    model.n_enc_layers = 1;
    model.n_dec_layers = 1;
  }

  mmt::TrainConfig pre(int steps) const {
    mmt::TrainConfig t;
    t.steps = steps;
    t.batch_size = 8;
    t.eval_every = 5;
    t.warmup_steps = 2;
    return t;
  }

  mmt::TrainConfig fine(int steps) const {
    mmt::TrainConfig t = pre(steps);
    t.lr = 3e-3;
    t.languages = {LanguageId{0}};
    return t;
  }

  mmt::MetricsHistory pretrain(Model& m, int steps) const {
    return mmt::pretrain(m, corpus.pretrain, corpus.pretrain_heldout, data.layout(), data.n_languages, pre(steps));
  }
  mmt::MetricsHistory finetune(Model& m, const std::string& freeze, int steps) const {
    return mmt::finetune(m, corpus.task_train, corpus.task_dev, data.layout(), mmt::config_from_name(freeze),
                         fine(steps));
  }
};

std::string dump(const mmt::MetricsHistory& h) {
  std::ostringstream os;
  mmt::write_metrics(os, h);
  return os.str();
}

TEST(TrainConfig, Validation) {
  mmt::TrainConfig t;
  EXPECT_NO_THROW(t.validate(false));
  EXPECT_THROW(t.validate(true), mmt::ConfigError);  // no source languages
  t.batch_size = 0;
  EXPECT_THROW(t.validate(false), mmt::ConfigError);
}

TEST(Pretrain, ZeroStepsGivesOneEvalPoint) {
  const Fixture f;
  Model m(f.model, mmt::Variant::Modular, 1);
  const auto before = mmt::snapshot(m);
  const mmt::MetricsHistory h = f.pretrain(m, 0);
  ASSERT_FALSE(h.records.empty());
  for (const auto& r : h.records) EXPECT_EQ(r.step, 0);
  EXPECT_EQ(h.last_step(), 0);
  for (int l = 0; l < 4; ++l) EXPECT_TRUE(h.find(0, l, "heldout_ppl").has_value());
  EXPECT_TRUE(h.find(0, -1, "heldout_ppl").has_value());
  EXPECT_EQ(mmt::snapshot(m), before);
}

TEST(Pretrain, InitialLossNearLogVocab) {
  const Fixture f;
  Model m(f.model, mmt::Variant::Modular, 2);
  const mmt::MetricsHistory h = f.pretrain(m, 0);
  const double ln_v = std::log(static_cast<double>(f.model.vocab_size));
  for (int l = 0; l < 4; ++l) {
    // Random tied embeddings give logits of std 0.5 to 1 after residual
    // mixing, which adds about var/2 nats on top of the uniform ln V.
    EXPECT_NEAR(*h.find(0, l, "heldout_loss"), ln_v, 0.6) << "lang " << l;
  }
}

TEST(Pretrain, DeterministicAndLossDecreases) {
  const Fixture f;
  Model a(f.model, mmt::Variant::Modular, 3), b(f.model, mmt::Variant::Modular, 3);
  const mmt::MetricsHistory ha = f.pretrain(a, 30), hb = f.pretrain(b, 30);
  EXPECT_EQ(dump(ha), dump(hb));
  EXPECT_EQ(mmt::snapshot(a), mmt::snapshot(b));
  EXPECT_LT(*ha.find(30, -1, "heldout_ppl"), *ha.find(0, -1, "heldout_ppl"));
  std::int64_t prev = -1;
  for (const auto& r : ha.records) {
    EXPECT_GE(r.step, prev);
    prev = r.step;
  }
  EXPECT_TRUE(ha.find(5, -1, "train_loss").has_value());
}

TEST(Pretrain, MissingLanguageIsCoverageError) {
  const Fixture f;
  Model m(f.model, mmt::Variant::Modular, 1);
  const auto only0 = mmt::filter_language(f.corpus.pretrain, LanguageId{0});
  EXPECT_THROW(mmt::pretrain(m, only0, f.corpus.pretrain_heldout, f.data.layout(), 4, f.pre(1)),
               mmt::ContractError);
  const auto held0 = mmt::filter_language(f.corpus.pretrain_heldout, LanguageId{0});
  EXPECT_THROW(mmt::pretrain(m, f.corpus.pretrain, held0, f.data.layout(), 4, f.pre(1)), mmt::ContractError);
}

TEST(Pretrain, NonFiniteLossAborts) {
  const Fixture f;
  Model m(f.model, mmt::Variant::Modular, 1);
  m.params()[m.param_index("enc.0.ffn.w1")].value.mutable_data()[0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(f.pretrain(m, 1), mmt::NumericError);
}

TEST(Finetune, S1KeepsAdaptersAndUpdatesSharedGroups) {
  const Fixture f;
  Model m(f.model, mmt::Variant::Modular, 4);
  f.pretrain(m, 10);
  const auto before = mmt::snapshot(m);
  const mmt::TrainMask mask = mmt::build_mask(m, mmt::config_from_name("s1"), Phase::Finetune);
  const mmt::MetricsHistory h = f.finetune(m, "s1", 10);
  ASSERT_EQ(h.selected_step, 10) << "dev loss did not improve; selection restored an earlier point";
  const mmt::FreezeReport r = mmt::verify_frozen(m, before, mmt::snapshot(m), mask, true);
  EXPECT_TRUE(r.ok());
  // Adapters of languages never routed still count as frozen, not stale.
  EXPECT_TRUE(r.stale.empty()) << r.stale.front();
}

TEST(Finetune, S7KeepsDecoderFfn) {
  const Fixture f;
  Model m(f.model, mmt::Variant::Modular, 5);
  f.pretrain(m, 10);
  const auto before = mmt::snapshot(m);
  f.finetune(m, "s7", 10);
  const auto after = mmt::snapshot(m);
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    const mmt::Param& p = m.params()[i];
    if (p.group == mmt::ParamGroup::DecFFN || mmt::is_module_group(p.group) || p.group == mmt::ParamGroup::Emb) {
      EXPECT_EQ(before[i], after[i]) << p.name;
    }
  }
  const mmt::TrainMask mask = mmt::build_mask(m, mmt::config_from_name("s7"), Phase::Finetune);
  EXPECT_TRUE(mmt::verify_frozen(m, before, after, mask).ok());
}

TEST(Finetune, RoutingIsolationOfDevLoss) {
  const Fixture f;
  Model m(f.model, mmt::Variant::Modular, 6);
  f.pretrain(m, 10);
  f.finetune(m, "s1", 5);
  const auto dev0 = mmt::filter_language(f.corpus.task_dev, LanguageId{0});
  const mmt::NllSum base = mmt::teacher_forced_nll(m, dev0, f.data.layout());
  mmt::Rng rng(1);
  for (mmt::Param& p : m.params()) {
    if (p.language == 3) {
      for (double& x : p.value.mutable_data()) x = rng.normal();
    }
  }
  const mmt::NllSum again = mmt::teacher_forced_nll(m, dev0, f.data.layout());
  EXPECT_EQ(base.total, again.total);
  EXPECT_EQ(base.tokens, again.tokens);
}

TEST(Finetune, SelectionRecordedAndDevLossLogged) {
  const Fixture f;
  Model m(f.model, mmt::Variant::Modular, 7);
  const mmt::MetricsHistory h = f.finetune(m, "s7", 10);
  EXPECT_GE(h.selected_step, 0);
  EXPECT_EQ(h.find(10, -1, "selected_step"), static_cast<double>(h.selected_step));
  EXPECT_TRUE(h.find(0, 0, "dev_loss").has_value());
  EXPECT_TRUE(h.find(10, 0, "dev_loss").has_value());
  for (const auto& r : h.records) EXPECT_EQ(r.phase, Phase::Finetune);
}

TEST(Finetune, MissingSourceDataIsCoverageError) {
  const Fixture f;
  Model m(f.model, mmt::Variant::Modular, 1);
  mmt::TrainConfig t = f.fine(1);
  t.languages = {LanguageId{4}};  // reserved slot: no task_train rows
  EXPECT_THROW(mmt::finetune(m, f.corpus.task_train, f.corpus.task_dev, f.data.layout(),
                             mmt::config_from_name("s1"), t),
               mmt::ContractError);
}

// ---- perplexity ------------------------------------------------------------

TEST(Perplexity, UniformModelGivesVocabSize) {
  const Fixture f;
  Model m(f.model, mmt::Variant::Modular, 1);
  auto& emb = m.params()[m.param_index("emb.token")].value;
  std::fill(emb.mutable_data().begin(), emb.mutable_data().end(), 0.0);
  const double ppl = mmt::perplexity(m, f.corpus.pretrain_heldout, LanguageId{1}, f.data.layout());
  EXPECT_NEAR(ppl, f.model.vocab_size, 1e-9);
}

TEST(Perplexity, MatchesClosedFormOnTwoExamples) {
  const Fixture f;
  Model m(f.model, mmt::Variant::Modular, 8);
  const mmt::VocabLayout layout = f.data.layout();
  const std::vector<mmt::Example> two = {mmt::filter_language(f.corpus.task_dev, LanguageId{2})[0],
                                         mmt::filter_language(f.corpus.task_dev, LanguageId{2})[1]};
  double nll = 0.0;
  std::size_t n = 0;
  for (const mmt::Example& e : two) {
    mmt::TokenSeq tgt_in = {layout.bos()};
    tgt_in.insert(tgt_in.end(), e.target.begin(), e.target.end() - 1);
    const mmt::Tensor logits = m.forward(e.input, tgt_in, e.lang);
    for (std::size_t t = 0; t < e.target.size(); ++t) {
      double mx = -1e300;
      for (std::size_t c = 0; c < logits.cols(); ++c) mx = std::max(mx, logits.at(t, c));
      double z = 0.0;
      for (std::size_t c = 0; c < logits.cols(); ++c) z += std::exp(logits.at(t, c) - mx);
      nll += mx + std::log(z) - logits.at(t, static_cast<std::size_t>(e.target[t]));
      ++n;
    }
  }
  const double want = std::exp(nll / static_cast<double>(n));
  EXPECT_NEAR(mmt::perplexity(m, two, LanguageId{2}, layout), want, 1e-12 * want);
  EXPECT_GE(want, 1.0);
}

TEST(Perplexity, EmptySetIsUndetermined) {
  const Fixture f;
  const Model m(f.model, mmt::Variant::Modular, 1);
  EXPECT_THROW(mmt::perplexity(m, f.corpus.pretrain_heldout, LanguageId{4}, f.data.layout()), mmt::Undetermined);
}

// ---- metrics log -------------------------------------------------------------

TEST(Metrics, TabSeparatedLines) {
  mmt::MetricsHistory h;
  h.records.push_back({0, Phase::Pretrain, 2, "heldout_ppl", 0.1});
  h.records.push_back({5, Phase::Finetune, -1, "dev_loss", 3.0});
  EXPECT_EQ(dump(h), "0\tpretrain\t2\theldout_ppl\t0.10000000000000001\n5\tfinetune\t-1\tdev_loss\t3\n");
  EXPECT_EQ(h.find(5, -1, "dev_loss"), 3.0);
  EXPECT_FALSE(h.find(5, 0, "dev_loss").has_value());
}

}  // namespace
