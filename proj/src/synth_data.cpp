// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmt/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mmt/error.hpp"

namespace mmt {

std::optional<LanguageId> VocabLayout::slice_of(TokenId t) const {
  if (!is_content(t)) return std::nullopt;
  return LanguageId{t / base_vocab};
}

void VocabLayout::validate() const {
  if (n_slices <= 0 || base_vocab <= 0 || n_sentinels <= 0) {
    throw ConfigError("vocabulary layout needs positive slices, base vocabulary and sentinels");
  }
}

SyntheticLanguage::SyntheticLanguage(LanguageId id, std::vector<TokenId> permutation)
    : id_(id), perm_(std::move(permutation)), inverse_(perm_.size(), -1) {
  for (std::size_t i = 0; i < perm_.size(); ++i) {
    const TokenId p = perm_[i];
    if (p < 0 || static_cast<std::size_t>(p) >= perm_.size() || inverse_[p] != -1) {
      throw ConfigError("language permutation is not a bijection");
    }
    inverse_[p] = static_cast<TokenId>(i);
  }
}

TokenSeq SyntheticLanguage::render(std::span<const TokenId> pivot) const {
  TokenSeq out;
  out.reserve(pivot.size());
  for (TokenId t : pivot) {
    if (t < 0 || t >= base_vocab()) {
      throw IndexError("render: pivot token " + std::to_string(t) + " outside [0, " +
                       std::to_string(base_vocab()) + ")");
    }
    out.push_back(offset() + perm_[t]);
  }
  return out;
}

std::optional<TokenId> SyntheticLanguage::derender_one(TokenId t) const {
  const TokenId local = t - offset();
  if (local < 0 || local >= base_vocab()) return std::nullopt;
  return inverse_[local];
}

TokenSeq SyntheticLanguage::derender(std::span<const TokenId> tokens) const {
  TokenSeq out;
  out.reserve(tokens.size());
  for (TokenId t : tokens) {
    auto p = derender_one(t);
    if (!p) {
      throw IndexError("derender: token " + std::to_string(t) + " is not in language " +
                       std::to_string(id_.index));
    }
    out.push_back(*p);
  }
  return out;
}

constexpr std::uint64_t kBaseLexiconSalt = 0xba5eULL;

LanguageSet LanguageSet::make(const VocabLayout& layout, int n_trained, std::uint64_t lexicon_seed,
                              std::optional<int> related_to, double cognate_rate) {
  layout.validate();
  if (n_trained <= 0 || n_trained > layout.n_slices) {
    throw ConfigError("trained language count must lie in [1, " + std::to_string(layout.n_slices) + "]");
  }
  if (related_to && (*related_to < 0 || *related_to >= n_trained)) {
    throw ConfigError("related_to must name a trained language");
  }
  if (!(cognate_rate >= 0.0 && cognate_rate <= 1.0)) {
    throw ConfigError("cognate_rate must lie in [0, 1]");
  }
  const auto vb = static_cast<std::size_t>(layout.base_vocab);
  std::vector<TokenId> base(vb);
  std::iota(base.begin(), base.end(), 0);
  Rng base_rng(mix_seed(lexicon_seed, kBaseLexiconSalt));
  base_rng.shuffle(base.begin(), base.end());
  const auto n_kept = static_cast<std::size_t>(std::llround(cognate_rate * static_cast<double>(vb)));

  LanguageSet set;
  set.layout = layout;
  set.n_trained = n_trained;
  std::vector<std::vector<TokenId>> perms;
  for (int l = 0; l < layout.n_slices; ++l) {
    std::vector<TokenId> perm = base;
    Rng rng(mix_seed(lexicon_seed, static_cast<std::uint64_t>(l)));
    // Pivots outside the kept set trade surface forms among themselves.
    std::vector<std::size_t> pivots(vb);
    std::iota(pivots.begin(), pivots.end(), 0);
    rng.shuffle(pivots.begin(), pivots.end());
    std::vector<TokenId> forms;
    for (std::size_t i = n_kept; i < vb; ++i) forms.push_back(base[pivots[i]]);
    rng.shuffle(forms.begin(), forms.end());
    for (std::size_t i = n_kept; i < vb; ++i) perm[pivots[i]] = forms[i - n_kept];
    if (l >= n_trained && related_to) perm = perms[static_cast<std::size_t>(*related_to)];
    perms.push_back(perm);
    set.languages.emplace_back(LanguageId{l}, std::move(perm));
  }
  return set;
}

const SyntheticLanguage& LanguageSet::at(LanguageId id) const {
  if (id.index < 0 || static_cast<std::size_t>(id.index) >= languages.size()) {
    throw IndexError("language " + std::to_string(id.index) + " outside [0, " +
                     std::to_string(languages.size()) + ")");
  }
  return languages[static_cast<std::size_t>(id.index)];
}

BigramChain BigramChain::from_seed(std::uint64_t grammar_seed, int base_vocab, int branching) {
  if (base_vocab <= 0 || branching <= 0 || branching > base_vocab) {
    throw ConfigError("bigram chain needs 0 < branching <= base vocabulary");
  }
  BigramChain chain;
  Rng rng(grammar_seed);
  std::vector<TokenId> all(static_cast<std::size_t>(base_vocab));
  std::iota(all.begin(), all.end(), 0);
  chain.succ_.resize(static_cast<std::size_t>(base_vocab));
  for (auto& row : chain.succ_) {
    // Partial Fisher-Yates picks `branching` distinct successors.
    for (int i = 0; i < branching; ++i) {
      const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(base_vocab - i)));
      std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
    }
    std::vector<TokenId> picked(all.begin(), all.begin() + branching);
    std::sort(picked.begin(), picked.end());
    // Dirichlet(1) weights are normalized exponentials.
    double total = 0.0;
    for (TokenId b : picked) {
      double u;
      do {
        u = rng.uniform();
      } while (u <= 0.0);
      const double w = -std::log(u);
      row.emplace_back(b, w);
      total += w;
    }
    for (auto& [b, w] : row) w /= total;
  }
  return chain;
}

double BigramChain::prob(TokenId a, TokenId b) const {
  for (const auto& [t, w] : succ_.at(static_cast<std::size_t>(a))) {
    if (t == b) return w;
  }
  return 0.0;
}

TokenId BigramChain::next(TokenId prev, Rng& rng) const {
  const auto& row = succ_.at(static_cast<std::size_t>(prev));
  double u = rng.uniform();
  for (const auto& [t, w] : row) {
    if (u < w) return t;
    u -= w;
  }
  return row.back().first;
}

TokenSeq gen_pivot(const BigramChain& chain, int max_len, Rng& rng) {
  constexpr int kMinLen = 8;
  const int hi = max_len - 4;
  if (hi < kMinLen) throw ConfigError("max_len must be at least 12 to generate pivots");
  const auto len = static_cast<std::size_t>(rng.between(kMinLen, hi));
  TokenSeq out;
  out.reserve(len);
  out.push_back(static_cast<TokenId>(rng.below(static_cast<std::uint64_t>(chain.base_vocab()))));
  while (out.size() < len) out.push_back(chain.next(out.back(), rng));
  return out;
}

namespace {

// Splits n items into k positive parts uniformly over compositions.
std::vector<std::size_t> random_partition(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> cuts(n - 1);
  std::iota(cuts.begin(), cuts.end(), std::size_t{1});
  for (std::size_t i = 0; i + 1 < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(cuts.size() - i));
    std::swap(cuts[i], cuts[j]);
  }
  cuts.resize(k - 1);
  std::sort(cuts.begin(), cuts.end());
  std::vector<std::size_t> parts;
  std::size_t prev = 0;
  for (std::size_t c : cuts) {
    parts.push_back(c - prev);
    prev = c;
  }
  parts.push_back(n - prev);
  return parts;
}

}  // namespace

std::optional<SpanCorruption> span_corrupt(std::span<const TokenId> tokens, double noise_density,
                                           double mean_span_len, const VocabLayout& layout,
                                           Rng& rng) {
  if (!(noise_density > 0.0 && noise_density < 1.0)) {
    throw ContractError("span_corrupt: noise density must lie in (0, 1)");
  }
  if (!(mean_span_len > 0.0)) throw ContractError("span_corrupt: mean span length must be positive");
  const std::size_t len = tokens.size();
  if (len < 4) return std::nullopt;

  SpanCorruption out;
  std::size_t noise = static_cast<std::size_t>(std::lround(static_cast<double>(len) * noise_density));
  noise = std::min(noise, len - 1);
  if (noise == 0) {
    out.input.assign(tokens.begin(), tokens.end());
    out.target = {layout.eos()};
    return out;
  }
  std::size_t spans = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(static_cast<double>(noise) / mean_span_len)));
  spans = std::min({spans, noise, len - noise, static_cast<std::size_t>(layout.n_sentinels)});

  const auto noise_parts = random_partition(noise, spans, rng);
  const auto keep_parts = random_partition(len - noise, spans, rng);
  std::size_t pos = 0;
  for (std::size_t s = 0; s < spans; ++s) {
    out.input.insert(out.input.end(), tokens.begin() + static_cast<std::ptrdiff_t>(pos),
                     tokens.begin() + static_cast<std::ptrdiff_t>(pos + keep_parts[s]));
    pos += keep_parts[s];
    const TokenId sentinel = layout.sentinel(static_cast<int>(s));
    out.input.push_back(sentinel);
    out.target.push_back(sentinel);
    out.target.insert(out.target.end(), tokens.begin() + static_cast<std::ptrdiff_t>(pos),
                      tokens.begin() + static_cast<std::ptrdiff_t>(pos + noise_parts[s]));
    pos += noise_parts[s];
  }
  out.target.push_back(layout.eos());
  out.noise_tokens = noise;
  return out;
}

TokenSeq splice(std::span<const TokenId> input, std::span<const TokenId> target,
                const VocabLayout& layout) {
  // Locate each sentinel's span inside the target.
  std::vector<std::pair<std::size_t, std::size_t>> spans(static_cast<std::size_t>(layout.n_sentinels),
                                                         {0, 0});
  std::vector<bool> seen(spans.size(), false);
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (!layout.is_sentinel(target[i])) continue;
    const auto s = static_cast<std::size_t>(target[i] - layout.sentinel(0));
    std::size_t j = i + 1;
    while (j < target.size() && !layout.is_sentinel(target[j]) && target[j] != layout.eos()) ++j;
    spans[s] = {i + 1, j};
    seen[s] = true;
  }
  TokenSeq out;
  for (TokenId t : input) {
    if (!layout.is_sentinel(t)) {
      out.push_back(t);
      continue;
    }
    const auto s = static_cast<std::size_t>(t - layout.sentinel(0));
    if (!seen[s]) throw FormatError("splice: sentinel without target span");
    out.insert(out.end(), target.begin() + static_cast<std::ptrdiff_t>(spans[s].first),
               target.begin() + static_cast<std::ptrdiff_t>(spans[s].second));
  }
  return out;
}

std::span<const TokenId> target_content(const Example& ex, const VocabLayout& layout) {
  std::span<const TokenId> t = ex.target;
  if (!t.empty() && t.back() == layout.eos()) t = t.first(t.size() - 1);
  return t;
}

Example gen_task(const SyntheticLanguage& lang, const BigramChain& chain, const VocabLayout& layout,
                 int max_len, Rng& rng) {
  const TokenSeq pivot = gen_pivot(chain, max_len, rng);
  TokenSeq evens;
  for (std::size_t i = 0; i < pivot.size(); i += 2) evens.push_back(pivot[i]);
  Example ex{lang.id(), lang.render(pivot), lang.render(evens)};
  ex.target.push_back(layout.eos());
  return ex;
}

std::optional<LidResult> lid(std::span<const TokenId> tokens, const VocabLayout& layout) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(layout.n_slices), 0);
  std::size_t total = 0;
  for (TokenId t : tokens) {
    if (auto l = layout.slice_of(t)) {
      ++counts[static_cast<std::size_t>(l->index)];
      ++total;
    }
  }
  if (total == 0) return std::nullopt;
  const auto best = std::max_element(counts.begin(), counts.end());  // first max wins ties
  return LidResult{LanguageId{static_cast<int>(best - counts.begin())},
                   static_cast<double>(*best) / static_cast<double>(total)};
}

double meaning_match(std::span<const TokenId> output, std::span<const TokenId> reference,
                     const LanguageSet& langs) {
  const auto lo = lid(output, langs.layout);
  const auto lr = lid(reference, langs.layout);
  if (!lo || !lr) throw Undetermined("meaning_match: language of a sequence is undetermined");
  const SyntheticLanguage& so = langs.at(lo->lang);
  const SyntheticLanguage& sr = langs.at(lr->lang);
  const std::size_t n = std::max(output.size(), reference.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(output.size(), reference.size()); ++i) {
    const auto a = so.derender_one(output[i]);
    const auto b = sr.derender_one(reference[i]);
    if (a && b && *a == *b) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

void DataConfig::validate() const {
  layout().validate();
  if (n_languages <= 0) throw ConfigError("data: n_languages must be positive");
  if (n_reserved < 0) throw ConfigError("data: n_reserved must be non-negative");
  if (max_len < 12) throw ConfigError("data: max_len must be at least 12");
  if (related_to && (*related_to < 0 || *related_to >= n_languages)) {
    throw ConfigError("data: related_to must name a trained language");
  }
  if (!(noise_density > 0.0 && noise_density < 1.0)) {
    throw ConfigError("data: noise_density must lie in (0, 1)");
  }
  if (!(cognate_rate >= 0.0 && cognate_rate <= 1.0)) {
    throw ConfigError("data: cognate_rate must lie in [0, 1]");
  }
  for (int n : {pretrain_per_lang, heldout_per_lang, task_train_per_lang, task_dev_per_lang,
                task_test_per_lang}) {
    if (n < 0) throw ConfigError("data: split sizes must be non-negative");
  }
}

LanguageSet make_languages(const DataConfig& cfg) {
  return LanguageSet::make(cfg.layout(), cfg.n_languages, cfg.lexicon_seed, cfg.related_to,
                           cfg.cognate_rate);
}

BigramChain make_chain(const DataConfig& cfg) {
  return BigramChain::from_seed(cfg.grammar_seed, cfg.base_vocab, cfg.branching);
}

namespace {

enum class Split : std::uint64_t { Pretrain = 1, Heldout, TaskTrain, TaskDev, TaskTest };

Rng split_rng(const DataConfig& cfg, Split split, int lang) {
  return Rng(mix_seed(mix_seed(cfg.sample_seed, static_cast<std::uint64_t>(split)),
                      static_cast<std::uint64_t>(lang)));
}

void add_span_examples(const DataConfig& cfg, const LanguageSet& langs, const BigramChain& chain,
                       Split split, int per_lang, std::vector<Example>& out) {
  const VocabLayout layout = cfg.layout();
  for (int l = 0; l < cfg.n_languages; ++l) {
    Rng rng = split_rng(cfg, split, l);
    const SyntheticLanguage& lang = langs.at(LanguageId{l});
    for (int produced = 0; produced < per_lang;) {
      const TokenSeq text = lang.render(gen_pivot(chain, cfg.max_len, rng));
      auto sc = span_corrupt(text, cfg.noise_density, cfg.mean_span, layout, rng);
      if (!sc) continue;
      out.push_back(Example{LanguageId{l}, std::move(sc->input), std::move(sc->target)});
      ++produced;
    }
  }
}

void add_task_examples(const DataConfig& cfg, const LanguageSet& langs, const BigramChain& chain,
                       Split split, int per_lang, int n_langs, std::vector<Example>& out) {
  const VocabLayout layout = cfg.layout();
  for (int l = 0; l < n_langs; ++l) {
    Rng rng = split_rng(cfg, split, l);
    for (int i = 0; i < per_lang; ++i) {
      out.push_back(gen_task(langs.at(LanguageId{l}), chain, layout, cfg.max_len, rng));
    }
  }
}

}  // namespace

Corpus generate_corpus(const DataConfig& cfg) {
  cfg.validate();
  const LanguageSet langs = make_languages(cfg);
  const BigramChain chain = make_chain(cfg);
  const int all_slots = cfg.layout().n_slices;
  Corpus c;
  add_span_examples(cfg, langs, chain, Split::Pretrain, cfg.pretrain_per_lang, c.pretrain);
  add_span_examples(cfg, langs, chain, Split::Heldout, cfg.heldout_per_lang, c.pretrain_heldout);
  add_task_examples(cfg, langs, chain, Split::TaskTrain, cfg.task_train_per_lang, cfg.n_languages,
                    c.task_train);
  add_task_examples(cfg, langs, chain, Split::TaskDev, cfg.task_dev_per_lang, cfg.n_languages,
                    c.task_dev);
  add_task_examples(cfg, langs, chain, Split::TaskTest, cfg.task_test_per_lang, all_slots,
                    c.task_test);
  return c;
}

std::vector<Example> filter_language(const std::vector<Example>& xs, LanguageId lang) {
  std::vector<Example> out;
  std::copy_if(xs.begin(), xs.end(), std::back_inserter(out),
               [&](const Example& e) { return e.lang == lang; });
  return out;
}

}  // namespace mmt
