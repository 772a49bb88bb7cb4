// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmt/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mmt/error.hpp"
#include "mmt/freezing.hpp"

namespace mmt {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
T parse_number(const std::string& v, const std::string& where) {
  T out{};
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(where + ": cannot parse '" + v + "'");
  return out;
}

double parse_double(const std::string& v, const std::string& where) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ConfigError(where + ": cannot parse '" + v + "'");
  return out;
}

std::vector<LanguageId> parse_langs(const std::string& v, const std::string& where) {
  std::vector<LanguageId> out;
  if (v == "all") return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(LanguageId{parse_number<int>(trim(item), where)});
  }
  if (out.empty()) throw ConfigError(where + ": empty language list");
  return out;
}

std::string langs_text(const std::vector<LanguageId>& ls) {
  if (ls.empty()) return "all";
  std::string out;
  for (std::size_t i = 0; i < ls.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(ls[i].index);
  }
  return out;
}

// One entry per key: how to print it and how to assign it.
struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

template <typename T>
Field int_field(T RunConfig::*section, int T::*member) {
  return {[=](const RunConfig& c) { return std::to_string(c.*section.*member); },
          [=](RunConfig& c, const std::string& v, const std::string& w) {
            c.*section.*member = parse_number<int>(v, w);
          }};
}

template <typename T>
Field u64_field(T RunConfig::*section, std::uint64_t T::*member) {
  return {[=](const RunConfig& c) { return std::to_string(c.*section.*member); },
          [=](RunConfig& c, const std::string& v, const std::string& w) {
            c.*section.*member = parse_number<std::uint64_t>(v, w);
          }};
}

template <typename T>
Field double_field(T RunConfig::*section, double T::*member) {
  return {[=](const RunConfig& c) { return fmt_double(c.*section.*member); },
          [=](RunConfig& c, const std::string& v, const std::string& w) {
            c.*section.*member = parse_double(v, w);
          }};
}

using Schema = std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>>;

const Schema& schema() {
  static const Schema s = [] {
    using M = ModelConfig;
    using D = DataConfig;
    using T = TrainSettings;
    const auto m = &RunConfig::model;
    const auto d = &RunConfig::data;
    const auto t = &RunConfig::train;
    Schema out;
    out.push_back({"model",
                   {{"n_enc_layers", int_field(m, &M::n_enc_layers)},
                    {"n_dec_layers", int_field(m, &M::n_dec_layers)},
                    {"d_model", int_field(m, &M::d_model)},
                    {"n_heads", int_field(m, &M::n_heads)},
                    {"d_ff", int_field(m, &M::d_ff)},
                    {"d_bottleneck", int_field(m, &M::d_bottleneck)},
                    {"norm_eps", double_field(m, &M::norm_eps)},
                    {"surface_tie", double_field(m, &M::surface_tie)}}});
    Field related{[](const RunConfig& c) {
                    return c.data.related_to ? std::to_string(*c.data.related_to) : std::string("none");
                  },
                  [](RunConfig& c, const std::string& v, const std::string& w) {
                    if (v == "none") {
                      c.data.related_to.reset();
                    } else {
                      c.data.related_to = parse_number<int>(v, w);
                    }
                  }};
    out.push_back({"data",
                   {{"n_languages", int_field(d, &D::n_languages)},
                    {"n_reserved", int_field(d, &D::n_reserved)},
                    {"base_vocab", int_field(d, &D::base_vocab)},
                    {"n_sentinels", int_field(d, &D::n_sentinels)},
                    {"max_len", int_field(d, &D::max_len)},
                    {"branching", int_field(d, &D::branching)},
                    {"related_to", related},
                    {"cognate_rate", double_field(d, &D::cognate_rate)},
                    {"grammar_seed", u64_field(d, &D::grammar_seed)},
                    {"lexicon_seed", u64_field(d, &D::lexicon_seed)},
                    {"sample_seed", u64_field(d, &D::sample_seed)},
                    {"pretrain_per_lang", int_field(d, &D::pretrain_per_lang)},
                    {"heldout_per_lang", int_field(d, &D::heldout_per_lang)},
                    {"task_train_per_lang", int_field(d, &D::task_train_per_lang)},
                    {"task_dev_per_lang", int_field(d, &D::task_dev_per_lang)},
                    {"task_test_per_lang", int_field(d, &D::task_test_per_lang)},
                    {"noise_density", double_field(d, &D::noise_density)},
                    {"mean_span", double_field(d, &D::mean_span)}}});
    out.push_back({"train",
                   {{"lr", double_field(t, &T::lr)},
                    {"warmup_steps", int_field(t, &T::warmup_steps)},
                    {"pretrain_steps", int_field(t, &T::pretrain_steps)},
                    {"finetune_steps", int_field(t, &T::finetune_steps)},
                    {"batch_size", int_field(t, &T::batch_size)},
                    {"seed", u64_field(t, &T::seed)},
                    {"eval_every", int_field(t, &T::eval_every)},
                    {"finetune_eval_every", int_field(t, &T::finetune_eval_every)}}});
    out.push_back(
        {"experiment",
         {{"freeze", {[](const RunConfig& c) { return c.experiment.freeze; },
                      [](RunConfig& c, const std::string& v, const std::string&) { c.experiment.freeze = v; }}},
          {"source_languages",
           {[](const RunConfig& c) { return langs_text(c.experiment.source_languages); },
            [](RunConfig& c, const std::string& v, const std::string& w) {
              c.experiment.source_languages = parse_langs(v, w);
              if (c.experiment.source_languages.empty()) throw ConfigError(w + ": needs explicit languages");
            }}},
          {"eval_languages",
           {[](const RunConfig& c) { return langs_text(c.experiment.eval_languages); },
            [](RunConfig& c, const std::string& v, const std::string& w) {
              c.experiment.eval_languages = parse_langs(v, w);
            }}},
          {"variant",
           {[](const RunConfig& c) { return std::string(variant_name(c.experiment.variant)); },
            [](RunConfig& c, const std::string& v, const std::string& w) {
              auto parsed = parse_variant(v);
              if (!parsed) throw ConfigError(w + ": variant must be 'modular' or 'dense', got '" + v + "'");
              c.experiment.variant = *parsed;
            }}}}});
    return out;
  }();
  return s;
}

}  // namespace

RunConfig::RunConfig() {
  model.surface_tie = 0.9;
  derive();
}

void RunConfig::derive() {
  const VocabLayout layout = data.layout();
  model.n_languages = layout.n_slices;
  model.vocab_size = layout.vocab_size();
  model.max_len = data.max_len;
  model.slice_size = layout.base_vocab;
}

void RunConfig::validate() const {
  data.validate();
  model.validate();
  RunConfig derived = *this;
  derived.derive();
  if (derived.model != model) {
    throw ConfigError("model section disagrees with the fields derived from the data section");
  }
  config_from_name(experiment.freeze);
  const int slots = data.layout().n_slices;
  if (experiment.source_languages.empty()) throw ConfigError("experiment.source_languages is empty");
  for (LanguageId l : experiment.source_languages) {
    if (l.index < 0 || l.index >= data.n_languages) {
      throw ConfigError("experiment.source_languages: " + std::to_string(l.index) +
                        " is not a trained language");
    }
  }
  for (LanguageId l : experiment.eval_languages) {
    if (l.index < 0 || l.index >= slots) {
      throw ConfigError("experiment.eval_languages: " + std::to_string(l.index) + " outside [0, " +
                        std::to_string(slots) + ")");
    }
  }
  pretrain_config().validate(false);
  finetune_config().validate(true);
}

TrainConfig RunConfig::pretrain_config() const {
  TrainConfig c;
  c.lr = train.lr;
  c.warmup_steps = train.warmup_steps;
  c.steps = train.pretrain_steps;
  c.batch_size = train.batch_size;
  c.seed = mix_seed(train.seed, 0x9e7);
  c.eval_every = train.eval_every;
  return c;
}

TrainConfig RunConfig::finetune_config() const {
  TrainConfig c = pretrain_config();
  c.steps = train.finetune_steps;
  c.seed = mix_seed(train.seed, 0xf17e);
  c.eval_every = train.finetune_eval_every;
  c.languages = experiment.source_languages;
  return c;
}

std::vector<LanguageId> RunConfig::resolved_eval_languages() const {
  if (!experiment.eval_languages.empty()) return experiment.eval_languages;
  std::vector<LanguageId> all;
  for (int l = 0; l < data.layout().n_slices; ++l) all.push_back(LanguageId{l});
  return all;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [section, fields] : schema()) {
    if (!out.empty()) out += "\n";
    out += "[" + section + "]\n";
    for (const auto& [key, field] : fields) out += key + " = " + field.get(*this) + "\n";
  }
  return out;
}

RunConfig RunConfig::parse(std::string_view text, std::string_view origin) {
  RunConfig cfg;
  std::map<std::string, const Field*> fields;
  for (const auto& [section, entries] : schema()) {
    for (const auto& [key, field] : entries) fields[section + "." + key] = &field;
  }
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    std::string line = raw.substr(0, raw.find('#'));
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      bool known = false;
      for (const auto& entry : schema()) known = known || entry.first == section;
      if (!known) throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    if (section.empty()) throw ConfigError(where + ": key outside of a section");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto it = fields.find(section + "." + key);
    if (it == fields.end()) throw ConfigError(where + ": unknown key '" + key + "' in [" + section + "]");
    it->second->set(cfg, value, where + " (" + section + "." + key + ")");
  }
  cfg.derive();
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void check_compatible(const RunConfig& checkpoint, const RunConfig& requested) {
  auto fail = [](const std::string& what) {
    throw FormatError("incompatible checkpoint: " + what);
  };
  if (checkpoint.experiment.variant != requested.experiment.variant) {
    fail("checkpoint holds a " + std::string(variant_name(checkpoint.experiment.variant)) +
         " model, " + std::string(variant_name(requested.experiment.variant)) + " requested");
  }
  const ModelConfig& a = checkpoint.model;
  const ModelConfig& b = requested.model;
  if (a.n_languages != b.n_languages) {
    fail("language slots " + std::to_string(a.n_languages) + " vs " + std::to_string(b.n_languages));
  }
  if (a.n_enc_layers != b.n_enc_layers || a.n_dec_layers != b.n_dec_layers || a.d_model != b.d_model ||
      a.n_heads != b.n_heads || a.d_ff != b.d_ff || a.d_bottleneck != b.d_bottleneck ||
      a.vocab_size != b.vocab_size || a.max_len != b.max_len) {
    fail("model shapes differ");
  }
}

}  // namespace mmt
