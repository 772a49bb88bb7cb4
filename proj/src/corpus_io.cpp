// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmt/corpus_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mmt/error.hpp"

namespace mmt {

namespace {

struct SplitFile {
  const char* name;
  std::vector<Example> Corpus::*member;
};

constexpr SplitFile kSplits[] = {
    {"pretrain", &Corpus::pretrain},     {"pretrain_heldout", &Corpus::pretrain_heldout},
    {"task_train", &Corpus::task_train}, {"task_dev", &Corpus::task_dev},
    {"task_test", &Corpus::task_test},
};

void write_ids(std::ostream& os, const TokenSeq& ids) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) os << ' ';
    os << ids[i];
  }
}

TokenSeq parse_ids(std::string_view field, const std::string& where) {
  TokenSeq out;
  std::size_t i = 0;
  while (i < field.size()) {
    if (field[i] == ' ') {
      ++i;
      continue;
    }
    TokenId v = 0;
    auto [p, ec] = std::from_chars(field.data() + i, field.data() + field.size(), v);
    if (ec != std::errc()) throw FormatError(where + ": bad token id");
    i = static_cast<std::size_t>(p - field.data());
    out.push_back(v);
  }
  return out;
}

}  // namespace

void write_examples(std::ostream& os, const std::vector<Example>& xs) {
  for (const Example& e : xs) {
    os << e.lang.index << '\t';
    write_ids(os, e.input);
    os << '\t';
    write_ids(os, e.target);
    os << '\n';
  }
}

std::vector<Example> read_examples(std::istream& is, const std::string& origin) {
  std::vector<Example> out;
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    const std::string where = origin + ":" + std::to_string(n);
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw FormatError(where + ": expected three tab-separated fields");
    Example e;
    const std::string_view sv(line);
    const auto lang = parse_ids(sv.substr(0, t1), where);
    if (lang.size() != 1) throw FormatError(where + ": bad language field");
    e.lang = LanguageId{lang[0]};
    e.input = parse_ids(sv.substr(t1 + 1, t2 - t1 - 1), where);
    e.target = parse_ids(sv.substr(t2 + 1), where);
    out.push_back(std::move(e));
  }
  return out;
}

std::string layout_text(const VocabLayout& layout, int n_trained) {
  std::ostringstream os;
  os << "n_slices = " << layout.n_slices << '\n'
     << "n_trained = " << n_trained << '\n'
     << "base_vocab = " << layout.base_vocab << '\n'
     << "n_sentinels = " << layout.n_sentinels << '\n'
     << "pad = " << layout.pad() << '\n'
     << "bos = " << layout.bos() << '\n'
     << "eos = " << layout.eos() << '\n'
     << "first_sentinel = " << layout.sentinel(0) << '\n'
     << "vocab_size = " << layout.vocab_size() << '\n';
  return os.str();
}

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus, const VocabLayout& layout,
                  int n_trained) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto open = [&](const std::string& file) {
    std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / file).string());
    return out;
  };
  {
    auto out = open("layout.txt");
    out << layout_text(layout, n_trained);
  }
  for (const SplitFile& s : kSplits) {
    auto out = open(std::string(s.name) + ".tsv");
    write_examples(out, corpus.*s.member);
    if (!out) throw IoError("failed writing " + (dir / (std::string(s.name) + ".tsv")).string());
  }
}

Corpus read_corpus(const std::filesystem::path& dir, const VocabLayout& layout, int n_trained) {
  auto slurp = [&](const std::string& file) {
    std::ifstream in(dir / file, std::ios::binary);
    if (!in) throw IoError("cannot open " + (dir / file).string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  if (slurp("layout.txt") != layout_text(layout, n_trained)) {
    throw FormatError((dir / "layout.txt").string() + " does not match the configured vocabulary layout");
  }
  Corpus c;
  for (const SplitFile& s : kSplits) {
    std::istringstream in(slurp(std::string(s.name) + ".tsv"));
    c.*s.member = read_examples(in, (dir / (std::string(s.name) + ".tsv")).string());
    for (const Example& e : c.*s.member) {
      if (e.lang.index < 0 || e.lang.index >= layout.n_slices) {
        throw FormatError(std::string(s.name) + ".tsv: language " + std::to_string(e.lang.index) +
                          " outside the layout");
      }
      for (const TokenSeq* seq : {&e.input, &e.target}) {
        for (TokenId t : *seq) {
          if (t < 0 || t >= layout.vocab_size()) {
            throw FormatError(std::string(s.name) + ".tsv: token " + std::to_string(t) + " outside the vocabulary");
          }
        }
      }
    }
  }
  return c;
}

}  // namespace mmt
