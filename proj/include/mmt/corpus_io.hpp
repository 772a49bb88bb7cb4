// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mmt/synth_data.hpp"

// Corpus directory:
//   layout.txt            "key = value" lines describing the vocabulary
//   <split>.tsv           one example per line:
//                         <lang> TAB <input ids> TAB <target ids>
//                         ids space-separated, target ends with EOS
// Splits: pretrain, pretrain_heldout, task_train, task_dev, task_test.

namespace mmt {

void write_examples(std::ostream& os, const std::vector<Example>& xs);
/// `origin` names the source in error messages.
std::vector<Example> read_examples(std::istream& is, const std::string& origin);

std::string layout_text(const VocabLayout& layout, int n_trained);

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus, const VocabLayout& layout,
                  int n_trained);
/// Throws FormatError if layout.txt disagrees with `layout`.
Corpus read_corpus(const std::filesystem::path& dir, const VocabLayout& layout, int n_trained);

}  // namespace mmt
