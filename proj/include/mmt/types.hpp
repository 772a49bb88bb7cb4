// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <vector>

namespace mmt {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

/// Index of a language slot. Range checks happen where the number of
/// languages is known (routing, vocabulary layout).
struct LanguageId {
  int index = 0;

  friend auto operator<=>(const LanguageId&, const LanguageId&) = default;
};

}  // namespace mmt
