// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "mmt/kernels.hpp"

namespace mmt::kernels {
namespace {

const KernelTable* initial_table() {
  const KernelTable* best = avx2_table();
  if (const char* forced = std::getenv("MMT_KERNELS")) {
    const std::string_view want{forced};
    if (want == "scalar") return &scalar_table();
    if (want == "avx2" && best != nullptr) return best;
  }
  return best != nullptr ? best : &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

bool select(std::string_view name) {
  if (name == "scalar") {
    slot().store(&scalar_table(), std::memory_order_release);
    return true;
  }
  if (name == "avx2") {
    if (const KernelTable* t = avx2_table()) {
      slot().store(t, std::memory_order_release);
      return true;
    }
  }
  return false;
}

}  // namespace mmt::kernels
