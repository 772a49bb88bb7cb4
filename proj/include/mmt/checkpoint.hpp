// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mmt/model.hpp"
#include "mmt/run_config.hpp"

// Binary layout, all integers little-endian:
//   "MMT5"  u32 version
//   u64 config_len, config text (RunConfig::to_text)
//   u64 n_params, then per parameter:
//     u32 name_len, name, u8 group, i32 language, u32 ndim, u64 extents[ndim],
//     f64 values (IEEE-754 bit patterns)
//   u64 FNV-1a 64 of every preceding byte

namespace mmt {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<unsigned char> encode_checkpoint(const Model& model, const RunConfig& cfg);

struct LoadedCheckpoint {
  RunConfig config;
  Model model;
};

/// Throws FormatError on bad magic, version, checksum or any parameter that
/// does not match the model the embedded config describes.
LoadedCheckpoint decode_checkpoint(const std::vector<unsigned char>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Model& model, const RunConfig& cfg);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Loads and checks the checkpoint against `requested` (check_compatible).
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const RunConfig& requested);

std::uint64_t fnv1a64(const unsigned char* data, std::size_t n);

}  // namespace mmt
