// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mmt/error.hpp"

namespace mmt {

std::uint64_t fnv1a64(const unsigned char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  template <typename T>
  void le(T v) {
    auto u = static_cast<std::make_unsigned_t<T>>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf_.push_back(static_cast<unsigned char>(u & 0xff));
      u = static_cast<decltype(u)>(u >> 8);
    }
  }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  void str32(const std::string& s) {
    le(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<unsigned char>& buf() { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const std::vector<unsigned char>& b, std::size_t end) : b_(b), end_(end) {}
  void need(std::size_t n) {
    if (end_ - pos_ < n) throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  template <typename T>
  T le() {
    need(sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u = static_cast<decltype(u)>(u | (static_cast<decltype(u)>(b_[pos_ + i]) << (8 * i)));
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<unsigned char>& b_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_checkpoint(const Model& model, const RunConfig& cfg) {
  Writer w;
  w.bytes("MMT5", 4);
  w.le(kCheckpointVersion);
  const std::string text = cfg.to_text();
  w.le(static_cast<std::uint64_t>(text.size()));
  w.bytes(text.data(), text.size());
  w.le(static_cast<std::uint64_t>(model.params().size()));
  for (const Param& p : model.params()) {
    w.str32(p.name);
    w.le(static_cast<std::uint8_t>(p.group));
    w.le(static_cast<std::int32_t>(p.language));
    w.le(static_cast<std::uint32_t>(p.value.dim()));
    for (std::size_t e : p.value.shape()) w.le(static_cast<std::uint64_t>(e));
    for (double v : p.value.data()) w.f64(v);
  }
  const std::uint64_t sum = fnv1a64(w.buf().data(), w.buf().size());
  w.le(sum);
  return std::move(w.buf());
}

LoadedCheckpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "MMT5", 4) != 0) {
    throw FormatError("not a checkpoint (bad magic)");
  }
  const std::size_t body = bytes.size() - 8;
  {
    Reader r(bytes, bytes.size());
    r.str(body);
    const auto stored = r.le<std::uint64_t>();
    if (stored != fnv1a64(bytes.data(), body)) throw FormatError("checkpoint checksum mismatch");
  }
  Reader r(bytes, body);
  r.str(4);
  const auto version = r.le<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto text_len = r.le<std::uint64_t>();
  RunConfig cfg = RunConfig::parse(r.str(static_cast<std::size_t>(text_len)), "checkpoint config");
  Model model(cfg.model, cfg.experiment.variant, 0);
  const auto n = r.le<std::uint64_t>();
  if (n != model.params().size()) {
    throw FormatError("checkpoint has " + std::to_string(n) + " parameters, config implies " +
                      std::to_string(model.params().size()));
  }
  for (Param& p : model.params()) {
    const std::string name = r.str(r.le<std::uint32_t>());
    if (name != p.name) throw FormatError("checkpoint parameter '" + name + "', expected '" + p.name + "'");
    const auto group = r.le<std::uint8_t>();
    const auto language = r.le<std::int32_t>();
    if (group != static_cast<std::uint8_t>(p.group) || language != p.language) {
      throw FormatError("checkpoint labels of '" + name + "' disagree with the model");
    }
    const auto ndim = r.le<std::uint32_t>();
    Shape shape;
    for (std::uint32_t i = 0; i < ndim; ++i) shape.push_back(static_cast<std::size_t>(r.le<std::uint64_t>()));
    if (shape != p.value.shape()) {
      throw FormatError("checkpoint shape of '" + name + "' is " + shape_str(shape) + ", expected " +
                        shape_str(p.value.shape()));
    }
    for (double& v : p.value.mutable_data()) v = r.f64();
  }
  if (r.pos() != body) throw FormatError("trailing bytes in checkpoint");
  return {std::move(cfg), std::move(model)};
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const RunConfig& cfg) {
  const std::vector<unsigned char> bytes = encode_checkpoint(model, cfg);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const RunConfig& requested) {
  LoadedCheckpoint ck = load_checkpoint(path);
  try {
    check_compatible(ck.config, requested);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return ck;
}

}  // namespace mmt
