// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#include "ltc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace ltc {

namespace {

constexpr char kMagic[4] = {'L', 'T', 'C', 'M'};

template <typename U>
void put_le(std::string& out, U value) {
  static_assert(std::is_unsigned_v<U>);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(std::string_view bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

  template <typename U>
  U get_le() {
    if (pos_ + sizeof(U) > bytes_.size()) {
      throw FormatError(origin_, 1, "checkpoint truncated at byte " + std::to_string(pos_));
    }
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      value |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return value;
  }

  std::string_view take(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw FormatError(origin_, 1, "checkpoint truncated at byte " + std::to_string(pos_));
    }
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Parameters<float>& params) {
  const auto& c = params.config;
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  for (std::size_t v : {c.num_layers, c.hidden, c.num_heads, c.head_dim(), c.mlp_dim, c.vocab_size,
                        c.max_seq}) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  }
  put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(c.rope_base));
  out.reserve(out.size() + 4 * params.parameter_count());
  params.visit([&](std::string_view, std::span<const float> values) {
    for (float v : values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  });
  return out;
}

Parameters<float> deserialize_checkpoint(std::string_view bytes, const std::string& origin) {
  Reader in(bytes, origin);
  if (in.take(4) != std::string_view(kMagic, 4)) throw FormatError(origin, 1, "bad checkpoint magic");
  const auto version = in.get_le<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError(origin, 1, "unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig c;
  c.num_layers = in.get_le<std::uint32_t>();
  c.hidden = in.get_le<std::uint32_t>();
  c.num_heads = in.get_le<std::uint32_t>();
  const std::size_t head_dim = in.get_le<std::uint32_t>();
  c.mlp_dim = in.get_le<std::uint32_t>();
  c.vocab_size = in.get_le<std::uint32_t>();
  c.max_seq = in.get_le<std::uint32_t>();
  c.rope_base = std::bit_cast<double>(in.get_le<std::uint64_t>());
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(origin, 1, e.what());
  }
  if (head_dim != c.head_dim()) {
    throw FormatError(origin, 1, "head_dim " + std::to_string(head_dim) +
                                     " inconsistent with hidden/num_heads");
  }
  auto params = Parameters<float>::zeros(c);
  params.visit([&](std::string_view, std::span<float> values) {
    for (auto& v : values) v = std::bit_cast<float>(in.get_le<std::uint32_t>());
  });
  if (!in.done()) throw FormatError(origin, 1, "trailing bytes after checkpoint tensors");
  return params;
}

void save_checkpoint(const Parameters<float>& params, const std::string& path) {
  const auto bytes = serialize_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

Parameters<float> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes, path);
}

}  // namespace ltc
