// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#include "ltc/tokenizer.hpp"

#include <string>

#include "ltc/error.hpp"
#include "ltc/model.hpp"

namespace ltc {

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::int32_t word_id(std::string_view word, std::size_t vocab_size) {
  if (vocab_size <= special::kReservedCount) {
    throw ConfigError("vocabulary of " + std::to_string(vocab_size) +
                      " leaves no room for word tokens");
  }
  const std::uint64_t span = vocab_size - special::kReservedCount;
  return static_cast<std::int32_t>(special::kLowReserved + fnv1a64(word) % span);
}

namespace {
bool is_word_byte(unsigned char c) {
  return c >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
}  // namespace

std::vector<std::int32_t> tokenize(std::string_view text, std::size_t vocab_size) {
  std::vector<std::int32_t> ids;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) ids.push_back(word_id(word, vocab_size));
    word.clear();
  };
  for (unsigned char c : text) {
    if (!is_word_byte(c)) {
      flush();
      continue;
    }
    word.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
  }
  flush();
  return ids;
}

}  // namespace ltc
