// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace ltc {

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// Hashing word tokenizer: ASCII-lowercase, split on runs of ASCII
/// non-alphanumerics (bytes >= 0x80 stay inside words), and map each word to
/// kLowReserved + fnv1a64(word) % (vocab_size - kReservedCount).
std::vector<std::int32_t> tokenize(std::string_view text, std::size_t vocab_size);

/// Word-token id of a single already-normalized word.
std::int32_t word_id(std::string_view word, std::size_t vocab_size);

/// Instruction text opening every listwise prompt.
inline constexpr std::string_view kListwiseInstruction =
    "rank the following passages by their relevance to the search query";

}  // namespace ltc
