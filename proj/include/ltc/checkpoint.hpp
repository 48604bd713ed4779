// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "ltc/model.hpp"

namespace ltc {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (little-endian): "LTCM", u32 version, u32 num_layers, hidden,
// num_heads, head_dim, mlp_dim, vocab_size, max_seq, f64 rope_base, then every
// tensor of Parameters::visit as f32.
std::string serialize_checkpoint(const Parameters<float>& params);
Parameters<float> deserialize_checkpoint(std::string_view bytes, const std::string& origin = "<memory>");

void save_checkpoint(const Parameters<float>& params, const std::string& path);
Parameters<float> load_checkpoint(const std::string& path);

}  // namespace ltc
