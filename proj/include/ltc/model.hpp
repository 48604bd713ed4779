// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ltc/compression.hpp"
#include "ltc/tensor.hpp"

namespace ltc {

/// Reserved token ids. Low ids carry prompt structure; the top
/// kMaxIdentifiers ids of the vocabulary are the listwise document
/// identifiers. Word tokens occupy everything in between.
namespace special {
inline constexpr std::int32_t kPad = 0;
inline constexpr std::int32_t kSeparator = 1;
inline constexpr std::int32_t kRankTrigger = 2;
inline constexpr std::size_t kLowReserved = 4;
inline constexpr std::size_t kMaxIdentifiers = 20;
inline constexpr std::size_t kReservedCount = kLowReserved + kMaxIdentifiers;

/// Token id of document identifier j (1-based).
std::int32_t identifier(std::size_t vocab_size, std::size_t j);
}  // namespace special

struct ModelConfig {
  std::size_t num_layers = 8;
  std::size_t hidden = 64;
  std::size_t num_heads = 4;
  std::size_t mlp_dim = 256;
  std::size_t vocab_size = 4096;
  std::size_t max_seq = 1024;
  double rope_base = 10000.0;

  std::size_t head_dim() const noexcept { return num_heads ? hidden / num_heads : 0; }
  /// Throws ConfigError on inconsistent sizes.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

inline constexpr double kNormEps = 1e-6;

template <typename T>
struct LayerWeights {
  std::vector<T> attn_norm;
  Matrix<T> wq, wk, wv, wo;  // hidden x hidden, applied as x * W
  std::vector<T> mlp_norm;
  Matrix<T> w_up;    // hidden x mlp_dim
  Matrix<T> w_down;  // mlp_dim x hidden
};

/// All learnable weights. Tensor declaration order (see visit) is the
/// checkpoint order.
template <typename T>
struct Parameters {
  ModelConfig config;
  Matrix<T> embedding;  // vocab x hidden
  std::vector<LayerWeights<T>> layers;
  std::vector<T> final_norm;
  std::vector<T> score_head;   // hidden
  Matrix<T> identifier_rows;   // kMaxIdentifiers x hidden

  /// Seeded init: matrices uniform in +-1/sqrt(fan_in), embeddings in +-1,
  /// norm gains 1.
  static Parameters init(const ModelConfig& config, std::uint64_t seed);
  static Parameters zeros(const ModelConfig& config);

  template <typename F>
  void visit(F&& fn) {
    visit_impl(*this, fn);
  }
  template <typename F>
  void visit(F&& fn) const {
    visit_impl(*this, fn);
  }

  std::size_t parameter_count() const;

  template <typename U>
  Parameters<U> cast() const;

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& self, F& fn) {
    auto as_span = [](auto& container) { return std::span(container.data(), container.size()); };
    fn("embedding", self.embedding.values());
    for (auto& layer : self.layers) {
      fn("attn_norm", as_span(layer.attn_norm));
      fn("wq", layer.wq.values());
      fn("wk", layer.wk.values());
      fn("wv", layer.wv.values());
      fn("wo", layer.wo.values());
      fn("mlp_norm", as_span(layer.mlp_norm));
      fn("w_up", layer.w_up.values());
      fn("w_down", layer.w_down.values());
    }
    fn("final_norm", as_span(self.final_norm));
    fn("score_head", as_span(self.score_head));
    fn("identifier_rows", self.identifier_rows.values());
  }
};

/// Activations flowing between layers.
template <typename T>
struct HiddenStates {
  Matrix<T> activations;               // n x hidden
  std::vector<std::int32_t> positions;  // strictly increasing, length n
  Matrix<T> mask;                       // n x n additive causal mask
  std::size_t current_layer = 0;        // number of layers already applied
};

/// Per-layer intermediates kept for the backward pass.
template <typename T>
struct LayerTrace {
  Matrix<T> input;
  std::vector<std::int32_t> positions;
  std::vector<T> inv_rms_attn;
  Matrix<T> normed_attn;
  Matrix<T> q, k, v;           // q and k after rotary
  std::vector<Matrix<T>> probs;  // per head, n x n
  Matrix<T> attn_concat;
  Matrix<T> mid;
  std::vector<T> inv_rms_mlp;
  Matrix<T> normed_mlp;
  Matrix<T> up;                // before GELU
  Matrix<T> act;
};

template <typename T>
struct ForwardTrace {
  std::vector<LayerTrace<T>> layers;
  std::optional<SegmentMap> pooling;  // applied to the input of layers[pool_index]
  std::size_t pool_index = 0;
  Matrix<T> pre_pool;                  // hidden states before pooling
  Matrix<T> pre_final;                 // input to the final norm
  std::vector<T> inv_rms_final;
};

template <typename T>
HiddenStates<T> embed(std::span<const std::int32_t> tokens, const Parameters<T>& params);

template <typename T>
HiddenStates<T> layer_forward(const HiddenStates<T>& hs, const LayerWeights<T>& weights,
                              const ModelConfig& config, LayerTrace<T>* trace = nullptr);

/// Full forward pass with the compression hook at the input of layer
/// ltc.target_layer. With a layout, only document spans are pooled.
/// Returns the final-normed hidden states.
template <typename T>
HiddenStates<T> forward_with_ltc(std::span<const std::int32_t> tokens,
                                 const Parameters<T>& params, const LtcConfig& ltc,
                                 const DocumentLayout* layout = nullptr,
                                 ForwardTrace<T>* trace = nullptr);

/// `[query] [SEP] [document]`, truncating the document tail to fit max_seq.
std::vector<std::int32_t> assemble_pointwise(std::span<const std::int32_t> query,
                                             std::span<const std::int32_t> doc,
                                             const ModelConfig& config);

template <typename T>
T pointwise_score(std::span<const std::int32_t> query, std::span<const std::int32_t> doc,
                  const Parameters<T>& params, const LtcConfig& ltc);

struct ListwisePrompt {
  std::vector<std::int32_t> tokens;
  DocumentLayout layout;
};

/// `[instruction][query][ID_1][doc_1]...[ID_k][doc_k][TRIGGER]`. Identifier
/// markers and the trigger count as instruction tokens so only document
/// bodies are compressible.
ListwisePrompt assemble_listwise(std::span<const std::int32_t> query,
                                 std::span<const std::vector<std::int32_t>> docs,
                                 const ModelConfig& config);

/// Logits of the k identifier tokens at the final position.
template <typename T>
std::vector<T> listwise_identifier_logits(std::span<const std::int32_t> query,
                                          std::span<const std::vector<std::int32_t>> docs,
                                          const Parameters<T>& params, const LtcConfig& ltc);

/// Indices sorted by logit descending, ties to the lower index.
template <typename T>
std::vector<std::size_t> order_by_logits(std::span<const T> logits);

}  // namespace ltc
