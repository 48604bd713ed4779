// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "ltc/tensor.hpp"

namespace ltc {

/// Where and how hard hidden states are pooled. `target_layer` is 1-based:
/// layers 1..target_layer-1 see the full sequence, layers target_layer..L see
/// the pooled one. rate = 1.0 is an exact no-op.
struct LtcConfig {
  std::optional<std::size_t> target_layer;
  double rate = 1.0;

  static LtcConfig disabled() { return {}; }
  static LtcConfig at(std::size_t layer, double rate) { return {layer, rate}; }

  bool enabled() const noexcept { return target_layer.has_value(); }
  /// Throws ConfigError unless rate is in (0, 1] and target_layer in [1, num_layers].
  void validate(std::size_t num_layers) const;
};

/// True when rate lies in (0, 1].
bool valid_rate(double rate) noexcept;

enum class SpanRole : std::uint8_t { kInstruction, kQuery, kDocument };

struct Span {
  SpanRole role = SpanRole::kInstruction;
  std::size_t document = 0;  // 1-based document number for kDocument spans, else 0
  std::size_t begin = 0;
  std::size_t end = 0;       // half-open

  std::size_t length() const noexcept { return end - begin; }
  bool operator==(const Span&) const = default;
};

/// Token-span bookkeeping for listwise prompts: spans are contiguous, cover
/// [0, n), and the k document spans are numbered 1..k in order.
class DocumentLayout {
 public:
  DocumentLayout() = default;
  explicit DocumentLayout(std::vector<Span> spans);

  const std::vector<Span>& spans() const noexcept { return spans_; }
  std::size_t length() const noexcept { return spans_.empty() ? 0 : spans_.back().end; }
  std::size_t document_count() const noexcept { return documents_; }

  /// Document number of token i, or nullopt for instruction/query tokens.
  std::optional<std::size_t> document_of(std::size_t token) const;
  /// The n x k indicator matrix: entry (i, j-1) is 1 iff token i is in document j.
  Matrix<float> document_mask() const;

  bool operator==(const DocumentLayout&) const = default;

 private:
  std::vector<Span> spans_;
  std::size_t documents_ = 0;
};

/// A pooling map: output row i is the mean of input rows [begin_i, end_i).
/// Both adaptive pooling and the document-masked variant are instances.
class SegmentMap {
 public:
  using Segment = std::pair<std::size_t, std::size_t>;

  SegmentMap() = default;
  SegmentMap(std::size_t input_rows, std::vector<Segment> segments);

  /// Segments [floor(i*n/n_out), ceil((i+1)*n/n_out)); overlapping when n_out does not divide n.
  static SegmentMap adaptive(std::size_t n, std::size_t n_out);
  static SegmentMap identity(std::size_t n);

  std::size_t input_rows() const noexcept { return input_rows_; }
  std::size_t output_rows() const noexcept { return segments_.size(); }
  const std::vector<Segment>& segments() const noexcept { return segments_; }
  bool is_identity() const noexcept;

  template <typename T>
  Matrix<T> apply(const Matrix<T>& input) const;

  /// Transpose of the linear map: each output-row gradient is spread evenly
  /// over its source segment, accumulating where segments overlap.
  template <typename T>
  Matrix<T> apply_transpose(const Matrix<T>& grad_output) const;

  /// Explicit n_out x n matrix of the map.
  Matrix<double> dense() const;

 private:
  std::size_t input_rows_ = 0;
  std::vector<Segment> segments_;
};

/// max(1, floor(n * rate)).
std::size_t compressed_length(std::size_t n, double rate);

template <typename T>
Matrix<T> adaptive_avg_pool(const Matrix<T>& h, std::size_t n_out);

template <typename T>
struct PositionsAndMask {
  std::vector<std::int32_t> positions;
  Matrix<T> mask;  // lower-triangular additive causal mask
};

template <typename T>
PositionsAndMask<T> rebuild_positions_and_mask(std::size_t n_out);

/// Pooling plan for a listwise layout: instruction/query rows map 1:1, each
/// document span of length n_j pools to compressed_length(n_j, rate) rows.
struct DocumentPoolPlan {
  SegmentMap map;
  DocumentLayout layout;  // layout of the pooled sequence
};

DocumentPoolPlan plan_document_pool(const DocumentLayout& layout, double rate);

template <typename T>
std::pair<Matrix<T>, DocumentLayout> masked_document_pool(const Matrix<T>& h,
                                                          const DocumentLayout& layout,
                                                          double rate);

}  // namespace ltc
