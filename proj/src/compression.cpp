// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#include "ltc/compression.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>
#include <vector>

namespace ltc {

bool valid_rate(double rate) noexcept { return rate > 0.0 && rate <= 1.0; }

void LtcConfig::validate(std::size_t num_layers) const {
  if (!valid_rate(rate)) {
    throw ConfigError("compression rate " + std::to_string(rate) +
                      " is outside the valid interval (0,1]");
  }
  if (target_layer && (*target_layer < 1 || *target_layer > num_layers)) {
    throw ConfigError("target layer " + std::to_string(*target_layer) +
                      " is outside [1, " + std::to_string(num_layers) + "]");
  }
}

DocumentLayout::DocumentLayout(std::vector<Span> spans) : spans_(std::move(spans)) {
  std::size_t cursor = 0;
  for (const auto& span : spans_) {
    if (span.begin != cursor || span.end < span.begin) {
      throw ArgumentError("layout spans must be contiguous from 0; span [" +
                          std::to_string(span.begin) + ", " + std::to_string(span.end) +
                          ") follows position " + std::to_string(cursor));
    }
    if (span.role == SpanRole::kDocument) {
      if (span.document != documents_ + 1) {
        throw ArgumentError("document spans must be numbered 1..k in order; got " +
                            std::to_string(span.document) + " after " +
                            std::to_string(documents_));
      }
      ++documents_;
    } else if (span.document != 0) {
      throw ArgumentError("non-document span carries document number " +
                          std::to_string(span.document));
    }
    cursor = span.end;
  }
}

std::optional<std::size_t> DocumentLayout::document_of(std::size_t token) const {
  for (const auto& span : spans_) {
    if (token >= span.begin && token < span.end) {
      if (span.role == SpanRole::kDocument) return span.document;
      return std::nullopt;
    }
  }
  throw ArgumentError("token " + std::to_string(token) + " outside layout of length " +
                      std::to_string(length()));
}

Matrix<float> DocumentLayout::document_mask() const {
  Matrix<float> m(length(), documents_);
  for (const auto& span : spans_) {
    if (span.role != SpanRole::kDocument) continue;
    for (std::size_t i = span.begin; i < span.end; ++i) m(i, span.document - 1) = 1.0f;
  }
  return m;
}

SegmentMap::SegmentMap(std::size_t input_rows, std::vector<Segment> segments)
    : input_rows_(input_rows), segments_(std::move(segments)) {
  for (const auto& [b, e] : segments_) {
    if (b >= e || e > input_rows_) {
      throw ArgumentError("segment [" + std::to_string(b) + ", " + std::to_string(e) +
                          ") invalid for " + std::to_string(input_rows_) + " input rows");
    }
  }
}

SegmentMap SegmentMap::adaptive(std::size_t n, std::size_t n_out) {
  if (n_out == 0 || n_out > n) {
    throw ArgumentError("adaptive pooling output length " + std::to_string(n_out) +
                        " must be in [1, " + std::to_string(n) + "]");
  }
  std::vector<Segment> segments(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    segments[i] = {(i * n) / n_out, ((i + 1) * n + n_out - 1) / n_out};
  }
  return SegmentMap(n, std::move(segments));
}

SegmentMap SegmentMap::identity(std::size_t n) {
  std::vector<Segment> segments(n);
  for (std::size_t i = 0; i < n; ++i) segments[i] = {i, i + 1};
  return SegmentMap(n, std::move(segments));
}

bool SegmentMap::is_identity() const noexcept {
  if (segments_.size() != input_rows_) return false;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (segments_[i].first != i || segments_[i].second != i + 1) return false;
  }
  return true;
}

template <typename T>
Matrix<T> SegmentMap::apply(const Matrix<T>& input) const {
  if (input.rows() != input_rows_) {
    throw ShapeError("pooling map expects " + std::to_string(input_rows_) + " rows, got " +
                     input.shape_string());
  }
  Matrix<T> out(segments_.size(), input.cols());
  // Wide accumulation keeps the mean of a constant float segment exact.
  using Acc = std::conditional_t<std::is_same_v<T, float>, double, long double>;
  std::vector<Acc> acc;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto [b, e] = segments_[i];
    auto o = out.row(i);
    if (e - b == 1) {
      std::copy(input.row(b).begin(), input.row(b).end(), o.begin());
      continue;
    }
    acc.assign(o.size(), Acc{0});
    for (std::size_t r = b; r < e; ++r) {
      auto in = input.row(r);
      for (std::size_t c = 0; c < o.size(); ++c) acc[c] += in[c];
    }
    const auto len = static_cast<Acc>(e - b);
    for (std::size_t c = 0; c < o.size(); ++c) o[c] = static_cast<T>(acc[c] / len);
  }
  return out;
}

template <typename T>
Matrix<T> SegmentMap::apply_transpose(const Matrix<T>& grad_output) const {
  if (grad_output.rows() != segments_.size()) {
    throw ShapeError("pooling transpose expects " + std::to_string(segments_.size()) +
                     " rows, got " + grad_output.shape_string());
  }
  Matrix<T> out(input_rows_, grad_output.cols());
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto [b, e] = segments_[i];
    const T share = T{1} / static_cast<T>(e - b);
    auto g = grad_output.row(i);
    for (std::size_t r = b; r < e; ++r) {
      auto o = out.row(r);
      for (std::size_t c = 0; c < o.size(); ++c) o[c] += g[c] * share;
    }
  }
  return out;
}

Matrix<double> SegmentMap::dense() const {
  Matrix<double> m(segments_.size(), input_rows_);
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto [b, e] = segments_[i];
    for (std::size_t r = b; r < e; ++r) m(i, r) = 1.0 / static_cast<double>(e - b);
  }
  return m;
}

std::size_t compressed_length(std::size_t n, double rate) {
  // The small slack absorbs representation error in products such as
  // 100 * 0.29 = 28.999999999999996.
  const auto kept = static_cast<std::size_t>(std::floor(static_cast<double>(n) * rate + 1e-9));
  return std::max<std::size_t>(1, kept);
}

template <typename T>
Matrix<T> adaptive_avg_pool(const Matrix<T>& h, std::size_t n_out) {
  if (n_out == h.rows() && n_out > 0) return h;
  return SegmentMap::adaptive(h.rows(), n_out).apply(h);
}

template <typename T>
PositionsAndMask<T> rebuild_positions_and_mask(std::size_t n_out) {
  PositionsAndMask<T> out;
  out.positions.resize(n_out);
  for (std::size_t i = 0; i < n_out; ++i) out.positions[i] = static_cast<std::int32_t>(i);
  out.mask = Matrix<T>(n_out, n_out);
  for (std::size_t i = 0; i < n_out; ++i)
    for (std::size_t j = i + 1; j < n_out; ++j) out.mask(i, j) = kMasked<T>;
  return out;
}

DocumentPoolPlan plan_document_pool(const DocumentLayout& layout, double rate) {
  if (!valid_rate(rate)) {
    throw ArgumentError("compression rate " + std::to_string(rate) +
                        " is outside the valid interval (0,1]");
  }
  std::vector<SegmentMap::Segment> segments;
  std::vector<Span> pooled;
  segments.reserve(layout.length());
  std::size_t cursor = 0;
  for (const auto& span : layout.spans()) {
    Span out = span;
    out.begin = cursor;
    if (span.role != SpanRole::kDocument || span.length() == 0) {
      for (std::size_t r = span.begin; r < span.end; ++r) segments.emplace_back(r, r + 1);
      cursor += span.length();
    } else {
      const std::size_t kept = compressed_length(span.length(), rate);
      const auto local = SegmentMap::adaptive(span.length(), kept);
      for (const auto& [b, e] : local.segments()) segments.emplace_back(span.begin + b, span.begin + e);
      cursor += kept;
    }
    out.end = cursor;
    pooled.push_back(out);
  }
  return {SegmentMap(layout.length(), std::move(segments)), DocumentLayout(std::move(pooled))};
}

template <typename T>
std::pair<Matrix<T>, DocumentLayout> masked_document_pool(const Matrix<T>& h,
                                                          const DocumentLayout& layout,
                                                          double rate) {
  if (h.rows() != layout.length()) {
    throw ArgumentError("layout covers " + std::to_string(layout.length()) +
                        " tokens but hidden states have " + std::to_string(h.rows()) + " rows");
  }
  auto plan = plan_document_pool(layout, rate);
  return {plan.map.apply(h), std::move(plan.layout)};
}

#define LTC_INSTANTIATE(T)                                                                   \
  template Matrix<T> SegmentMap::apply(const Matrix<T>&) const;                              \
  template Matrix<T> SegmentMap::apply_transpose(const Matrix<T>&) const;                    \
  template Matrix<T> adaptive_avg_pool(const Matrix<T>&, std::size_t);                       \
  template PositionsAndMask<T> rebuild_positions_and_mask(std::size_t);                      \
  template std::pair<Matrix<T>, DocumentLayout> masked_document_pool(                        \
      const Matrix<T>&, const DocumentLayout&, double);

LTC_INSTANTIATE(float)
LTC_INSTANTIATE(double)

#undef LTC_INSTANTIATE

}  // namespace ltc
