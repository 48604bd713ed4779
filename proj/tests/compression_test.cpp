// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>

#include "ltc/compression.hpp"
#include "oracles/brute_force.hpp"
#include "oracles/oracles.hpp"
#include "test_util.hpp"

namespace ltc {
namespace {

using testing::random_between;
using testing::random_matrix;

// Listwise-shaped layout: instruction, query, then marker + body per document,
// then a trailing marker.
DocumentLayout random_layout(Rng& rng, std::size_t max_docs = 6, std::size_t max_doc_len = 10) {
  std::vector<Span> spans;
  std::size_t at = 0;
  auto push = [&](SpanRole role, std::size_t doc, std::size_t len) {
    spans.push_back({role, doc, at, at + len});
    at += len;
  };
  push(SpanRole::kInstruction, 0, random_between(rng, 1, 4));
  push(SpanRole::kQuery, 0, random_between(rng, 1, 4));
  const auto k = random_between(rng, 1, max_docs);
  for (std::size_t j = 1; j <= k; ++j) {
    push(SpanRole::kInstruction, 0, 1);
    push(SpanRole::kDocument, j, random_between(rng, 1, max_doc_len));
  }
  push(SpanRole::kInstruction, 0, 1);
  return DocumentLayout(spans);
}

TEST(LtcConfig, Validation) {
  EXPECT_NO_THROW(LtcConfig::disabled().validate(4));
  EXPECT_NO_THROW(LtcConfig::at(4, 1.0).validate(4));
  EXPECT_THROW(LtcConfig::at(5, 0.5).validate(4), ConfigError);
  EXPECT_THROW(LtcConfig::at(0, 0.5).validate(4), ConfigError);
  EXPECT_THROW(LtcConfig::at(1, 1.5).validate(4), ConfigError);
  try {
    LtcConfig::at(1, 0.0).validate(4);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("(0,1]"), std::string::npos) << e.what();
  }
}

TEST(CompressedLength, Examples) {
  EXPECT_EQ(compressed_length(10, 0.4), 4u);
  EXPECT_EQ(compressed_length(5, 1.0), 5u);
  EXPECT_EQ(compressed_length(3, 0.2), 1u);
  // 0.6 * 10 is 5.999... in binary; the floor must still see 6.
  EXPECT_EQ(compressed_length(10, 0.6), 6u);
  EXPECT_EQ(compressed_length(5, 0.2), 1u);
}

TEST(CompressedLength, BoundsProperty) {
  for (std::size_t n = 1; n <= 200; ++n) {
    for (double r : {0.05, 0.2, 0.4, 0.6, 0.8, 1.0}) {
      const auto k = compressed_length(n, r);
      EXPECT_GE(k, 1u);
      EXPECT_LE(k, n);
    }
    EXPECT_EQ(compressed_length(n, 1.0), n);
  }
}

TEST(AdaptivePool, DisjointExample) {
  const Matrix<float> h(4, 1, {1, 3, 5, 7});
  const auto out = adaptive_avg_pool(h, 2);
  EXPECT_EQ(out.values()[0], 2.0f);
  EXPECT_EQ(out.values()[1], 6.0f);
}

TEST(AdaptivePool, OverlappingExample) {
  const Matrix<float> h(5, 1, {0, 1, 2, 3, 4});
  const auto out = adaptive_avg_pool(h, 2);
  EXPECT_EQ(out.values()[0], 1.0f);
  EXPECT_EQ(out.values()[1], 3.0f);
}

TEST(AdaptivePool, FullLengthIsBitIdentical) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = random_between(rng, 1, 40);
    const auto h = random_matrix<float>(rng, n, 5, -1e3, 1e3);
    const auto out = adaptive_avg_pool(h, n);
    ASSERT_EQ(std::memcmp(out.values().data(), h.values().data(), h.size() * sizeof(float)), 0);
  }
}

TEST(AdaptivePool, MatchesTorchReference) {
  for (const auto& c : oracle::kPoolOracles) {
    const Matrix<double> h(c.n, c.width, c.input);
    const auto out = adaptive_avg_pool(h, c.n_out);
    ASSERT_EQ(out.rows(), c.n_out);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out.values()[i], c.output[i], 1e-12);
  }
}

TEST(AdaptivePool, MatchesBruteForceEverywhere) {
  Rng rng(99);
  for (std::size_t n = 1; n <= 32; ++n) {
    const auto h = random_matrix<double>(rng, n, 3);
    std::vector<std::vector<double>> rows;
    for (std::size_t r = 0; r < n; ++r) rows.emplace_back(h.row(r).begin(), h.row(r).end());
    for (std::size_t n_out = 1; n_out <= n; ++n_out) {
      const auto ref = oracle::pool_rows(rows, n_out);
      const auto out = adaptive_avg_pool(h, n_out);
      for (std::size_t r = 0; r < n_out; ++r)
        for (std::size_t c = 0; c < 3; ++c) ASSERT_NEAR(out(r, c), ref[r][c], 1e-12);
    }
  }
}

TEST(AdaptivePool, ConstantPreservation) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = random_between(rng, 1, 50), n_out = random_between(rng, 1, n);
    const float v = static_cast<float>(rng.uniform(-5, 5));
    const auto out = adaptive_avg_pool(Matrix<float>(n, 2, v), n_out);
    for (float x : out.values()) EXPECT_NEAR(x, v, 1e-6);
  }
}

TEST(AdaptivePool, MeanPreservationWhenDivisible) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n_out = random_between(rng, 1, 8), factor = random_between(rng, 1, 6);
    const auto n = n_out * factor;
    const auto h = random_matrix<double>(rng, n, 4);
    const auto out = adaptive_avg_pool(h, n_out);
    for (std::size_t c = 0; c < 4; ++c) {
      double a = 0, b = 0;
      for (std::size_t r = 0; r < n; ++r) a += h(r, c);
      for (std::size_t r = 0; r < n_out; ++r) b += out(r, c);
      EXPECT_NEAR(a / n, b / n_out, 1e-6);
    }
  }
}

TEST(AdaptivePool, Linearity) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = random_between(rng, 1, 30), n_out = random_between(rng, 1, n);
    const auto a = random_matrix<float>(rng, n, 3), b = random_matrix<float>(rng, n, 3);
    const float alpha = static_cast<float>(rng.uniform(-2, 2)),
                beta = static_cast<float>(rng.uniform(-2, 2));
    Matrix<float> mix(n, 3);
    for (std::size_t i = 0; i < mix.size(); ++i)
      mix.values()[i] = alpha * a.values()[i] + beta * b.values()[i];
    const auto pm = adaptive_avg_pool(mix, n_out), pa = adaptive_avg_pool(a, n_out),
               pb = adaptive_avg_pool(b, n_out);
    for (std::size_t i = 0; i < pm.size(); ++i)
      EXPECT_NEAR(pm.values()[i], alpha * pa.values()[i] + beta * pb.values()[i], 1e-5);
  }
}

TEST(AdaptivePool, RejectsBadLengths) {
  EXPECT_THROW(adaptive_avg_pool(Matrix<float>(3, 1), 0), ArgumentError);
  EXPECT_THROW(adaptive_avg_pool(Matrix<float>(3, 1), 4), ArgumentError);
}

TEST(SegmentMap, TransposeIsAdjoint) {
  Rng rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = random_between(rng, 1, 25), n_out = random_between(rng, 1, n);
    const auto map = SegmentMap::adaptive(n, n_out);
    const auto x = random_matrix<double>(rng, n, 2), y = random_matrix<double>(rng, n_out, 2);
    const auto ax = map.apply(x), aty = map.apply_transpose(y);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < ax.size(); ++i) lhs += ax.values()[i] * y.values()[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x.values()[i] * aty.values()[i];
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(SegmentMap, HalvingBackwardSplitsGradient) {
  const auto map = SegmentMap::adaptive(4, 2);
  const Matrix<double> g(2, 1, {2.0, 6.0});
  const auto back = map.apply_transpose(g);
  EXPECT_EQ(back.values()[0], 1.0);
  EXPECT_EQ(back.values()[1], 1.0);
  EXPECT_EQ(back.values()[2], 3.0);
  EXPECT_EQ(back.values()[3], 3.0);
}

TEST(SegmentMap, DenseRowsSumToOne) {
  const auto d = SegmentMap::adaptive(7, 3).dense();
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0;
    for (double v : d.row(r)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-15);
  }
  EXPECT_TRUE(SegmentMap::identity(4).is_identity());
  EXPECT_FALSE(SegmentMap::adaptive(4, 2).is_identity());
}

TEST(RebuildPositionsAndMask, Examples) {
  const auto one = rebuild_positions_and_mask<float>(1);
  EXPECT_EQ(one.positions, std::vector<std::int32_t>{0});
  EXPECT_EQ(one.mask(0, 0), 0.0f);
  const auto three = rebuild_positions_and_mask<float>(3);
  EXPECT_EQ(three.positions, (std::vector<std::int32_t>{0, 1, 2}));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      if (j > i) {
        EXPECT_EQ(three.mask(i, j), kMasked<float>);
      } else {
        EXPECT_EQ(three.mask(i, j), 0.0f);
      }
    }
}

TEST(DocumentLayout, RejectsGapsAndBadNumbering) {
  EXPECT_THROW(DocumentLayout({{SpanRole::kQuery, 0, 0, 2}, {SpanRole::kDocument, 1, 3, 5}}),
               ArgumentError);
  EXPECT_THROW(DocumentLayout({{SpanRole::kQuery, 0, 0, 2}, {SpanRole::kDocument, 2, 2, 5}}),
               ArgumentError);
  EXPECT_THROW(DocumentLayout({{SpanRole::kDocument, 1, 0, 2}, {SpanRole::kDocument, 1, 2, 5}}),
               ArgumentError);
}

TEST(DocumentLayout, MaskMarksDocumentMembership) {
  const DocumentLayout layout({{SpanRole::kInstruction, 0, 0, 2},
                               {SpanRole::kQuery, 0, 2, 3},
                               {SpanRole::kDocument, 1, 3, 7},
                               {SpanRole::kDocument, 2, 7, 9}});
  const auto m = layout.document_mask();
  ASSERT_EQ(m.rows(), 9u);
  ASSERT_EQ(m.cols(), 2u);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(m(i, 0), (i >= 3 && i < 7) ? 1.0f : 0.0f);
    EXPECT_EQ(m(i, 1), (i >= 7) ? 1.0f : 0.0f);
    EXPECT_EQ(layout.document_of(i).has_value(), i >= 3);
  }
}

TEST(MaskedDocumentPool, HandExample) {
  const DocumentLayout layout({{SpanRole::kInstruction, 0, 0, 2},
                               {SpanRole::kQuery, 0, 2, 3},
                               {SpanRole::kDocument, 1, 3, 7},
                               {SpanRole::kDocument, 2, 7, 9}});
  const Matrix<float> h(9, 1, {10, 11, 12, 1, 1, 1, 1, 5, 5});
  const auto [out, pooled] = masked_document_pool(h, layout, 0.5);
  ASSERT_EQ(out.rows(), 6u);
  EXPECT_EQ(std::vector<float>(out.values().begin(), out.values().end()),
            (std::vector<float>{10, 11, 12, 1, 1, 5}));
  EXPECT_EQ(pooled.length(), 6u);
  EXPECT_EQ(pooled.spans()[2], (Span{SpanRole::kDocument, 1, 3, 5}));
  EXPECT_EQ(pooled.spans()[3], (Span{SpanRole::kDocument, 2, 5, 6}));
}

TEST(MaskedDocumentPool, FullRateReturnsInput) {
  Rng rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const auto layout = random_layout(rng);
    const auto h = random_matrix<float>(rng, layout.length(), 4);
    const auto [out, pooled] = masked_document_pool(h, layout, 1.0);
    ASSERT_EQ(out.size(), h.size());
    EXPECT_EQ(std::memcmp(out.values().data(), h.values().data(), h.size() * sizeof(float)), 0);
    EXPECT_EQ(pooled, layout);
  }
}

TEST(MaskedDocumentPool, OneHotIsolationAndLengthContract) {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const auto layout = random_layout(rng);
    const auto k = layout.document_count();
    Matrix<double> h(layout.length(), k + 1, 0.0);
    for (std::size_t i = 0; i < layout.length(); ++i) {
      const auto doc = layout.document_of(i);
      h(i, doc ? *doc - 1 : k) = 1.0;
    }
    const double rate = rng.uniform(0.05, 1.0);
    const auto [out, pooled] = masked_document_pool(h, layout, rate);
    std::size_t expected = 0;
    for (const auto& s : layout.spans())
      expected += s.role == SpanRole::kDocument ? compressed_length(s.length(), rate) : s.length();
    ASSERT_EQ(out.rows(), expected);
    ASSERT_EQ(pooled.length(), expected);
    for (std::size_t i = 0; i < out.rows(); ++i) {
      const auto doc = pooled.document_of(i);
      const std::size_t hot = doc ? *doc - 1 : k;
      for (std::size_t c = 0; c <= k; ++c) EXPECT_EQ(out(i, c), c == hot ? 1.0 : 0.0);
    }
  }
}

TEST(MaskedDocumentPool, NonDocumentRowsAreByteIdentical) {
  Rng rng(78);
  for (int trial = 0; trial < 100; ++trial) {
    const auto layout = random_layout(rng);
    const auto h = random_matrix<float>(rng, layout.length(), 3, -1e4, 1e4);
    const auto [out, pooled] = masked_document_pool(h, layout, rng.uniform(0.05, 1.0));
    ASSERT_EQ(pooled.spans().size(), layout.spans().size());
    for (std::size_t s = 0; s < layout.spans().size(); ++s) {
      const auto& before = layout.spans()[s];
      const auto& after = pooled.spans()[s];
      EXPECT_EQ(before.role, after.role);
      if (before.role == SpanRole::kDocument) continue;
      ASSERT_EQ(before.length(), after.length());
      for (std::size_t r = 0; r < before.length(); ++r) {
        EXPECT_EQ(std::memcmp(out.row(after.begin + r).data(), h.row(before.begin + r).data(),
                              3 * sizeof(float)),
                  0);
      }
    }
  }
}

TEST(MaskedDocumentPool, ConstantDocumentsNeverBlend) {
  Rng rng(79);
  for (int trial = 0; trial < 100; ++trial) {
    const auto layout = random_layout(rng);
    std::vector<float> constants(layout.document_count());
    for (auto& c : constants) c = static_cast<float>(rng.uniform(-100, 100));
    Matrix<float> h(layout.length(), 2, 0.0f);
    for (std::size_t i = 0; i < layout.length(); ++i)
      if (auto d = layout.document_of(i)) h(i, 0) = h(i, 1) = constants[*d - 1];
    const auto [out, pooled] = masked_document_pool(h, layout, rng.uniform(0.05, 1.0));
    for (std::size_t i = 0; i < out.rows(); ++i)
      if (auto d = pooled.document_of(i)) EXPECT_EQ(out(i, 0), constants[*d - 1]);
  }
}

TEST(MaskedDocumentPool, LengthMismatchIsArgumentError) {
  const DocumentLayout layout({{SpanRole::kQuery, 0, 0, 2}, {SpanRole::kDocument, 1, 2, 5}});
  EXPECT_THROW(masked_document_pool(Matrix<float>(4, 1), layout, 0.5), ArgumentError);
}

}  // namespace
}  // namespace ltc
