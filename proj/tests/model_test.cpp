// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "ltc/model.hpp"
#include "ltc/tokenizer.hpp"
#include "test_util.hpp"

namespace ltc {
namespace {

using testing::random_between;
using testing::random_tokens;

ModelConfig small_config() {
  ModelConfig c;
  c.num_layers = 4;
  c.hidden = 16;
  c.num_heads = 2;
  c.mlp_dim = 32;
  c.vocab_size = 256;
  c.max_seq = 128;
  return c;
}

template <typename T>
bool same_bits(const Matrix<T>& a, const Matrix<T>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(T)) == 0;
}

TEST(ModelConfig, Validation) {
  auto c = small_config();
  EXPECT_NO_THROW(c.validate());
  c.num_heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.hidden = 6;
  c.num_heads = 2;  // head_dim 3 is odd
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.vocab_size = 24;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Parameters, InitIsDeterministicAndCounted) {
  const auto c = small_config();
  const auto a = Parameters<float>::init(c, 5), b = Parameters<float>::init(c, 5),
             d = Parameters<float>::init(c, 6);
  EXPECT_TRUE(same_bits(a.embedding, b.embedding));
  EXPECT_FALSE(same_bits(a.embedding, d.embedding));
  const std::size_t h = c.hidden;
  const std::size_t expected = c.vocab_size * h +
                               c.num_layers * (2 * h + 4 * h * h + 2 * h * c.mlp_dim) + h + h +
                               special::kMaxIdentifiers * h;
  EXPECT_EQ(a.parameter_count(), expected);
}

TEST(Parameters, InitScalesByFanIn) {
  const auto c = small_config();
  const auto p = Parameters<double>::init(c, 1);
  const double bound = 1.0 / std::sqrt(static_cast<double>(c.hidden));
  for (double v : p.layers[0].wq.values()) EXPECT_LE(std::abs(v), bound);
  const double down_bound = 1.0 / std::sqrt(static_cast<double>(c.mlp_dim));
  for (double v : p.layers[0].w_down.values()) EXPECT_LE(std::abs(v), down_bound);
  for (double g : p.final_norm) EXPECT_EQ(g, 1.0);
}

TEST(Embed, Errors) {
  const auto p = Parameters<float>::init(small_config(), 1);
  EXPECT_THROW(embed<float>(std::vector<std::int32_t>{}, p), InputError);
  EXPECT_THROW(embed<float>(std::vector<std::int32_t>{256}, p), InputError);
  EXPECT_THROW(embed<float>(std::vector<std::int32_t>{-1}, p), InputError);
  EXPECT_THROW(embed<float>(std::vector<std::int32_t>(129, 5), p), InputError);
}

TEST(Embed, RowsAreTableLookups) {
  const auto p = Parameters<float>::init(small_config(), 1);
  const std::vector<std::int32_t> one{7};
  const auto hs1 = embed<float>(one, p);
  ASSERT_EQ(hs1.activations.rows(), 1u);
  for (std::size_t c = 0; c < 16; ++c) EXPECT_EQ(hs1.activations(0, c), p.embedding(7, c));
  const std::vector<std::int32_t> dup{9, 3, 9};
  const auto hs = embed<float>(dup, p);
  for (std::size_t c = 0; c < 16; ++c) EXPECT_EQ(hs.activations(0, c), hs.activations(2, c));
  EXPECT_EQ(hs.positions, (std::vector<std::int32_t>{0, 1, 2}));
}

TEST(LayerForward, ZeroOutputProjectionsLeaveResidual) {
  auto p = Parameters<float>::init(small_config(), 2);
  auto& w = p.layers[0];
  std::fill(w.wo.values().begin(), w.wo.values().end(), 0.0f);
  std::fill(w.w_down.values().begin(), w.w_down.values().end(), 0.0f);
  Rng rng(1);
  const auto tokens = random_tokens(rng, 6, 256);
  const auto hs = embed<float>(tokens, p);
  const auto out = layer_forward(hs, w, p.config);
  EXPECT_TRUE(same_bits(out.activations, hs.activations));
}

TEST(LayerForward, SingleTokenAttentionIsValueProjection) {
  auto p = Parameters<double>::init(small_config(), 3);
  auto& w = p.layers[0];
  std::fill(w.w_down.values().begin(), w.w_down.values().end(), 0.0);
  const std::vector<std::int32_t> tok{11};
  const auto hs = embed<double>(tok, p);
  LayerTrace<double> trace;
  const auto out = layer_forward(hs, w, p.config, &trace);
  const auto normed = rms_norm_rows(hs.activations, std::span<const double>(w.attn_norm), kNormEps);
  const auto expected_attn = matmul(matmul(normed, w.wv), w.wo);
  for (std::size_t c = 0; c < 16; ++c)
    EXPECT_NEAR(out.activations(0, c) - hs.activations(0, c), expected_attn(0, c), 1e-12);
}

TEST(LayerForward, CausalRowsIgnoreFutureTokens) {
  const auto p = Parameters<float>::init(small_config(), 4);
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = random_between(rng, 3, 20);
    auto a = random_tokens(rng, n, 256);
    auto b = a;
    const auto j = random_between(rng, 1, n - 1);
    b[j] = b[j] == 100 ? 101 : 100;
    auto ha = embed<float>(a, p), hb = embed<float>(b, p);
    for (std::size_t l = 0; l < p.config.num_layers; ++l) {
      ha = layer_forward(ha, p.layers[l], p.config);
      hb = layer_forward(hb, p.layers[l], p.config);
      for (std::size_t r = 0; r < j; ++r)
        ASSERT_EQ(std::memcmp(ha.activations.row(r).data(), hb.activations.row(r).data(),
                              16 * sizeof(float)),
                  0);
    }
  }
}

TEST(ForwardWithLtc, FullRateIsBitIdenticalToDisabled) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = Parameters<float>::init(small_config(), 100 + trial);
    const auto tokens = random_tokens(rng, random_between(rng, 1, 40), 256);
    const auto base = forward_with_ltc<float>(tokens, p, LtcConfig::disabled());
    for (std::size_t l = 1; l <= 4; ++l) {
      const auto same = forward_with_ltc<float>(tokens, p, LtcConfig::at(l, 1.0));
      EXPECT_TRUE(same_bits(base.activations, same.activations)) << "layer " << l;
    }
  }
}

TEST(ForwardWithLtc, TraceShowsCompressionFromTargetLayer) {
  const auto p = Parameters<float>::init(small_config(), 7);
  Rng rng(7);
  const auto tokens = random_tokens(rng, 8, 256);
  ForwardTrace<float> trace;
  const auto out = forward_with_ltc<float>(tokens, p, LtcConfig::at(3, 0.5), nullptr, &trace);
  ASSERT_EQ(trace.layers.size(), 4u);
  EXPECT_EQ(trace.layers[0].input.rows(), 8u);
  EXPECT_EQ(trace.layers[1].input.rows(), 8u);
  EXPECT_EQ(trace.layers[2].input.rows(), 4u);
  EXPECT_EQ(trace.layers[3].input.rows(), 4u);
  EXPECT_EQ(out.activations.rows(), 4u);
  EXPECT_EQ(out.activations.cols(), 16u);
  EXPECT_EQ(trace.layers[2].positions, (std::vector<std::int32_t>{0, 1, 2, 3}));
}

TEST(ForwardWithLtc, LayersBeforeTargetMatchUncompressedRun) {
  const auto p = Parameters<float>::init(small_config(), 8);
  Rng rng(8);
  const auto tokens = random_tokens(rng, 15, 256);
  ForwardTrace<float> plain, compressed;
  forward_with_ltc<float>(tokens, p, LtcConfig::disabled(), nullptr, &plain);
  forward_with_ltc<float>(tokens, p, LtcConfig::at(3, 0.4), nullptr, &compressed);
  for (std::size_t l = 0; l < 2; ++l)
    EXPECT_TRUE(same_bits(plain.layers[l].mid, compressed.layers[l].mid));
  EXPECT_TRUE(same_bits(plain.layers[2].input, compressed.pre_pool));
}

TEST(ForwardWithLtc, FirstLayerCompressesEmbeddings) {
  const auto p = Parameters<float>::init(small_config(), 9);
  Rng rng(9);
  const auto tokens = random_tokens(rng, 10, 256);
  ForwardTrace<float> trace;
  forward_with_ltc<float>(tokens, p, LtcConfig::at(1, 0.5), nullptr, &trace);
  const auto expected = adaptive_avg_pool(embed<float>(tokens, p).activations, 5);
  EXPECT_TRUE(same_bits(trace.layers[0].input, expected));
}

TEST(ForwardWithLtc, LengthContract) {
  Rng rng(10);
  const auto p = Parameters<float>::init(small_config(), 10);
  for (int trial = 0; trial < 30; ++trial) {
    const auto n = random_between(rng, 1, 50);
    const auto tokens = random_tokens(rng, n, 256);
    const double rate = rng.uniform(0.05, 1.0);
    const auto l = random_between(rng, 1, 4);
    const auto out = forward_with_ltc<float>(tokens, p, LtcConfig::at(l, rate));
    EXPECT_EQ(out.activations.rows(), compressed_length(n, rate));
  }
}

TEST(ForwardWithLtc, RejectsInvalidConfig) {
  const auto p = Parameters<float>::init(small_config(), 1);
  const std::vector<std::int32_t> tokens{5, 6};
  EXPECT_THROW(forward_with_ltc<float>(tokens, p, LtcConfig::at(5, 0.5)), ConfigError);
  EXPECT_THROW(forward_with_ltc<float>(tokens, p, LtcConfig::at(1, 0.0)), ConfigError);
}

TEST(Pointwise, TemplateAndTruncation) {
  auto c = small_config();
  c.max_seq = 8;
  const std::vector<std::int32_t> q{5, 6, 7}, d{10, 11, 12, 13, 14, 15};
  const auto t = assemble_pointwise(q, d, c);
  EXPECT_EQ(t, (std::vector<std::int32_t>{5, 6, 7, special::kSeparator, 10, 11, 12, 13}));
  const std::vector<std::int32_t> long_query(8, 5);
  EXPECT_THROW(assemble_pointwise(long_query, d, c), InputError);
}

TEST(Pointwise, DeterministicAndZeroHead) {
  auto p = Parameters<float>::init(small_config(), 11);
  const std::vector<std::int32_t> q{5, 6}, d{20, 21, 22};
  const auto a = pointwise_score<float>(q, d, p, LtcConfig::at(2, 0.5));
  const auto b = pointwise_score<float>(q, d, p, LtcConfig::at(2, 0.5));
  EXPECT_EQ(a, b);
  EXPECT_EQ(pointwise_score<float>(q, d, p, LtcConfig::disabled()),
            pointwise_score<float>(q, d, p, LtcConfig::at(1, 1.0)));
  std::fill(p.score_head.begin(), p.score_head.end(), 0.0f);
  EXPECT_EQ(pointwise_score<float>(q, d, p, LtcConfig::disabled()), 0.0f);
}

TEST(Listwise, PromptLayout) {
  const auto c = small_config();
  const std::vector<std::int32_t> q{5, 6};
  const std::vector<std::vector<std::int32_t>> docs{{30, 31, 32}, {40}, {50, 51}};
  const auto prompt = assemble_listwise(q, docs, c);
  const auto instr = tokenize(kListwiseInstruction, c.vocab_size);
  const auto& t = prompt.tokens;
  ASSERT_EQ(t.size(), instr.size() + 2 + 3 + 3 + 1 + 2 + 1);
  EXPECT_EQ(t.back(), special::kRankTrigger);
  const auto& spans = prompt.layout.spans();
  EXPECT_EQ(prompt.layout.document_count(), 3u);
  std::size_t doc_no = 0;
  for (std::size_t s = 0; s < spans.size(); ++s) {
    if (spans[s].role != SpanRole::kDocument) continue;
    ++doc_no;
    EXPECT_EQ(spans[s].document, doc_no);
    EXPECT_EQ(spans[s - 1].role, SpanRole::kInstruction);
    EXPECT_EQ(t[spans[s - 1].begin], special::identifier(c.vocab_size, doc_no));
    EXPECT_EQ(spans[s].length(), docs[doc_no - 1].size());
  }
  EXPECT_EQ(special::identifier(c.vocab_size, 1), 236);
  EXPECT_EQ(special::identifier(c.vocab_size, 20), 255);
}

TEST(Listwise, ErrorsOnDocumentCount) {
  const auto c = small_config();
  const std::vector<std::int32_t> q{5};
  EXPECT_THROW(assemble_listwise(q, std::vector<std::vector<std::int32_t>>{{7}}, c), ArgumentError);
  EXPECT_THROW(assemble_listwise(q, std::vector<std::vector<std::int32_t>>(21, {7}), c),
               ConfigError);
  auto tight = c;
  tight.max_seq = 16;
  EXPECT_THROW(assemble_listwise(q, std::vector<std::vector<std::int32_t>>(2, {7, 8, 9}), tight),
               InputError);
}

TEST(Listwise, FullRateLogitsMatchDisabled) {
  Rng rng(12);
  const auto p = Parameters<float>::init(small_config(), 12);
  for (int trial = 0; trial < 10; ++trial) {
    const auto q = random_tokens(rng, 3, 256);
    std::vector<std::vector<std::int32_t>> docs(random_between(rng, 2, 5));
    for (auto& d : docs) d = random_tokens(rng, random_between(rng, 1, 8), 256);
    const auto base = listwise_identifier_logits<float>(q, docs, p, LtcConfig::disabled());
    const auto same = listwise_identifier_logits<float>(q, docs, p, LtcConfig::at(2, 1.0));
    ASSERT_EQ(base.size(), docs.size());
    EXPECT_EQ(std::memcmp(base.data(), same.data(), base.size() * sizeof(float)), 0);
  }
}

TEST(Listwise, PoolingKeepsPromptPrefixRows) {
  const auto p = Parameters<float>::init(small_config(), 13);
  Rng rng(13);
  const auto q = random_tokens(rng, 3, 256);
  std::vector<std::vector<std::int32_t>> docs{random_tokens(rng, 6, 256), random_tokens(rng, 5, 256)};
  const auto prompt = assemble_listwise(q, docs, p.config);
  const std::size_t prefix = prompt.layout.spans()[2].end;  // instruction, query, first marker
  for (double rate : {0.2, 0.5, 0.9}) {
    ForwardTrace<float> trace;
    forward_with_ltc<float>(prompt.tokens, p, LtcConfig::at(2, rate), &prompt.layout, &trace);
    for (std::size_t r = 0; r < prefix; ++r)
      EXPECT_EQ(std::memcmp(trace.layers[1].input.row(r).data(), trace.pre_pool.row(r).data(),
                            16 * sizeof(float)),
                0);
  }
}

TEST(Listwise, OrderByLogitsBreaksTiesByIndex) {
  const std::vector<float> logits{0.5f, 2.0f, 0.5f, 2.0f, -1.0f};
  EXPECT_EQ(order_by_logits<float>(logits), (std::vector<std::size_t>{1, 3, 0, 2, 4}));
}

TEST(Listwise, PermutingDocumentsPermutesSpans) {
  const auto c = small_config();
  const std::vector<std::int32_t> q{5};
  const std::vector<std::vector<std::int32_t>> a{{30, 31, 32}, {40}}, b{{40}, {30, 31, 32}};
  const auto pa = assemble_listwise(q, a, c), pb = assemble_listwise(q, b, c);
  auto doc_lengths = [](const DocumentLayout& l) {
    std::vector<std::size_t> out;
    for (const auto& s : l.spans())
      if (s.role == SpanRole::kDocument) out.push_back(s.length());
    return out;
  };
  EXPECT_EQ(doc_lengths(pa.layout), (std::vector<std::size_t>{3, 1}));
  EXPECT_EQ(doc_lengths(pb.layout), (std::vector<std::size_t>{1, 3}));
}

}  // namespace
}  // namespace ltc
