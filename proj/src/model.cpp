// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#include "ltc/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ltc/tokenizer.hpp"

namespace ltc {

std::int32_t special::identifier(std::size_t vocab_size, std::size_t j) {
  if (j < 1 || j > kMaxIdentifiers) {
    throw ConfigError("document identifier " + std::to_string(j) + " outside [1, " +
                      std::to_string(kMaxIdentifiers) + "]");
  }
  return static_cast<std::int32_t>(vocab_size - kMaxIdentifiers + (j - 1));
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("model config: " + what); };
  if (num_layers == 0) fail("num_layers must be >= 1");
  if (num_heads == 0 || hidden == 0) fail("hidden and num_heads must be >= 1");
  if (hidden % num_heads != 0) {
    fail("hidden " + std::to_string(hidden) + " not divisible by " + std::to_string(num_heads) +
         " heads");
  }
  if (head_dim() % 2 != 0) fail("head_dim " + std::to_string(head_dim()) + " must be even");
  if (mlp_dim == 0) fail("mlp_dim must be >= 1");
  if (max_seq == 0) fail("max_seq must be >= 1");
  if (vocab_size <= special::kReservedCount) {
    fail("vocab_size must exceed the " + std::to_string(special::kReservedCount) +
         " reserved ids");
  }
  if (!(rope_base > 1.0)) fail("rope_base must be > 1");
}

namespace {

template <typename T>
void fill_uniform(std::span<T> values, Rng& rng, double bound) {
  for (auto& v : values) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
Parameters<T> allocate(const ModelConfig& c) {
  Parameters<T> p;
  p.config = c;
  p.embedding = Matrix<T>(c.vocab_size, c.hidden);
  p.layers.resize(c.num_layers);
  for (auto& l : p.layers) {
    l.attn_norm.assign(c.hidden, T{0});
    l.wq = Matrix<T>(c.hidden, c.hidden);
    l.wk = Matrix<T>(c.hidden, c.hidden);
    l.wv = Matrix<T>(c.hidden, c.hidden);
    l.wo = Matrix<T>(c.hidden, c.hidden);
    l.mlp_norm.assign(c.hidden, T{0});
    l.w_up = Matrix<T>(c.hidden, c.mlp_dim);
    l.w_down = Matrix<T>(c.mlp_dim, c.hidden);
  }
  p.final_norm.assign(c.hidden, T{0});
  p.score_head.assign(c.hidden, T{0});
  p.identifier_rows = Matrix<T>(special::kMaxIdentifiers, c.hidden);
  return p;
}

}  // namespace

template <typename T>
Parameters<T> Parameters<T>::zeros(const ModelConfig& config) {
  config.validate();
  return allocate<T>(config);
}

template <typename T>
Parameters<T> Parameters<T>::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  auto p = allocate<T>(config);
  Rng rng(seed);
  const double inv_h = 1.0 / std::sqrt(static_cast<double>(config.hidden));
  const double inv_mlp = 1.0 / std::sqrt(static_cast<double>(config.mlp_dim));
  fill_uniform(p.embedding.values(), rng, 1.0);
  for (auto& l : p.layers) {
    std::fill(l.attn_norm.begin(), l.attn_norm.end(), T{1});
    fill_uniform(l.wq.values(), rng, inv_h);
    fill_uniform(l.wk.values(), rng, inv_h);
    fill_uniform(l.wv.values(), rng, inv_h);
    fill_uniform(l.wo.values(), rng, inv_h);
    std::fill(l.mlp_norm.begin(), l.mlp_norm.end(), T{1});
    fill_uniform(l.w_up.values(), rng, inv_h);
    fill_uniform(l.w_down.values(), rng, inv_mlp);
  }
  std::fill(p.final_norm.begin(), p.final_norm.end(), T{1});
  fill_uniform(std::span(p.score_head), rng, inv_h);
  fill_uniform(p.identifier_rows.values(), rng, inv_h);
  return p;
}

template <typename T>
std::size_t Parameters<T>::parameter_count() const {
  std::size_t n = 0;
  visit([&](std::string_view, auto values) { n += values.size(); });
  return n;
}

template <typename T>
template <typename U>
Parameters<U> Parameters<T>::cast() const {
  auto out = allocate<U>(config);
  std::vector<std::span<const T>> src;
  visit([&](std::string_view, std::span<const T> v) { src.push_back(v); });
  std::size_t i = 0;
  out.visit([&](std::string_view, std::span<U> dst) {
    std::transform(src[i].begin(), src[i].end(), dst.begin(),
                   [](T v) { return static_cast<U>(v); });
    ++i;
  });
  return out;
}

template <typename T>
HiddenStates<T> embed(std::span<const std::int32_t> tokens, const Parameters<T>& params) {
  const auto& c = params.config;
  if (tokens.empty()) throw InputError("cannot embed an empty token sequence");
  if (tokens.size() > c.max_seq) {
    throw InputError("sequence of " + std::to_string(tokens.size()) + " tokens exceeds max_seq " +
                     std::to_string(c.max_seq));
  }
  HiddenStates<T> hs;
  hs.activations = Matrix<T>(tokens.size(), c.hidden);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto id = tokens[t];
    if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size) {
      throw InputError("token id " + std::to_string(id) + " at position " + std::to_string(t) +
                       " outside vocabulary of " + std::to_string(c.vocab_size));
    }
    auto src = params.embedding.row(static_cast<std::size_t>(id));
    std::copy(src.begin(), src.end(), hs.activations.row(t).begin());
  }
  auto pm = rebuild_positions_and_mask<T>(tokens.size());
  hs.positions = std::move(pm.positions);
  hs.mask = std::move(pm.mask);
  return hs;
}

namespace {

template <typename T>
Matrix<T> head_block(const Matrix<T>& m, std::size_t head, std::size_t d) {
  Matrix<T> out(m.rows(), d);
  for (std::size_t t = 0; t < m.rows(); ++t)
    std::copy_n(m.row(t).begin() + head * d, d, out.row(t).begin());
  return out;
}

template <typename T>
void put_head_block(Matrix<T>& m, const Matrix<T>& block, std::size_t head) {
  const std::size_t d = block.cols();
  for (std::size_t t = 0; t < m.rows(); ++t)
    std::copy_n(block.row(t).begin(), d, m.row(t).begin() + head * d);
}

template <typename T>
void add_inplace(Matrix<T>& acc, const Matrix<T>& other) {
  auto a = acc.values();
  auto b = other.values();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace

template <typename T>
HiddenStates<T> layer_forward(const HiddenStates<T>& hs, const LayerWeights<T>& w,
                              const ModelConfig& c, LayerTrace<T>* trace) {
  if (hs.current_layer >= c.num_layers) {
    throw ConfigError("layer_forward past the last layer (" + std::to_string(c.num_layers) + ")");
  }
  const auto& x = hs.activations;
  const std::size_t n = x.rows();
  const std::size_t d = c.head_dim();
  const T scale = T{1} / std::sqrt(static_cast<T>(d));

  std::vector<T> inv_attn;
  auto normed = rms_norm_rows(x, std::span<const T>(w.attn_norm), static_cast<T>(kNormEps),
                              &inv_attn);
  auto q = rope_apply_heads(matmul(normed, w.wq), hs.positions, c.num_heads, c.rope_base);
  auto k = rope_apply_heads(matmul(normed, w.wk), hs.positions, c.num_heads, c.rope_base);
  auto v = matmul(normed, w.wv);

  Matrix<T> concat(n, c.hidden);
  std::vector<Matrix<T>> probs;
  if (trace) probs.reserve(c.num_heads);
  for (std::size_t head = 0; head < c.num_heads; ++head) {
    auto qh = head_block(q, head, d);
    auto kh = head_block(k, head, d);
    auto scores = matmul(qh, transpose(kh));
    for (auto& s : scores.values()) s *= scale;
    auto p = softmax_rows(scores, hs.mask);
    put_head_block(concat, matmul(p, head_block(v, head, d)), head);
    if (trace) probs.push_back(std::move(p));
  }

  HiddenStates<T> out;
  out.activations = matmul(concat, w.wo);
  add_inplace(out.activations, x);

  std::vector<T> inv_mlp;
  auto normed_mlp = rms_norm_rows(out.activations, std::span<const T>(w.mlp_norm),
                                  static_cast<T>(kNormEps), &inv_mlp);
  auto up = matmul(normed_mlp, w.w_up);
  Matrix<T> act(up.rows(), up.cols());
  {
    auto src = up.values();
    auto dst = act.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = gelu(src[i]);
  }
  auto down = matmul(act, w.w_down);

  if (trace) {
    trace->input = x;
    trace->positions = hs.positions;
    trace->inv_rms_attn = std::move(inv_attn);
    trace->normed_attn = std::move(normed);
    trace->q = std::move(q);
    trace->k = std::move(k);
    trace->v = std::move(v);
    trace->probs = std::move(probs);
    trace->attn_concat = std::move(concat);
    trace->mid = out.activations;
    trace->inv_rms_mlp = std::move(inv_mlp);
    trace->normed_mlp = std::move(normed_mlp);
    trace->up = std::move(up);
    trace->act = std::move(act);
  }

  add_inplace(out.activations, down);
  out.positions = hs.positions;
  out.mask = hs.mask;
  out.current_layer = hs.current_layer + 1;
  return out;
}

template <typename T>
HiddenStates<T> forward_with_ltc(std::span<const std::int32_t> tokens,
                                 const Parameters<T>& params, const LtcConfig& ltc,
                                 const DocumentLayout* layout, ForwardTrace<T>* trace) {
  const auto& c = params.config;
  ltc.validate(c.num_layers);
  if (layout && layout->length() != tokens.size()) {
    throw ArgumentError("layout covers " + std::to_string(layout->length()) + " tokens, input has " +
                        std::to_string(tokens.size()));
  }
  auto hs = embed(tokens, params);
  if (trace) {
    trace->layers.assign(c.num_layers, LayerTrace<T>{});
    trace->pooling.reset();
  }
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    if (ltc.target_layer && *ltc.target_layer == l + 1) {
      SegmentMap map = layout ? plan_document_pool(*layout, ltc.rate).map
                              : SegmentMap::adaptive(hs.activations.rows(),
                                                     compressed_length(hs.activations.rows(),
                                                                       ltc.rate));
      if (trace) {
        trace->pre_pool = hs.activations;
        trace->pool_index = l;
      }
      hs.activations = map.apply(hs.activations);
      auto pm = rebuild_positions_and_mask<T>(hs.activations.rows());
      hs.positions = std::move(pm.positions);
      hs.mask = std::move(pm.mask);
      if (trace) trace->pooling = std::move(map);
    }
    hs = layer_forward(hs, params.layers[l], c, trace ? &trace->layers[l] : nullptr);
  }
  std::vector<T> inv_final;
  if (trace) trace->pre_final = hs.activations;
  hs.activations = rms_norm_rows(hs.activations, std::span<const T>(params.final_norm),
                                 static_cast<T>(kNormEps), &inv_final);
  if (trace) trace->inv_rms_final = std::move(inv_final);
  return hs;
}

std::vector<std::int32_t> assemble_pointwise(std::span<const std::int32_t> query,
                                             std::span<const std::int32_t> doc,
                                             const ModelConfig& config) {
  if (query.size() + 1 > config.max_seq) {
    throw InputError("query of " + std::to_string(query.size()) +
                     " tokens leaves no room in max_seq " + std::to_string(config.max_seq));
  }
  const std::size_t doc_budget = config.max_seq - query.size() - 1;
  std::vector<std::int32_t> tokens(query.begin(), query.end());
  tokens.push_back(special::kSeparator);
  tokens.insert(tokens.end(), doc.begin(),
                doc.begin() + static_cast<std::ptrdiff_t>(std::min(doc.size(), doc_budget)));
  return tokens;
}

template <typename T>
T pointwise_score(std::span<const std::int32_t> query, std::span<const std::int32_t> doc,
                  const Parameters<T>& params, const LtcConfig& ltc) {
  const auto tokens = assemble_pointwise(query, doc, params.config);
  const auto hs = forward_with_ltc<T>(tokens, params, ltc);
  const auto last = hs.activations.row(hs.activations.rows() - 1);
  T score{0};
  for (std::size_t i = 0; i < last.size(); ++i) score += params.score_head[i] * last[i];
  return score;
}

ListwisePrompt assemble_listwise(std::span<const std::int32_t> query,
                                 std::span<const std::vector<std::int32_t>> docs,
                                 const ModelConfig& config) {
  if (docs.size() < 2) throw ArgumentError("listwise ranking needs at least 2 documents");
  if (docs.size() > special::kMaxIdentifiers) {
    throw ConfigError(std::to_string(docs.size()) + " documents exceed the " +
                      std::to_string(special::kMaxIdentifiers) + " reserved identifiers");
  }
  ListwisePrompt prompt;
  auto& tokens = prompt.tokens;
  std::vector<Span> spans;
  auto push_span = [&](SpanRole role, std::size_t doc_no, std::size_t begin) {
    if (tokens.size() > begin) spans.push_back({role, doc_no, begin, tokens.size()});
  };

  const auto instruction = tokenize(kListwiseInstruction, config.vocab_size);
  tokens = instruction;
  push_span(SpanRole::kInstruction, 0, 0);
  std::size_t begin = tokens.size();
  tokens.insert(tokens.end(), query.begin(), query.end());
  push_span(SpanRole::kQuery, 0, begin);
  for (std::size_t j = 0; j < docs.size(); ++j) {
    begin = tokens.size();
    tokens.push_back(special::identifier(config.vocab_size, j + 1));
    push_span(SpanRole::kInstruction, 0, begin);
    begin = tokens.size();
    tokens.insert(tokens.end(), docs[j].begin(), docs[j].end());
    spans.push_back({SpanRole::kDocument, j + 1, begin, tokens.size()});
  }
  begin = tokens.size();
  tokens.push_back(special::kRankTrigger);
  push_span(SpanRole::kInstruction, 0, begin);

  if (tokens.size() > config.max_seq) {
    throw InputError("listwise prompt of " + std::to_string(tokens.size()) +
                     " tokens exceeds max_seq " + std::to_string(config.max_seq));
  }
  prompt.layout = DocumentLayout(std::move(spans));
  return prompt;
}

template <typename T>
std::vector<T> listwise_identifier_logits(std::span<const std::int32_t> query,
                                          std::span<const std::vector<std::int32_t>> docs,
                                          const Parameters<T>& params, const LtcConfig& ltc) {
  const auto prompt = assemble_listwise(query, docs, params.config);
  const auto hs = forward_with_ltc<T>(prompt.tokens, params, ltc, &prompt.layout);
  const auto last = hs.activations.row(hs.activations.rows() - 1);
  std::vector<T> logits(docs.size(), T{0});
  for (std::size_t j = 0; j < docs.size(); ++j) {
    const auto w = params.identifier_rows.row(j);
    for (std::size_t i = 0; i < last.size(); ++i) logits[j] += w[i] * last[i];
  }
  return logits;
}

template <typename T>
std::vector<std::size_t> order_by_logits(std::span<const T> logits) {
  std::vector<std::size_t> order(logits.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
  return order;
}

#define LTC_INSTANTIATE(T)                                                                     \
  template struct Parameters<T>;                                                               \
  template HiddenStates<T> embed(std::span<const std::int32_t>, const Parameters<T>&);         \
  template HiddenStates<T> layer_forward(const HiddenStates<T>&, const LayerWeights<T>&,       \
                                         const ModelConfig&, LayerTrace<T>*);                  \
  template HiddenStates<T> forward_with_ltc(std::span<const std::int32_t>, const Parameters<T>&, \
                                            const LtcConfig&, const DocumentLayout*,           \
                                            ForwardTrace<T>*);                                 \
  template T pointwise_score(std::span<const std::int32_t>, std::span<const std::int32_t>,     \
                             const Parameters<T>&, const LtcConfig&);                          \
  template std::vector<T> listwise_identifier_logits(std::span<const std::int32_t>,            \
                                                     std::span<const std::vector<std::int32_t>>, \
                                                     const Parameters<T>&, const LtcConfig&);  \
  template std::vector<std::size_t> order_by_logits(std::span<const T>);

LTC_INSTANTIATE(float)
LTC_INSTANTIATE(double)

#undef LTC_INSTANTIATE

template Parameters<double> Parameters<float>::cast<double>() const;
template Parameters<float> Parameters<double>::cast<float>() const;
template Parameters<float> Parameters<float>::cast<float>() const;

}  // namespace ltc
