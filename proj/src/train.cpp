// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#include "ltc/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "ltc/parallel.hpp"

namespace ltc {

// ---------------------------------------------------------------------------
// Synthetic task

namespace {

std::vector<std::int32_t> distinct_draws(Rng& rng, std::size_t count, std::int32_t lo,
                                         std::int32_t hi,
                                         const std::unordered_set<std::int32_t>& exclude) {
  std::vector<std::int32_t> out;
  const auto span = static_cast<std::uint64_t>(hi - lo);
  while (out.size() < count) {
    const auto id = lo + static_cast<std::int32_t>(rng.below(span));
    if (exclude.contains(id) || std::find(out.begin(), out.end(), id) != out.end()) continue;
    out.push_back(id);
  }
  return out;
}

std::vector<std::int32_t> plant(Rng& rng, std::size_t doc_len, std::int32_t distractor_lo,
                                std::int32_t distractor_hi, std::span<const std::int32_t> signal) {
  std::vector<std::int32_t> doc(doc_len);
  const auto span = static_cast<std::uint64_t>(distractor_hi - distractor_lo);
  for (auto& t : doc) t = distractor_lo + static_cast<std::int32_t>(rng.below(span));
  std::vector<std::size_t> slots(doc_len);
  std::iota(slots.begin(), slots.end(), std::size_t{0});
  rng.shuffle(slots.begin(), slots.end());
  for (std::size_t i = 0; i < signal.size(); ++i) doc[slots[i]] = signal[i];
  return doc;
}

std::string join_ids(std::span<const std::int32_t> ids) {
  std::string s;
  for (auto id : ids) {
    if (!s.empty()) s += ',';
    s += std::to_string(id);
  }
  return s;
}

}  // namespace

std::vector<SynthExample> synth_task_gen(std::uint64_t seed, std::size_t num_queries,
                                         std::size_t doc_len, const SynthOptions& o) {
  if (doc_len < 4) throw ArgumentError("synthetic documents need doc_len >= 4");
  if (o.query_len == 0 || o.query_len > doc_len) {
    throw ArgumentError("query_len must be in [1, doc_len]");
  }
  const auto query_lo = static_cast<std::int32_t>(special::kLowReserved);
  const auto query_hi = static_cast<std::int32_t>(special::kLowReserved + o.query_pool);
  const auto word_hi = static_cast<std::int32_t>(o.vocab_size - special::kMaxIdentifiers);
  if (o.query_pool < 2 * o.query_len || query_hi + 8 > word_hi) {
    throw ArgumentError("vocabulary too small for query pool of " + std::to_string(o.query_pool));
  }
  Rng rng(seed);
  std::vector<SynthExample> out;
  out.reserve(num_queries);
  for (std::size_t q = 0; q < num_queries; ++q) {
    SynthExample ex;
    ex.query = distinct_draws(rng, o.query_len, query_lo, query_hi, {});
    ex.signal = ex.query;
    ex.positive = plant(rng, doc_len, query_hi, word_hi, ex.signal);
    const std::unordered_set<std::int32_t> in_query(ex.query.begin(), ex.query.end());
    for (std::size_t m = 0; m < o.negatives; ++m) {
      const auto decoys = distinct_draws(rng, o.query_len, query_lo, query_hi, in_query);
      ex.negatives.push_back(plant(rng, doc_len, query_hi, word_hi, decoys));
    }
    ex.description = "positive contains query tokens {" + join_ids(ex.signal) +
                     "}; negatives contain other query-pool tokens";
    out.push_back(std::move(ex));
  }
  return out;
}

std::uint64_t heldout_seed(std::uint64_t seed) noexcept { return seed ^ 0x5bd1e9955bd1e995ULL; }

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) noexcept {
  return seed + 0x632be59bd9b4e019ULL * epoch;
}

// ---------------------------------------------------------------------------
// Loss

double group_ce_loss(std::span<const double> scores, std::size_t positive_index) {
  if (scores.size() < 2) throw ArgumentError("group loss needs at least 2 scores");
  if (positive_index >= scores.size()) {
    throw ArgumentError("positive index " + std::to_string(positive_index) + " outside " +
                        std::to_string(scores.size()) + " scores");
  }
  const double peak = *std::max_element(scores.begin(), scores.end());
  const double positive = scores[positive_index];
  if (positive == peak) {
    // log1p keeps precision when the positive dominates and the loss is tiny.
    double rest = 0.0;
    for (std::size_t j = 0; j < scores.size(); ++j)
      if (j != positive_index) rest += std::exp(scores[j] - positive);
    return std::log1p(rest);
  }
  double total = 0.0;
  for (double s : scores) total += std::exp(s - peak);
  return std::log(total) - (positive - peak);
}

std::vector<double> group_ce_grad(std::span<const double> scores, std::size_t positive_index) {
  if (scores.size() < 2) throw ArgumentError("group loss needs at least 2 scores");
  if (positive_index >= scores.size()) {
    throw ArgumentError("positive index " + std::to_string(positive_index) + " outside " +
                        std::to_string(scores.size()) + " scores");
  }
  const double peak = *std::max_element(scores.begin(), scores.end());
  std::vector<double> g(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) total += (g[i] = std::exp(scores[i] - peak));
  for (auto& v : g) v /= total;
  g[positive_index] -= 1.0;
  return g;
}

// ---------------------------------------------------------------------------
// Backward

namespace {

template <typename T>
void add_into(std::span<T> acc, std::span<const T> v) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
}

template <typename T>
void add_into(Matrix<T>& acc, const Matrix<T>& v) {
  add_into(acc.values(), v.values());
}

// Gradient of y = x * inv_rms * gain w.r.t. x; gain gradient accumulated.
template <typename T>
Matrix<T> rms_norm_backward(const Matrix<T>& x, std::span<const T> inv_rms, std::span<const T> gain,
                            const Matrix<T>& dy, std::span<T> dgain) {
  Matrix<T> dx(x.rows(), x.cols());
  const T cols = static_cast<T>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const T s = inv_rms[r];
    auto xr = x.row(r);
    auto g = dy.row(r);
    T dot{0};
    for (std::size_t c = 0; c < xr.size(); ++c) {
      dgain[c] += g[c] * xr[c] * s;
      dot += g[c] * gain[c] * xr[c];
    }
    auto out = dx.row(r);
    const T s3 = s * s * s / cols;
    for (std::size_t c = 0; c < xr.size(); ++c) out[c] = s * gain[c] * g[c] - s3 * xr[c] * dot;
  }
  return dx;
}

template <typename T>
Matrix<T> columns(const Matrix<T>& m, std::size_t begin, std::size_t width) {
  Matrix<T> out(m.rows(), width);
  for (std::size_t r = 0; r < m.rows(); ++r)
    std::copy_n(m.row(r).begin() + begin, width, out.row(r).begin());
  return out;
}

template <typename T>
void put_columns(Matrix<T>& m, const Matrix<T>& block, std::size_t begin) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    std::copy_n(block.row(r).begin(), block.cols(), m.row(r).begin() + begin);
}

template <typename T>
Matrix<T> layer_backward(const LayerTrace<T>& t, const LayerWeights<T>& w, const ModelConfig& c,
                         const Matrix<T>& dout, LayerWeights<T>& g) {
  const std::size_t n = t.input.rows();
  const std::size_t d = c.head_dim();
  const T scale = T{1} / std::sqrt(static_cast<T>(d));

  // MLP branch: out = mid + gelu(norm(mid) Wu) Wd
  Matrix<T> dmid = dout;
  add_into(g.w_down, matmul(transpose(t.act), dout));
  auto dup = matmul(dout, transpose(w.w_down));
  {
    auto du = dup.values();
    auto pre = t.up.values();
    for (std::size_t i = 0; i < du.size(); ++i) du[i] *= gelu_grad(pre[i]);
  }
  add_into(g.w_up, matmul(transpose(t.normed_mlp), dup));
  auto dnormed_mlp = matmul(dup, transpose(w.w_up));
  add_into(dmid, rms_norm_backward(t.mid, std::span<const T>(t.inv_rms_mlp),
                                   std::span<const T>(w.mlp_norm), dnormed_mlp,
                                   std::span<T>(g.mlp_norm)));

  // Attention branch: mid = x + concat Wo
  Matrix<T> dx = dmid;
  add_into(g.wo, matmul(transpose(t.attn_concat), dmid));
  auto dconcat = matmul(dmid, transpose(w.wo));

  Matrix<T> dq(n, c.hidden), dk(n, c.hidden), dv(n, c.hidden);
  for (std::size_t head = 0; head < c.num_heads; ++head) {
    const auto& p = t.probs[head];
    auto doh = columns(dconcat, head * d, d);
    auto vh = columns(t.v, head * d, d);
    auto qh = columns(t.q, head * d, d);
    auto kh = columns(t.k, head * d, d);
    put_columns(dv, matmul(transpose(p), doh), head * d);
    auto dp = matmul(doh, transpose(vh));
    for (std::size_t i = 0; i < n; ++i) {
      auto pr = p.row(i);
      auto dr = dp.row(i);
      T dot{0};
      for (std::size_t j = 0; j < n; ++j) dot += pr[j] * dr[j];
      for (std::size_t j = 0; j < n; ++j) dr[j] = pr[j] * (dr[j] - dot) * scale;
    }
    put_columns(dq, matmul(dp, kh), head * d);
    put_columns(dk, matmul(transpose(dp), qh), head * d);
  }
  auto dq_pre = rope_apply_heads(dq, t.positions, c.num_heads, c.rope_base, true);
  auto dk_pre = rope_apply_heads(dk, t.positions, c.num_heads, c.rope_base, true);
  auto normed_t = transpose(t.normed_attn);
  add_into(g.wq, matmul(normed_t, dq_pre));
  add_into(g.wk, matmul(normed_t, dk_pre));
  add_into(g.wv, matmul(normed_t, dv));
  auto dnormed = matmul(dq_pre, transpose(w.wq));
  add_into(dnormed, matmul(dk_pre, transpose(w.wk)));
  add_into(dnormed, matmul(dv, transpose(w.wv)));
  add_into(dx, rms_norm_backward(t.input, std::span<const T>(t.inv_rms_attn),
                                 std::span<const T>(w.attn_norm), dnormed,
                                 std::span<T>(g.attn_norm)));
  return dx;
}

}  // namespace

template <typename T>
void backward(std::span<const std::int32_t> tokens, const Parameters<T>& params,
              const ForwardTrace<T>& trace, const Matrix<T>& grad_final, Parameters<T>& grads) {
  const auto& c = params.config;
  auto grad = rms_norm_backward(trace.pre_final, std::span<const T>(trace.inv_rms_final),
                                std::span<const T>(params.final_norm), grad_final,
                                std::span<T>(grads.final_norm));
  for (std::size_t l = c.num_layers; l-- > 0;) {
    grad = layer_backward(trace.layers[l], params.layers[l], c, grad, grads.layers[l]);
    if (trace.pooling && trace.pool_index == l) grad = trace.pooling->apply_transpose(grad);
  }
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    add_into(grads.embedding.row(static_cast<std::size_t>(tokens[t])),
             std::span<const T>(grad.row(t)));
  }
}

template <typename T>
double example_loss(const SynthExample& example, const Parameters<T>& params, const LtcConfig& ltc,
                    Parameters<T>* grads) {
  const std::size_t docs = 1 + example.negatives.size();
  auto doc_at = [&](std::size_t i) -> const std::vector<std::int32_t>& {
    return i == 0 ? example.positive : example.negatives[i - 1];
  };
  std::vector<std::vector<std::int32_t>> tokens(docs);
  std::vector<ForwardTrace<T>> traces(grads ? docs : 0);
  std::vector<Matrix<T>> finals(docs);
  std::vector<double> scores(docs);
  for (std::size_t i = 0; i < docs; ++i) {
    tokens[i] = assemble_pointwise(example.query, doc_at(i), params.config);
    auto hs = forward_with_ltc<T>(tokens[i], params, ltc, nullptr, grads ? &traces[i] : nullptr);
    const auto last = hs.activations.row(hs.activations.rows() - 1);
    T s{0};
    for (std::size_t k = 0; k < last.size(); ++k) s += params.score_head[k] * last[k];
    scores[i] = static_cast<double>(s);
    finals[i] = std::move(hs.activations);
  }
  const double loss = group_ce_loss(scores, 0);
  if (!grads) return loss;

  const auto dscores = group_ce_grad(scores, 0);
  for (std::size_t i = 0; i < docs; ++i) {
    const T ds = static_cast<T>(dscores[i]);
    const auto& fin = finals[i];
    const std::size_t last = fin.rows() - 1;
    Matrix<T> dfinal(fin.rows(), fin.cols());
    for (std::size_t k = 0; k < fin.cols(); ++k) {
      grads->score_head[k] += ds * fin(last, k);
      dfinal(last, k) = ds * params.score_head[k];
    }
    backward<T>(tokens[i], params, traces[i], dfinal, *grads);
  }
  return loss;
}

GradCheckReport finite_diff_check(const Parameters<double>& params, const SynthExample& example,
                                  const LtcConfig& ltc, double epsilon, std::size_t stride) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-3)) {
    throw ArgumentError("finite difference epsilon must lie in [1e-6, 1e-3]");
  }
  stride = std::max<std::size_t>(1, stride);
  auto analytic = Parameters<double>::zeros(params.config);
  example_loss<double>(example, params, ltc, &analytic);

  std::vector<std::pair<std::string, std::span<const double>>> grads;
  analytic.visit([&](std::string_view name, std::span<const double> v) {
    grads.emplace_back(std::string(name), v);
  });

  Parameters<double> probe = params;
  GradCheckReport report;
  std::size_t tensor = 0;
  std::size_t flat = 0;
  probe.visit([&](std::string_view name, std::span<double> values) {
    const auto& g = grads[tensor++].second;
    for (std::size_t i = 0; i < values.size(); ++i, ++flat) {
      if (flat % stride != 0) continue;
      const double saved = values[i];
      values[i] = saved + epsilon;
      const double up = example_loss<double>(example, probe, ltc);
      values[i] = saved - epsilon;
      const double down = example_loss<double>(example, probe, ltc);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double rel = std::abs(g[i] - numeric) / std::max(1e-8, std::abs(numeric));
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_tensor = std::string(name) + "[" + std::to_string(i) + "]";
      }
      ++report.checked;
    }
  });
  return report;
}

ModelConfig gradcheck_model() {
  ModelConfig c;
  c.num_layers = 2;
  c.hidden = 8;
  c.num_heads = 2;
  c.mlp_dim = 16;
  c.vocab_size = 64;
  c.max_seq = 32;
  return c;
}

SynthExample gradcheck_example(std::uint64_t seed, const ModelConfig& config) {
  config.validate();
  SynthOptions o;
  o.vocab_size = config.vocab_size;
  o.query_pool = std::min<std::size_t>(64, (config.vocab_size - special::kReservedCount) / 4);
  return synth_task_gen(seed, 1, 8, o).front();
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  if (negatives < 1) throw ConfigError("training needs at least one negative per query");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
  if (epochs == 0 || batch_size == 0) throw ConfigError("epochs and batch size must be >= 1");
  if (train_queries == 0) throw ConfigError("training needs at least one query");
  if (heldout_queries == 0) throw ConfigError("held-out evaluation needs at least one query");
  if (threads == 0) throw ConfigError("threads must be at least 1");
  if (!valid_rate(ltc.rate)) {
    throw ConfigError("compression rate " + std::to_string(ltc.rate) +
                      " is outside the valid interval (0,1]");
  }
}

ModelConfig default_train_model() {
  ModelConfig c;
  c.num_layers = 4;
  c.hidden = 32;
  c.num_heads = 4;
  c.mlp_dim = 64;
  c.vocab_size = 512;
  c.max_seq = 64;
  return c;
}

SynthOptions synth_options_for(const TrainConfig& train, const ModelConfig& model) {
  SynthOptions o;
  o.vocab_size = model.vocab_size;
  o.negatives = train.negatives;
  o.query_pool = train.query_pool;
  return o;
}

double pairwise_accuracy(const Parameters<float>& params, std::span<const SynthExample> examples,
                         const LtcConfig& ltc, std::size_t threads) {
  if (examples.empty()) return 0.0;
  std::vector<char> hit(examples.size(), 0);
  parallel_for(examples.size(), threads, [&](std::size_t i) {
    const auto& ex = examples[i];
    const float pos = pointwise_score<float>(ex.query, ex.positive, params, ltc);
    bool ok = true;
    for (const auto& neg : ex.negatives) {
      if (!(pos > pointwise_score<float>(ex.query, neg, params, ltc))) {
        ok = false;
        break;
      }
    }
    hit[i] = ok;
  });
  return static_cast<double>(std::count(hit.begin(), hit.end(), 1)) /
         static_cast<double>(examples.size());
}

TrainResult train(const TrainConfig& cfg, const ModelConfig& model,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  model.validate();
  cfg.ltc.validate(model.num_layers);
  const auto options = synth_options_for(cfg, model);
  auto train_set = synth_task_gen(cfg.seed, cfg.train_queries, cfg.doc_len, options);
  const auto heldout = synth_task_gen(heldout_seed(cfg.seed), cfg.heldout_queries, cfg.doc_len, options);

  TrainResult result{Parameters<float>::init(model, cfg.seed), {}};
  auto& params = result.params;
  auto velocity = Parameters<float>::zeros(model);
  Rng order_rng(cfg.seed * 0x9e3779b97f4a7c15ULL + 17);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.resample_each_epoch && epoch > 1) {
      train_set = synth_task_gen(epoch_seed(cfg.seed, epoch), cfg.train_queries, cfg.doc_len, options);
    }
    order_rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      std::vector<Parameters<float>> grads(count);
      std::vector<double> losses(count);
      parallel_for(count, cfg.threads, [&](std::size_t i) {
        grads[i] = Parameters<float>::zeros(model);
        losses[i] = example_loss<float>(train_set[order[start + i]], params, cfg.ltc, &grads[i]);
      });
      // Reduce in example order so the result does not depend on thread count.
      for (std::size_t i = 1; i < count; ++i) {
        std::vector<std::span<const float>> src;
        grads[i].visit([&](std::string_view, std::span<const float> v) { src.push_back(v); });
        std::size_t k = 0;
        grads[0].visit([&](std::string_view, std::span<float> v) { add_into(v, src[k++]); });
      }
      double batch_loss = 0.0;
      for (double l : losses) batch_loss += l;
      if (!std::isfinite(batch_loss)) {
        throw NumericError("training loss became non-finite in epoch " + std::to_string(epoch));
      }
      loss_sum += batch_loss;

      const float inv = 1.0f / static_cast<float>(count);
      double norm_sq = 0.0;
      grads[0].visit([&](std::string_view, std::span<float> v) {
        for (auto& x : v) {
          x *= inv;
          norm_sq += static_cast<double>(x) * x;
        }
      });
      float clip = 1.0f;
      if (cfg.grad_clip > 0.0 && std::sqrt(norm_sq) > cfg.grad_clip) {
        clip = static_cast<float>(cfg.grad_clip / std::sqrt(norm_sq));
      }
      std::vector<std::span<const float>> g;
      grads[0].visit([&](std::string_view, std::span<const float> v) { g.push_back(v); });
      std::vector<std::span<float>> vel;
      velocity.visit([&](std::string_view, std::span<float> v) { vel.push_back(v); });
      const auto mu = static_cast<float>(cfg.momentum);
      const auto lr = static_cast<float>(cfg.learning_rate);
      std::size_t k = 0;
      bool finite = std::isfinite(norm_sq);
      params.visit([&](std::string_view, std::span<float> p) {
        auto& v = vel[k];
        const auto& gk = g[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
          v[i] = mu * v[i] + clip * gk[i];
          p[i] -= lr * v[i];
          finite = finite && std::isfinite(p[i]);
        }
        ++k;
      });
      if (!finite) {
        throw NumericError("parameters became non-finite in epoch " + std::to_string(epoch));
      }
    }
    EpochLog entry{epoch, loss_sum / static_cast<double>(order.size()),
                   pairwise_accuracy(params, heldout, cfg.ltc, cfg.threads)};
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

#define LTC_INSTANTIATE(T)                                                                      \
  template void backward(std::span<const std::int32_t>, const Parameters<T>&,                   \
                         const ForwardTrace<T>&, const Matrix<T>&, Parameters<T>&);             \
  template double example_loss(const SynthExample&, const Parameters<T>&, const LtcConfig&,     \
                               Parameters<T>*);

LTC_INSTANTIATE(float)
LTC_INSTANTIATE(double)

#undef LTC_INSTANTIATE

}  // namespace ltc
