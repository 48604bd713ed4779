// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#include "ltc/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "ltc/error.hpp"
#include "ltc/tokenizer.hpp"

namespace ltc {

AttentionCost attention_cost_model(std::size_t num_layers, std::size_t n, const LtcConfig& ltc) {
  if (num_layers == 0) throw ConfigError("cost model needs at least one layer");
  if (n == 0) throw ArgumentError("cost model needs a nonempty sequence");
  ltc.validate(num_layers);
  const double full = static_cast<double>(n) * static_cast<double>(n);
  AttentionCost cost;
  cost.baseline = static_cast<double>(num_layers) * full;
  if (!ltc.enabled()) {
    cost.ltc = cost.baseline;
  } else {
    const auto l = *ltc.target_layer;
    const double short_len = static_cast<double>(compressed_length(n, ltc.rate));
    cost.ltc = static_cast<double>(l - 1) * full +
               static_cast<double>(num_layers - l + 1) * short_len * short_len;
  }
  cost.ratio = cost.baseline / cost.ltc;
  return cost;
}

AttentionCost workload_attention_cost(const ModelConfig& config, const TextMap& corpus,
                                      const TextMap& queries, const CandidateRun& run,
                                      const RerankOptions& options) {
  AttentionCost total{0.0, 0.0, 1.0};
  for (const auto& q : run) {
    const auto qtext = queries.find(q.query_id);
    if (qtext == queries.end()) continue;
    const auto query_tokens = tokenize(qtext->second, config.vocab_size);
    const auto depth = std::min(options.depth, q.candidates.size());
    for (std::size_t i = 0; i < depth; ++i) {
      const auto doc = corpus.find(q.candidates[i].doc_id);
      if (doc == corpus.end()) continue;
      auto doc_tokens = tokenize(doc->second, config.vocab_size);
      if (doc_tokens.size() > options.max_doc_tokens) doc_tokens.resize(options.max_doc_tokens);
      const auto n = assemble_pointwise(query_tokens, doc_tokens, config).size();
      const auto c = attention_cost_model(config.num_layers, n, options.ltc);
      total.baseline += c.baseline;
      total.ltc += c.ltc;
    }
  }
  if (total.ltc > 0.0) total.ratio = total.baseline / total.ltc;
  return total;
}

QpsMeasurement measure_qps(const std::function<void()>& pass, std::size_t queries,
                           std::size_t warmup, std::size_t repeats) {
  if (queries == 0) throw ArgumentError("throughput workload is empty");
  if (repeats == 0) throw ArgumentError("throughput measurement needs repeats >= 1");
  for (std::size_t i = 0; i < warmup; ++i) pass();
  QpsMeasurement m;
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto start = std::chrono::steady_clock::now();
    pass();
    const auto stop = std::chrono::steady_clock::now();
    m.seconds.push_back(std::chrono::duration<double>(stop - start).count());
  }
  auto sorted = m.seconds;
  std::sort(sorted.begin(), sorted.end());
  const auto mid = sorted.size() / 2;
  m.median_seconds = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  const double floor_seconds = 1e-9;
  m.qps = static_cast<double>(queries) / std::max(m.median_seconds, floor_seconds);
  return m;
}

QpsMeasurement measure_rerank_qps(const Parameters<float>& params, const TextMap& corpus,
                                  const TextMap& queries, const CandidateRun& run,
                                  const RerankOptions& options, std::size_t warmup,
                                  std::size_t repeats) {
  return measure_qps(
      [&] {
        auto entries = rerank_run_pointwise(params, corpus, queries, run, options);
        if (entries.empty() && !run.empty()) throw Error("rerank pass produced no entries");
      },
      run.size(), warmup, repeats);
}

std::vector<std::size_t> default_sweep_layers(std::size_t num_layers) {
  if (num_layers == 0) throw ConfigError("model has no layers");
  std::vector<std::size_t> layers;
  for (std::size_t anchor : {2, 4, 8, 14, 20}) {
    const auto l = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(static_cast<double>(anchor) *
                                             static_cast<double>(num_layers) / 28.0)),
        1, num_layers);
    if (std::find(layers.begin(), layers.end(), l) == layers.end()) layers.push_back(l);
  }
  return layers;
}

namespace {

std::string cell_name(std::size_t layer, double rate) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "(layer %zu, rate %.2f)", layer, rate);
  return buf;
}

}  // namespace

std::vector<SweepCell> sweep_grid(const Parameters<float>& params, const TextMap& corpus,
                                  const TextMap& queries, const CandidateRun& run,
                                  const Qrels& qrels, const SweepOptions& options) {
  const auto layers =
      options.layers.empty() ? default_sweep_layers(params.config.num_layers) : options.layers;
  if (options.rates.empty()) throw ArgumentError("sweep needs at least one rate");
  if (std::find(options.rates.begin(), options.rates.end(), 1.0) == options.rates.end()) {
    throw ArgumentError("sweep rates must include the 1.0 baseline");
  }
  for (double r : options.rates) {
    if (!valid_rate(r)) {
      throw ConfigError("sweep rate " + std::to_string(r) +
                        " is outside the valid interval (0,1]");
    }
  }
  for (auto l : layers) LtcConfig::at(l, 1.0).validate(params.config.num_layers);

  RerankOptions base = options.rerank;
  base.ltc = LtcConfig::disabled();
  const auto baseline =
      evaluate_run(rerank_run_pointwise(params, corpus, queries, run, base), qrels);
  if (baseline.query_count < 2) {
    throw ArgumentError("sweep needs at least 2 judged queries for the t-test, got " +
                        std::to_string(baseline.query_count));
  }

  std::vector<SweepCell> cells;
  for (auto layer : layers) {
    for (double rate : options.rates) {
      try {
        RerankOptions cell_options = options.rerank;
        cell_options.ltc = LtcConfig::at(layer, rate);
        const auto report = evaluate_run(
            rerank_run_pointwise(params, corpus, queries, run, cell_options), qrels);
        SweepCell cell;
        cell.target_layer = layer;
        cell.rate = rate;
        cell.ndcg_at_10 = report.mean;
        cell.p_value = paired_t_test(paired_deltas(baseline, report)).p;
        if (options.measure_throughput) {
          cell.qps = measure_rerank_qps(params, corpus, queries, run, cell_options,
                                        options.warmup, options.repeats)
                         .qps;
        }
        cell.predicted_attn_ratio =
            workload_attention_cost(params.config, corpus, queries, run, cell_options).ratio;
        cells.push_back(cell);
      } catch (const FormatError&) {
        throw;
      } catch (const NumericError& e) {
        throw NumericError("sweep cell " + cell_name(layer, rate) + ": " + e.what());
      } catch (const ArgumentError& e) {
        throw ArgumentError("sweep cell " + cell_name(layer, rate) + ": " + e.what());
      } catch (const ConfigError& e) {
        throw ConfigError("sweep cell " + cell_name(layer, rate) + ": " + e.what());
      } catch (const InputError& e) {
        throw InputError("sweep cell " + cell_name(layer, rate) + ": " + e.what());
      }
    }
  }
  return cells;
}

std::string format_sweep_csv(const std::vector<SweepCell>& cells) {
  std::string out = "target_layer,rate,ndcg_at_10,p_value,qps,predicted_attn_ratio\n";
  char buf[256];
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof(buf), "%zu,%.2f,%.6f,%.6g,%.3f,%.6f\n", c.target_layer, c.rate,
                  c.ndcg_at_10, c.p_value, c.qps, c.predicted_attn_ratio);
    out += buf;
  }
  return out;
}

}  // namespace ltc
