// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ltc/compression.hpp"
#include "ltc/metrics.hpp"
#include "ltc/pipeline.hpp"

namespace ltc {

/// Attention score+mix cost in units of (sequence length)^2 per layer.
struct AttentionCost {
  double baseline = 0.0;
  double ltc = 0.0;
  double ratio = 1.0;  // baseline / ltc
};

/// baseline = L n^2; ltc = (l* - 1) n^2 + (L - l* + 1) n'^2. A disabled
/// config costs the baseline.
AttentionCost attention_cost_model(std::size_t num_layers, std::size_t n, const LtcConfig& ltc);

/// Summed cost over the pointwise prompts a rerank pass would build.
AttentionCost workload_attention_cost(const ModelConfig& config, const TextMap& corpus,
                                      const TextMap& queries, const CandidateRun& run,
                                      const RerankOptions& options);

struct QpsMeasurement {
  double qps = 0.0;                  // queries / median seconds
  double median_seconds = 0.0;
  std::vector<double> seconds;       // one per repeat
};

/// Times `pass` (one full pass over `queries` queries) `repeats` times after
/// `warmup` untimed passes, on a monotonic clock.
QpsMeasurement measure_qps(const std::function<void()>& pass, std::size_t queries,
                           std::size_t warmup, std::size_t repeats);

/// Pointwise reranking throughput over a run.
QpsMeasurement measure_rerank_qps(const Parameters<float>& params, const TextMap& corpus,
                                  const TextMap& queries, const CandidateRun& run,
                                  const RerankOptions& options, std::size_t warmup,
                                  std::size_t repeats);

struct SweepCell {
  std::size_t target_layer = 0;
  double rate = 1.0;
  double ndcg_at_10 = 0.0;
  double p_value = 1.0;
  double qps = 0.0;
  double predicted_attn_ratio = 1.0;
};

inline const std::vector<double> kDefaultRates = {0.2, 0.4, 0.6, 0.8, 1.0};

/// Layers at the same relative depths as {2, 4, 8, 14, 20} of 28, mapped to
/// [1, num_layers] and deduplicated.
std::vector<std::size_t> default_sweep_layers(std::size_t num_layers);

struct SweepOptions {
  std::vector<double> rates = kDefaultRates;
  std::vector<std::size_t> layers;  // empty: default_sweep_layers
  RerankOptions rerank;
  std::size_t warmup = 1;
  std::size_t repeats = 3;
  bool measure_throughput = true;  // false leaves qps at 0
};

/// Every (layer, rate) cell, layer-major: pointwise rerank, nDCG@10, paired
/// t-test against the uncompressed run, QPS and predicted attention ratio.
std::vector<SweepCell> sweep_grid(const Parameters<float>& params, const TextMap& corpus,
                                  const TextMap& queries, const CandidateRun& run,
                                  const Qrels& qrels, const SweepOptions& options);

/// Header `target_layer,rate,ndcg_at_10,p_value,qps,predicted_attn_ratio`.
std::string format_sweep_csv(const std::vector<SweepCell>& cells);

}  // namespace ltc
