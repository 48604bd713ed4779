// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ltc/compression.hpp"
#include "ltc/model.hpp"

namespace ltc {

struct Candidate {
  std::string doc_id;
  std::size_t first_stage_rank = 0;
  double first_stage_score = 0.0;

  bool operator==(const Candidate&) const = default;
};

/// Candidates of one query, sorted by first-stage rank.
struct QueryCandidates {
  std::string query_id;
  std::vector<Candidate> candidates;
};

/// Queries in order of first appearance in the run file.
using CandidateRun = std::vector<QueryCandidates>;

struct RunEntry {
  std::string query_id;
  std::string doc_id;
  std::size_t rank = 0;  // 1-based
  double score = 0.0;
  std::string tag;

  bool operator==(const RunEntry&) const = default;
};

using TextMap = std::unordered_map<std::string, std::string>;
/// query id -> doc id -> grade
using Qrels = std::unordered_map<std::string, std::unordered_map<std::string, int>>;

/// Non-fatal loader / reranker diagnostics.
using Warnings = std::vector<std::string>;

/// JSON-lines `{"id": ..., "text": ...}`.
TextMap load_corpus(const std::string& path);
/// `id<TAB>text` per line.
TextMap load_queries(const std::string& path);
/// TREC run `qid Q0 docid rank score tag`. Duplicate ranks or documents
/// within a query are format errors.
CandidateRun load_run(const std::string& path);
/// Same validation as load_run, keeping every column. Entries are grouped by
/// query in order of first appearance and sorted by rank.
std::vector<RunEntry> load_run_entries(const std::string& path);
/// TREC qrels `qid 0 docid grade`. A repeated (query, doc) keeps the last
/// grade and records a warning.
Qrels load_qrels(const std::string& path, Warnings* warnings = nullptr);

/// Throws ArgumentError unless, per query, ranks run 1, 2, ... and scores
/// never increase with rank.
void check_run_entries(std::span<const RunEntry> entries);
/// TREC 6-column text, scores with 6 decimals, queries in input order.
std::string format_run(std::span<const RunEntry> entries);
/// Validates, then writes. Nothing is written when validation fails.
void write_run(std::span<const RunEntry> entries, const std::string& path);

std::vector<QueryCandidates> candidates_from_entries(std::span<const RunEntry> entries);

/// Scores a candidate; nullopt means the document text is missing.
using PointwiseScorer = std::function<std::optional<double>(const Candidate&)>;
/// Scores every candidate of a window (identifier logits), in window order.
using WindowScorer = std::function<std::vector<double>(std::span<const Candidate>)>;

/// Scores the top `depth` candidates and sorts them by score, ties by
/// first-stage rank. Candidates past depth follow in first-stage order;
/// candidates without text go last. Unscored entries get scores strictly
/// below the reranked block.
std::vector<RunEntry> rerank_pointwise(const std::string& query_id,
                                       std::span<const Candidate> candidates, std::size_t depth,
                                       const PointwiseScorer& scorer, const std::string& tag,
                                       Warnings* warnings = nullptr);

/// Bottom-up sliding window: windows [max(0, end - window), end) for
/// end = n, n - step, ... until a window starts at 0. Each window is
/// reordered by its scores descending, ties by incoming order.
std::vector<Candidate> sliding_window_order(std::span<const Candidate> candidates,
                                            std::size_t window, std::size_t step,
                                            const WindowScorer& scorer);

/// sliding_window_order over the top `depth` candidates; the remainder keeps
/// first-stage order. Entry scores are n - index.
std::vector<RunEntry> sliding_window_rerank(const std::string& query_id,
                                            std::span<const Candidate> candidates,
                                            std::size_t depth, std::size_t window,
                                            std::size_t step, const WindowScorer& scorer,
                                            const std::string& tag);

struct RerankOptions {
  std::size_t depth = 100;
  std::size_t window = 20;
  std::size_t step = 10;
  std::size_t max_doc_tokens = 128;
  std::size_t threads = 1;
  LtcConfig ltc;
  std::string tag = "ltc";
};

/// Per-query pointwise reranking of a whole run with the model.
std::vector<RunEntry> rerank_run_pointwise(const Parameters<float>& params, const TextMap& corpus,
                                           const TextMap& queries, const CandidateRun& run,
                                           const RerankOptions& options,
                                           Warnings* warnings = nullptr);

/// Per-query sliding-window listwise reranking of a whole run with the model.
std::vector<RunEntry> rerank_run_listwise(const Parameters<float>& params, const TextMap& corpus,
                                          const TextMap& queries, const CandidateRun& run,
                                          const RerankOptions& options,
                                          Warnings* warnings = nullptr);

/// Token budget per document so a k-document listwise prompt fits max_seq.
std::size_t listwise_doc_budget(const ModelConfig& config, std::size_t query_tokens,
                                std::size_t k, std::size_t max_doc_tokens);

}  // namespace ltc
