// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ltc/pipeline.hpp"

namespace ltc {

inline constexpr std::size_t kNdcgCutoff = 10;

/// nDCG@10 with gain 2^grade - 1 and discount log2(i + 1). Unjudged and
/// non-positive grades contribute nothing. Returns 0 when the query has no
/// positive judgment or the ranking is empty.
double ndcg_at_10(std::span<const std::string> ranked,
                  const std::unordered_map<std::string, int>& judgments);

struct MetricReport {
  std::vector<std::pair<std::string, double>> per_query;  // run order
  double mean = 0.0;
  std::size_t query_count = 0;
};

/// Scores every run query that has at least one positive judgment. Queries
/// without one, and judged queries absent from the run, are left out.
MetricReport evaluate_run(std::span<const RunEntry> entries, const Qrels& qrels);

/// `qid<TAB>ndcg` lines followed by `all<TAB>mean`, 4 decimals.
std::string format_report(const MetricReport& report);

/// Differences b - a over queries present in both, in the order of `a`.
std::vector<double> paired_deltas(const MetricReport& a, const MetricReport& b);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t df = 0;
  double mean = 0.0;
  double sd = 0.0;
};

/// Two-tailed paired t-test on per-query differences. With zero spread, p is
/// 1 for a zero mean and 0 otherwise (t is then 0 or +-inf).
TTestResult paired_t_test(std::span<const double> deltas);

/// Regularized incomplete beta I_x(a, b) via Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);

/// Two-tailed p-value of Student's t with `df` degrees of freedom.
double student_t_two_tailed(double t, double df);

}  // namespace ltc
