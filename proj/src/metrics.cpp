// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#include "ltc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "ltc/error.hpp"

namespace ltc {

namespace {

double gain(int grade) { return grade > 0 ? std::exp2(static_cast<double>(grade)) - 1.0 : 0.0; }

double discount(std::size_t rank) { return 1.0 / std::log2(static_cast<double>(rank) + 1.0); }

}  // namespace

double ndcg_at_10(std::span<const std::string> ranked,
                  const std::unordered_map<std::string, int>& judgments) {
  std::vector<double> ideal;
  for (const auto& [doc, grade] : judgments) {
    if (grade > 0) ideal.push_back(gain(grade));
  }
  if (ideal.empty() || ranked.empty()) return 0.0;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(ideal.size(), kNdcgCutoff); ++i) {
    idcg += ideal[i] * discount(i + 1);
  }
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(ranked.size(), kNdcgCutoff); ++i) {
    const auto it = judgments.find(ranked[i]);
    if (it != judgments.end()) dcg += gain(it->second) * discount(i + 1);
  }
  return std::clamp(dcg / idcg, 0.0, 1.0);
}

MetricReport evaluate_run(std::span<const RunEntry> entries, const Qrels& qrels) {
  MetricReport report;
  for (const auto& q : candidates_from_entries(entries)) {
    const auto judged = qrels.find(q.query_id);
    if (judged == qrels.end()) continue;
    const bool any_relevant = std::any_of(judged->second.begin(), judged->second.end(),
                                          [](const auto& kv) { return kv.second > 0; });
    if (!any_relevant) continue;
    std::vector<Candidate> ordered = q.candidates;
    std::stable_sort(ordered.begin(), ordered.end(), [](const Candidate& a, const Candidate& b) {
      return a.first_stage_rank < b.first_stage_rank;
    });
    std::vector<std::string> ranked;
    ranked.reserve(ordered.size());
    for (const auto& c : ordered) ranked.push_back(c.doc_id);
    report.per_query.emplace_back(q.query_id, ndcg_at_10(ranked, judged->second));
  }
  report.query_count = report.per_query.size();
  if (report.query_count > 0) {
    double sum = 0.0;
    for (const auto& [qid, v] : report.per_query) sum += v;
    report.mean = sum / static_cast<double>(report.query_count);
  }
  return report;
}

std::string format_report(const MetricReport& report) {
  std::string out;
  char buf[64];
  for (const auto& [qid, v] : report.per_query) {
    std::snprintf(buf, sizeof(buf), "\t%.4f\n", v);
    out += qid;
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "all\t%.4f\n", report.mean);
  out += buf;
  return out;
}

std::vector<double> paired_deltas(const MetricReport& a, const MetricReport& b) {
  std::unordered_map<std::string, double> other(b.per_query.begin(), b.per_query.end());
  std::vector<double> deltas;
  for (const auto& [qid, v] : a.per_query) {
    const auto it = other.find(qid);
    if (it != other.end()) deltas.push_back(it->second - v);
  }
  return deltas;
}

namespace {

// Continued fraction for I_x(a, b), valid for x < (a + 1) / (a + b + 2).
double beta_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kTolerance = 1e-10;
  constexpr int kMaxIterations = 10000;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + num * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + num / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + num * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + num / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double step = d * c;
    h *= step;
    if (std::abs(step - 1.0) < kTolerance) return h;
  }
  throw NumericError("incomplete beta continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw ArgumentError("incomplete beta needs a, b > 0");
  if (std::isnan(x) || x < 0.0 || x > 1.0) throw ArgumentError("incomplete beta needs x in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
  return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_tailed(double t, double df) {
  if (!(df > 0.0)) throw ArgumentError("degrees of freedom must be positive");
  if (std::isnan(t)) throw NumericError("t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

TTestResult paired_t_test(std::span<const double> deltas) {
  const std::size_t n = deltas.size();
  if (n < 2) {
    throw ArgumentError("paired t-test needs at least 2 observations, got " + std::to_string(n));
  }
  TTestResult r;
  r.df = n - 1;
  r.mean = std::accumulate(deltas.begin(), deltas.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double d : deltas) ss += (d - r.mean) * (d - r.mean);
  r.sd = std::sqrt(ss / static_cast<double>(n - 1));
  double scale = 0.0;
  for (double d : deltas) scale = std::max(scale, std::abs(d));
  // Spread at rounding level counts as none.
  if (r.sd <= 1e-12 * scale || r.sd == 0.0) {
    r.sd = 0.0;
    if (std::abs(r.mean) <= 1e-12 * scale) r.mean = 0.0;
    if (r.mean == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = std::copysign(std::numeric_limits<double>::infinity(), r.mean);
      r.p = 0.0;
    }
    return r;
  }
  r.t = r.mean / (r.sd / std::sqrt(static_cast<double>(n)));
  r.p = student_t_two_tailed(r.t, static_cast<double>(r.df));
  return r;
}

}  // namespace ltc
