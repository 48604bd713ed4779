// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "ltc/metrics.hpp"
#include "oracles/brute_force.hpp"
#include "oracles/oracles.hpp"
#include "test_util.hpp"

namespace ltc {
namespace {

struct Case {
  std::vector<std::string> ranked;
  std::unordered_map<std::string, int> judged;
};

Case build_case(const std::vector<int>& ranked_grades, const std::vector<int>& unretrieved) {
  Case c;
  for (std::size_t i = 0; i < ranked_grades.size(); ++i) {
    c.ranked.push_back("r" + std::to_string(i));
    c.judged["r" + std::to_string(i)] = ranked_grades[i];
  }
  for (std::size_t i = 0; i < unretrieved.size(); ++i) c.judged["u" + std::to_string(i)] = unretrieved[i];
  return c;
}

TEST(Ndcg, IdealSingleRelevant) {
  const std::vector<std::string> ranked{"a", "b"};
  EXPECT_EQ(ndcg_at_10(ranked, {{"a", 1}}), 1.0);
}

TEST(Ndcg, WorkedExample) {
  const std::vector<std::string> ranked{"d2", "d1", "d3"};
  const double v = ndcg_at_10(ranked, {{"d1", 3}, {"d2", 1}});
  EXPECT_NEAR(v, 0.7098, 1e-4);
  EXPECT_NEAR(v, (1.0 + 7.0 / std::log2(3.0)) / (7.0 + 1.0 / std::log2(3.0)), 1e-15);
}

TEST(Ndcg, CutoffAtTen) {
  std::vector<std::string> ranked;
  for (int i = 0; i < 11; ++i) ranked.push_back("d" + std::to_string(i));
  EXPECT_EQ(ndcg_at_10(ranked, {{"d10", 2}}), 0.0);
}

TEST(Ndcg, EmptyCases) {
  EXPECT_EQ(ndcg_at_10({}, {{"a", 1}}), 0.0);
  const std::vector<std::string> ranked{"a"};
  EXPECT_EQ(ndcg_at_10(ranked, {{"a", 0}}), 0.0);
  EXPECT_EQ(ndcg_at_10(ranked, {}), 0.0);
}

TEST(Ndcg, MatchesSklearnReference) {
  for (const auto& o : oracle::kNdcgOracles) {
    const auto c = build_case(o.ranked_grades, o.unretrieved_grades);
    EXPECT_NEAR(ndcg_at_10(c.ranked, c.judged), o.ndcg, 1e-12);
  }
}

TEST(Ndcg, PropertiesOnRandomLists) {
  Rng rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<int> grades(testing::random_between(rng, 1, 25));
    for (auto& g : grades) g = static_cast<int>(rng.below(4));
    auto c = build_case(grades, {});
    const double v = ndcg_at_10(c.ranked, c.judged);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_NEAR(v, oracle::ndcg10(grades, grades), 1e-12);
    if (c.ranked.size() > 11) {
      auto permuted = c.ranked;
      rng.shuffle(permuted.begin() + 10, permuted.end());
      EXPECT_EQ(ndcg_at_10(permuted, c.judged), v);
      // Swap a deeper, better document into the top 10 over a worse one.
      for (std::size_t inner = 0; inner < 10; ++inner)
        for (std::size_t outer = 10; outer < permuted.size(); ++outer)
          if (c.judged[permuted[outer]] > c.judged[permuted[inner]]) {
            auto swapped = permuted;
            std::swap(swapped[inner], swapped[outer]);
            EXPECT_GE(ndcg_at_10(swapped, c.judged), v - 1e-15);
          }
    }
  }
}

TEST(EvaluateRun, ExcludesQueriesWithoutRelevantDocs) {
  const std::vector<RunEntry> run{{"q1", "a", 1, 2, "t"}, {"q1", "b", 2, 1, "t"},
                                  {"q2", "c", 1, 1, "t"}, {"q3", "d", 1, 1, "t"}};
  const Qrels qrels{{"q1", {{"b", 1}}}, {"q2", {{"c", 0}}}, {"q4", {{"x", 2}}}};
  const auto r = evaluate_run(run, qrels);
  ASSERT_EQ(r.query_count, 1u);
  EXPECT_EQ(r.per_query[0].first, "q1");
  EXPECT_NEAR(r.mean, 1.0 / std::log2(3.0), 1e-15);
  EXPECT_EQ(format_report(r), "q1\t0.6309\nall\t0.6309\n");
}

TEST(EvaluateRun, MeanIsArithmeticMean) {
  const std::vector<RunEntry> run{{"q1", "a", 1, 2, "t"}, {"q2", "b", 1, 1, "t"},
                                  {"q2", "c", 2, 0, "t"}};
  const Qrels qrels{{"q1", {{"a", 1}}}, {"q2", {{"c", 1}}}};
  const auto r = evaluate_run(run, qrels);
  ASSERT_EQ(r.query_count, 2u);
  EXPECT_NEAR(r.mean, (1.0 + 1.0 / std::log2(3.0)) / 2, 1e-15);
}

TEST(TTest, WorkedExample) {
  const std::vector<double> d{1, -1, 2, 0};
  const auto r = paired_t_test(d);
  EXPECT_NEAR(r.mean, 0.5, 1e-15);
  EXPECT_NEAR(r.sd, 1.2910, 1e-4);
  EXPECT_NEAR(r.t, 0.7746, 1e-4);
  EXPECT_EQ(r.df, 3u);
  EXPECT_NEAR(r.p, 0.495, 1e-3);
}

TEST(TTest, MatchesScipyReference) {
  for (const auto& o : oracle::kTTestOracles) {
    const auto r = paired_t_test(o.deltas);
    EXPECT_NEAR(r.t, o.t, 1e-9 * std::max(1.0, std::abs(o.t)));
    EXPECT_NEAR(r.p, o.p, 1e-9);
  }
}

TEST(TTest, ZeroVarianceRule) {
  EXPECT_EQ(paired_t_test(std::vector<double>(5, 0.0)).p, 1.0);
  EXPECT_EQ(paired_t_test(std::vector<double>(4, 0.1)).p, 0.0);
  EXPECT_EQ(paired_t_test(std::vector<double>(4, -0.3)).p, 0.0);
}

TEST(TTest, NeedsTwoObservations) {
  EXPECT_THROW(paired_t_test(std::vector<double>{1.0}), ArgumentError);
  EXPECT_THROW(paired_t_test(std::vector<double>{}), ArgumentError);
}

TEST(TTest, SignFlipKeepsP) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> d(testing::random_between(rng, 2, 40));
    for (auto& v : d) v = rng.uniform(-1, 1.2);
    auto neg = d;
    for (auto& v : neg) v = -v;
    const auto a = paired_t_test(d), b = paired_t_test(neg);
    EXPECT_NEAR(a.t, -b.t, 1e-12);
    EXPECT_NEAR(a.p, b.p, 1e-12);
    EXPECT_GE(a.p, 0.0);
    EXPECT_LE(a.p, 1.0);
  }
}

TEST(TTest, PMonotoneInAbsT) {
  for (double df : {1.0, 3.0, 10.0, 99.0}) {
    double prev = 1.0;
    for (double t = 0.0; t < 12.0; t += 0.25) {
      const double p = student_t_two_tailed(t, df);
      EXPECT_LE(p, prev + 1e-15);
      EXPECT_NEAR(p, student_t_two_tailed(-t, df), 1e-15);
      prev = p;
    }
  }
  EXPECT_EQ(student_t_two_tailed(0.0, 5.0), 1.0);
}

TEST(IncompleteBeta, MatchesScipyReference) {
  for (const auto& o : oracle::kBetaOracles)
    EXPECT_NEAR(incomplete_beta(o.a, o.b, o.x), o.value, 1e-10) << o.a << " " << o.b << " " << o.x;
  EXPECT_THROW(incomplete_beta(0.0, 1.0, 0.5), ArgumentError);
  EXPECT_THROW(incomplete_beta(1.0, 1.0, 1.5), ArgumentError);
}

TEST(PairedDeltas, UsesCommonQueriesInFirstOrder) {
  MetricReport a, b;
  a.per_query = {{"q1", 0.5}, {"q2", 0.2}, {"q3", 0.9}};
  b.per_query = {{"q3", 1.0}, {"q1", 0.25}};
  EXPECT_EQ(paired_deltas(a, b), (std::vector<double>{-0.25, 0.09999999999999998}));
}

}  // namespace
}  // namespace ltc
