// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

// Reference implementations written for clarity, not speed. They share no
// code with the library.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace ltc::oracle {

/// Adaptive average pooling that materializes each segment as a list of
/// row copies before averaging.
inline std::vector<std::vector<double>> pool_rows(const std::vector<std::vector<double>>& rows,
                                                  std::size_t n_out) {
  const std::size_t n = rows.size();
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < n_out; ++i) {
    const auto start = static_cast<std::size_t>(std::floor(static_cast<double>(i * n) / n_out));
    const auto stop =
        static_cast<std::size_t>(std::ceil(static_cast<double>((i + 1) * n) / n_out));
    std::vector<std::vector<double>> segment;
    for (std::size_t r = start; r < stop; ++r) segment.push_back(rows[r]);
    std::vector<double> mean(rows.front().size(), 0.0);
    for (const auto& row : segment)
      for (std::size_t c = 0; c < row.size(); ++c) mean[c] += row[c];
    for (auto& v : mean) v /= static_cast<double>(segment.size());
    out.push_back(mean);
  }
  return out;
}

/// exp2(grade) - 1 gains, 1 / log2(rank + 1) discount.
inline double ndcg10(const std::vector<int>& ranked_grades, std::vector<int> all_grades) {
  auto dcg = [](const std::vector<int>& grades) {
    double s = 0;
    for (std::size_t i = 0; i < grades.size() && i < 10; ++i)
      if (grades[i] > 0) s += (std::pow(2.0, grades[i]) - 1.0) / std::log2(i + 2.0);
    return s;
  };
  std::sort(all_grades.rbegin(), all_grades.rend());
  const double ideal = dcg(all_grades);
  return ideal > 0 ? dcg(ranked_grades) / ideal : 0.0;
}

}  // namespace ltc::oracle
