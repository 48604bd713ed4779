// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

// Reference values frozen from generate_oracles.py.

#pragma once

#include <cstddef>
#include <vector>

namespace ltc::oracle {

struct NdcgOracle {
  std::vector<int> ranked_grades;       // grade of the document at each rank
  std::vector<int> unretrieved_grades;  // judged documents missing from the ranking
  double ndcg;
};

struct TTestOracle {
  std::vector<double> deltas;
  double t;
  double p;
};

struct BetaOracle {
  double a, b, x, value;
};

struct PoolOracle {
  std::size_t n, n_out, width;
  std::vector<double> input, output;
};

#include "oracle_values.inc"

}  // namespace ltc::oracle
