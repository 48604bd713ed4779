// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ltc/pipeline.hpp"
#include "ltc/train.hpp"

namespace ltc {

/// Maps every word-token id of a vocabulary to a short word that tokenizes
/// back to exactly that id.
class Lexicon {
 public:
  explicit Lexicon(std::size_t vocab_size);

  const std::string& word(std::int32_t id) const;
  std::string render(std::span<const std::int32_t> ids) const;
  std::size_t vocab_size() const noexcept { return vocab_size_; }

 private:
  std::size_t vocab_size_;
  std::vector<std::string> words_;  // indexed by id - kLowReserved
};

struct SynthCollectionOptions {
  std::size_t num_queries = 20;
  std::size_t candidates = 20;  // per query, >= 1 + negatives
  std::size_t doc_len = 12;
  SynthOptions task;
};

/// Text rendering of the synthetic task as a reranking collection. Each
/// query's candidates are its positive (grade 1), its hard negatives and
/// filler documents (grade 0), in a seeded random first-stage order.
struct SynthCollection {
  TextMap corpus;
  TextMap queries;
  CandidateRun run;
  Qrels qrels;
  std::vector<std::string> query_order;
  std::vector<std::string> doc_order;
};

SynthCollection make_synth_collection(std::uint64_t seed, const SynthCollectionOptions& options);

/// Writes corpus.jsonl, queries.tsv, run.trec and qrels.txt into `dir`.
void write_synth_collection(const SynthCollection& collection, const std::string& dir);

}  // namespace ltc
