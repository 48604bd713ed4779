// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#include "ltc/synth_data.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ltc/error.hpp"
#include "ltc/tensor.hpp"
#include "ltc/tokenizer.hpp"

namespace ltc {

Lexicon::Lexicon(std::size_t vocab_size) : vocab_size_(vocab_size) {
  if (vocab_size <= special::kReservedCount) {
    throw ConfigError("vocabulary of " + std::to_string(vocab_size) + " has no word tokens");
  }
  const std::size_t span = vocab_size - special::kReservedCount;
  words_.resize(span);
  std::size_t filled = 0;
  for (std::uint64_t counter = 0; filled < span; ++counter) {
    std::string candidate = "w" + std::to_string(counter);
    auto& slot = words_[static_cast<std::size_t>(word_id(candidate, vocab_size)) -
                        special::kLowReserved];
    if (slot.empty()) {
      slot = std::move(candidate);
      ++filled;
    }
  }
}

const std::string& Lexicon::word(std::int32_t id) const {
  const auto lo = static_cast<std::int32_t>(special::kLowReserved);
  if (id < lo || static_cast<std::size_t>(id - lo) >= words_.size()) {
    throw ArgumentError("token id " + std::to_string(id) + " is not a word token");
  }
  return words_[static_cast<std::size_t>(id - lo)];
}

std::string Lexicon::render(std::span<const std::int32_t> ids) const {
  std::string text;
  for (auto id : ids) {
    if (!text.empty()) text += ' ';
    text += word(id);
  }
  return text;
}

SynthCollection make_synth_collection(std::uint64_t seed, const SynthCollectionOptions& o) {
  if (o.num_queries == 0) throw ArgumentError("synthetic collection needs at least one query");
  if (o.candidates < 1 + o.task.negatives) {
    throw ArgumentError("candidates per query must cover the positive and " +
                        std::to_string(o.task.negatives) + " negatives");
  }
  const Lexicon lexicon(o.task.vocab_size);
  const auto examples = synth_task_gen(seed, o.num_queries, o.doc_len, o.task);
  Rng rng(seed ^ 0xc2b2ae3d27d4eb4fULL);
  const auto filler_lo = static_cast<std::int64_t>(special::kLowReserved + o.task.query_pool);
  const auto filler_hi =
      static_cast<std::int64_t>(o.task.vocab_size - special::kMaxIdentifiers);

  SynthCollection c;
  for (std::size_t q = 0; q < examples.size(); ++q) {
    const auto& ex = examples[q];
    const std::string qid = "q" + std::to_string(q + 1);
    c.queries[qid] = lexicon.render(ex.query);
    c.query_order.push_back(qid);
    auto& judged = c.qrels[qid];

    std::vector<std::string> docs;
    auto add = [&](const std::vector<std::int32_t>& tokens, int grade) {
      const std::string did = qid + "_d" + std::to_string(docs.size() + 1);
      c.corpus[did] = lexicon.render(tokens);
      c.doc_order.push_back(did);
      judged[did] = grade;
      docs.push_back(did);
    };
    add(ex.positive, 1);
    for (const auto& neg : ex.negatives) add(neg, 0);
    while (docs.size() < o.candidates) {
      std::vector<std::int32_t> filler(o.doc_len);
      for (auto& t : filler) {
        t = static_cast<std::int32_t>(filler_lo +
                                      static_cast<std::int64_t>(rng.below(
                                          static_cast<std::uint64_t>(filler_hi - filler_lo))));
      }
      add(filler, 0);
    }
    rng.shuffle(docs.begin(), docs.end());
    QueryCandidates qc{qid, {}};
    for (std::size_t i = 0; i < docs.size(); ++i) {
      qc.candidates.push_back({docs[i], i + 1, static_cast<double>(docs.size() - i)});
    }
    c.run.push_back(std::move(qc));
  }
  return c;
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

void write_synth_collection(const SynthCollection& c, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
  const fs::path root(dir);

  auto corpus_path = root / "corpus.jsonl";
  auto corpus = open_output(corpus_path);
  for (const auto& did : c.doc_order) {
    corpus << nlohmann::json{{"id", did}, {"text", c.corpus.at(did)}}.dump() << '\n';
  }
  finish(corpus, corpus_path);

  auto queries_path = root / "queries.tsv";
  auto queries = open_output(queries_path);
  for (const auto& qid : c.query_order) queries << qid << '\t' << c.queries.at(qid) << '\n';
  finish(queries, queries_path);

  std::vector<RunEntry> entries;
  for (const auto& q : c.run) {
    for (const auto& cand : q.candidates) {
      entries.push_back({q.query_id, cand.doc_id, cand.first_stage_rank, cand.first_stage_score,
                         "synth"});
    }
  }
  write_run(entries, (root / "run.trec").string());

  auto qrels_path = root / "qrels.txt";
  auto qrels = open_output(qrels_path);
  for (const auto& q : c.run) {
    const auto& judged = c.qrels.at(q.query_id);
    for (const auto& cand : q.candidates) {
      qrels << q.query_id << " 0 " << cand.doc_id << ' ' << judged.at(cand.doc_id) << '\n';
    }
  }
  finish(qrels, qrels_path);
}

}  // namespace ltc
