// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#include "ltc/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "ltc/parallel.hpp"
#include "ltc/tokenizer.hpp"

namespace ltc {

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

template <typename Int>
Int parse_int(std::string_view field, const std::string& path, std::size_t line,
              const char* what) {
  Int value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw FormatError(path, line, std::string("bad ") + what + " '" + std::string(field) + "'");
  }
  return value;
}

double parse_double(std::string_view field, const std::string& path, std::size_t line) {
  const std::string s(field);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty() || !std::isfinite(v)) {
    throw FormatError(path, line, "bad score '" + s + "'");
  }
  return v;
}

}  // namespace

TextMap load_corpus(const std::string& path) {
  auto in = open_input(path);
  TextMap corpus;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (blank(line)) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(path, no, std::string("invalid JSON: ") + e.what());
    }
    if (!record.is_object() || !record.contains("id") || !record.contains("text") ||
        !record["text"].is_string()) {
      throw FormatError(path, no, "expected an object with \"id\" and string \"text\"");
    }
    const auto& id = record["id"];
    std::string key;
    if (id.is_string()) {
      key = id.get<std::string>();
    } else if (id.is_number_integer()) {
      key = std::to_string(id.get<long long>());
    } else {
      throw FormatError(path, no, "\"id\" must be a string or integer");
    }
    if (key.empty()) throw FormatError(path, no, "empty document id");
    corpus[key] = record["text"].get<std::string>();
  }
  return corpus;
}

TextMap load_queries(const std::string& path) {
  auto in = open_input(path);
  TextMap queries;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw FormatError(path, no, "expected 'id<TAB>text'");
    }
    queries[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return queries;
}

std::vector<RunEntry> load_run_entries(const std::string& path) {
  auto in = open_input(path);
  std::vector<RunEntry> entries;
  std::unordered_map<std::string, std::size_t> order;
  std::unordered_map<std::string, std::unordered_set<std::size_t>> ranks;
  std::unordered_map<std::string, std::unordered_set<std::string>> docs;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (blank(line)) continue;
    const auto f = split_ws(line);
    if (f.size() != 6) {
      throw FormatError(path, no, "expected 6 columns 'qid Q0 docid rank score tag', got " +
                                      std::to_string(f.size()));
    }
    const std::string qid(f[0]);
    const std::string doc(f[2]);
    const auto rank = parse_int<std::size_t>(f[3], path, no, "rank");
    const double score = parse_double(f[4], path, no);
    if (!ranks[qid].insert(rank).second) {
      throw FormatError(path, no, "duplicate rank " + std::to_string(rank) + " for query " + qid);
    }
    if (!docs[qid].insert(doc).second) {
      throw FormatError(path, no, "duplicate document " + doc + " for query " + qid);
    }
    order.try_emplace(qid, order.size());
    entries.push_back({qid, doc, rank, score, std::string(f[5])});
  }
  std::stable_sort(entries.begin(), entries.end(), [&](const RunEntry& a, const RunEntry& b) {
    const auto qa = order.at(a.query_id), qb = order.at(b.query_id);
    return qa != qb ? qa < qb : a.rank < b.rank;
  });
  return entries;
}

CandidateRun load_run(const std::string& path) {
  return candidates_from_entries(load_run_entries(path));
}

Qrels load_qrels(const std::string& path, Warnings* warnings) {
  auto in = open_input(path);
  Qrels qrels;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (blank(line)) continue;
    const auto f = split_ws(line);
    if (f.size() != 4) {
      throw FormatError(path, no, "expected 4 columns 'qid 0 docid grade', got " +
                                      std::to_string(f.size()));
    }
    const int grade = parse_int<int>(f[3], path, no, "grade");
    auto& per_query = qrels[std::string(f[0])];
    auto [it, fresh] = per_query.insert_or_assign(std::string(f[2]), grade);
    if (!fresh && warnings) {
      warnings->push_back(path + ":" + std::to_string(no) + ": duplicate judgment for (" +
                          std::string(f[0]) + ", " + std::string(f[2]) + "), keeping the last");
    }
  }
  return qrels;
}

void check_run_entries(std::span<const RunEntry> entries) {
  std::unordered_map<std::string, std::pair<std::size_t, double>> last;
  for (const auto& e : entries) {
    if (e.query_id.empty() || e.doc_id.empty()) throw ArgumentError("run entry with empty id");
    if (!std::isfinite(e.score)) {
      throw ArgumentError("non-finite score for " + e.query_id + "/" + e.doc_id);
    }
    auto it = last.find(e.query_id);
    const std::size_t expected = it == last.end() ? 1 : it->second.first + 1;
    if (e.rank != expected) {
      throw ArgumentError("query " + e.query_id + ": rank " + std::to_string(e.rank) +
                          " where " + std::to_string(expected) + " was expected");
    }
    if (it != last.end() && e.score > it->second.second) {
      throw ArgumentError("query " + e.query_id + ": score increases at rank " +
                          std::to_string(e.rank));
    }
    last[e.query_id] = {e.rank, e.score};
  }
}

std::string format_run(std::span<const RunEntry> entries) {
  std::string out;
  char buf[64];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof(buf), "%.6f", e.score);
    out += e.query_id;
    out += " Q0 ";
    out += e.doc_id;
    out += ' ';
    out += std::to_string(e.rank);
    out += ' ';
    out += buf;
    out += ' ';
    out += e.tag;
    out += '\n';
  }
  return out;
}

void write_run(std::span<const RunEntry> entries, const std::string& path) {
  check_run_entries(entries);
  const auto text = format_run(entries);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open run file for writing: " + path);
  out << text;
  if (!out) throw IoError("failed writing run file: " + path);
}

std::vector<QueryCandidates> candidates_from_entries(std::span<const RunEntry> entries) {
  std::vector<QueryCandidates> out;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& e : entries) {
    auto [it, fresh] = index.try_emplace(e.query_id, out.size());
    if (fresh) out.push_back({e.query_id, {}});
    out[it->second].candidates.push_back({e.doc_id, e.rank, e.score});
  }
  return out;
}

namespace {

// Scores continue strictly below `floor` for entries the model did not order.
void append_tail(std::vector<RunEntry>& out, const std::string& query_id,
                 std::span<const Candidate> tail, const std::string& tag) {
  double score = out.empty() ? 0.0 : out.back().score;
  for (const auto& c : tail) {
    score -= 1.0;
    out.push_back({query_id, c.doc_id, out.size() + 1, score, tag});
  }
}

}  // namespace

std::vector<RunEntry> rerank_pointwise(const std::string& query_id,
                                       std::span<const Candidate> candidates, std::size_t depth,
                                       const PointwiseScorer& scorer, const std::string& tag,
                                       Warnings* warnings) {
  depth = std::min(depth, candidates.size());
  struct Scored {
    const Candidate* candidate;
    double score;
  };
  std::vector<Scored> scored;
  std::vector<Candidate> missing;
  for (std::size_t i = 0; i < depth; ++i) {
    const auto s = scorer(candidates[i]);
    if (!s) {
      if (warnings) {
        warnings->push_back("query " + query_id + ": no text for document " +
                            candidates[i].doc_id + ", kept at tail");
      }
      missing.push_back(candidates[i]);
      continue;
    }
    if (!std::isfinite(*s)) {
      throw NumericError("non-finite score for " + query_id + "/" + candidates[i].doc_id);
    }
    scored.push_back({&candidates[i], *s});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.candidate->first_stage_rank < b.candidate->first_stage_rank;
  });
  std::vector<RunEntry> out;
  out.reserve(candidates.size());
  for (const auto& s : scored) {
    out.push_back({query_id, s.candidate->doc_id, out.size() + 1, s.score, tag});
  }
  std::vector<Candidate> tail(candidates.begin() + static_cast<std::ptrdiff_t>(depth),
                              candidates.end());
  tail.insert(tail.end(), missing.begin(), missing.end());
  append_tail(out, query_id, tail, tag);
  return out;
}

std::vector<Candidate> sliding_window_order(std::span<const Candidate> candidates,
                                            std::size_t window, std::size_t step,
                                            const WindowScorer& scorer) {
  if (step < 1 || window <= step) {
    throw ArgumentError("sliding window needs window > step >= 1 (window " +
                        std::to_string(window) + ", step " + std::to_string(step) + ")");
  }
  std::vector<Candidate> list(candidates.begin(), candidates.end());
  if (list.empty()) return list;
  std::size_t end = list.size();
  for (;;) {
    const std::size_t begin = end > window ? end - window : 0;
    std::span<const Candidate> slice(list.data() + begin, end - begin);
    const auto scores = scorer(slice);
    if (scores.size() != slice.size()) {
      throw ArgumentError("window scorer returned " + std::to_string(scores.size()) +
                          " scores for " + std::to_string(slice.size()) + " candidates");
    }
    const auto order = order_by_logits<double>(scores);
    std::vector<Candidate> reordered;
    reordered.reserve(order.size());
    for (auto i : order) reordered.push_back(slice[i]);
    std::copy(reordered.begin(), reordered.end(), list.begin() + static_cast<std::ptrdiff_t>(begin));
    if (begin == 0) break;
    end -= step;
  }
  return list;
}

std::vector<RunEntry> sliding_window_rerank(const std::string& query_id,
                                            std::span<const Candidate> candidates,
                                            std::size_t depth, std::size_t window,
                                            std::size_t step, const WindowScorer& scorer,
                                            const std::string& tag) {
  depth = std::min(depth, candidates.size());
  auto ordered = sliding_window_order(candidates.first(depth), window, step, scorer);
  ordered.insert(ordered.end(), candidates.begin() + static_cast<std::ptrdiff_t>(depth),
                 candidates.end());
  std::vector<RunEntry> out;
  out.reserve(ordered.size());
  const auto n = static_cast<double>(ordered.size());
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    out.push_back({query_id, ordered[i].doc_id, i + 1, n - static_cast<double>(i), tag});
  }
  return out;
}

namespace {

std::vector<std::int32_t> truncated_tokens(const std::string& text, std::size_t vocab,
                                           std::size_t limit) {
  auto ids = tokenize(text, vocab);
  if (ids.size() > limit) ids.resize(limit);
  return ids;
}

template <typename PerQuery>
std::vector<RunEntry> rerank_run(const CandidateRun& run, std::size_t threads, PerQuery&& fn,
                                 Warnings* warnings) {
  std::vector<std::vector<RunEntry>> results(run.size());
  std::vector<Warnings> notes(run.size());
  parallel_for(run.size(), threads, [&](std::size_t i) { results[i] = fn(run[i], notes[i]); });
  std::vector<RunEntry> out;
  for (std::size_t i = 0; i < run.size(); ++i) {
    out.insert(out.end(), results[i].begin(), results[i].end());
    if (warnings) warnings->insert(warnings->end(), notes[i].begin(), notes[i].end());
  }
  return out;
}

std::vector<RunEntry> keep_first_stage(const QueryCandidates& q, const std::string& tag) {
  std::vector<RunEntry> out;
  append_tail(out, q.query_id, q.candidates, tag);
  return out;
}

}  // namespace

std::vector<RunEntry> rerank_run_pointwise(const Parameters<float>& params, const TextMap& corpus,
                                           const TextMap& queries, const CandidateRun& run,
                                           const RerankOptions& options, Warnings* warnings) {
  options.ltc.validate(params.config.num_layers);
  const auto vocab = params.config.vocab_size;
  return rerank_run(
      run, options.threads,
      [&](const QueryCandidates& q, Warnings& notes) {
        const auto qtext = queries.find(q.query_id);
        if (qtext == queries.end()) {
          notes.push_back("query " + q.query_id + " has no text, first-stage order kept");
          return keep_first_stage(q, options.tag);
        }
        const auto query_tokens = tokenize(qtext->second, vocab);
        PointwiseScorer scorer = [&](const Candidate& c) -> std::optional<double> {
          const auto doc = corpus.find(c.doc_id);
          if (doc == corpus.end()) return std::nullopt;
          const auto doc_tokens = truncated_tokens(doc->second, vocab, options.max_doc_tokens);
          return pointwise_score<float>(query_tokens, doc_tokens, params, options.ltc);
        };
        return rerank_pointwise(q.query_id, q.candidates, options.depth, scorer, options.tag,
                                &notes);
      },
      warnings);
}

std::size_t listwise_doc_budget(const ModelConfig& config, std::size_t query_tokens,
                                std::size_t k, std::size_t max_doc_tokens) {
  const std::size_t fixed = tokenize(kListwiseInstruction, config.vocab_size).size() +
                            query_tokens + k + 1;
  if (k == 0 || fixed >= config.max_seq) return 0;
  return std::min(max_doc_tokens, (config.max_seq - fixed) / k);
}

std::vector<RunEntry> rerank_run_listwise(const Parameters<float>& params, const TextMap& corpus,
                                          const TextMap& queries, const CandidateRun& run,
                                          const RerankOptions& options, Warnings* warnings) {
  options.ltc.validate(params.config.num_layers);
  if (options.window > special::kMaxIdentifiers) {
    throw ConfigError("window of " + std::to_string(options.window) + " exceeds the " +
                      std::to_string(special::kMaxIdentifiers) + " document identifiers");
  }
  const auto vocab = params.config.vocab_size;
  return rerank_run(
      run, options.threads,
      [&](const QueryCandidates& q, Warnings& notes) {
        const auto qtext = queries.find(q.query_id);
        if (qtext == queries.end()) {
          notes.push_back("query " + q.query_id + " has no text, first-stage order kept");
          return keep_first_stage(q, options.tag);
        }
        const auto query_tokens = tokenize(qtext->second, vocab);
        WindowScorer scorer = [&](std::span<const Candidate> window) {
          if (window.size() < 2) return std::vector<double>(window.size(), 0.0);
          const auto budget = listwise_doc_budget(params.config, query_tokens.size(),
                                                  window.size(), options.max_doc_tokens);
          std::vector<std::vector<std::int32_t>> docs;
          for (const auto& c : window) {
            const auto doc = corpus.find(c.doc_id);
            if (doc == corpus.end()) {
              notes.push_back("query " + q.query_id + ": no text for document " + c.doc_id);
              docs.emplace_back();
            } else {
              docs.push_back(truncated_tokens(doc->second, vocab, budget));
            }
          }
          const auto logits = listwise_identifier_logits<float>(query_tokens, docs, params,
                                                                options.ltc);
          return std::vector<double>(logits.begin(), logits.end());
        };
        return sliding_window_rerank(q.query_id, q.candidates, options.depth, options.window,
                                     options.step, scorer, options.tag);
      },
      warnings);
}

}  // namespace ltc
