// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#include "ltc/ltc.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <new>
#include <string>

#include "ltc/bench.hpp"
#include "ltc/checkpoint.hpp"
#include "ltc/error.hpp"
#include "ltc/metrics.hpp"
#include "ltc/pipeline.hpp"
#include "ltc/synth_data.hpp"
#include "ltc/tokenizer.hpp"
#include "ltc/train.hpp"

struct ltc_model {
  ltc::Parameters<float> params;
};

namespace {

thread_local std::string last_error;

template <typename Fn>
ltc_status guarded(Fn&& fn) noexcept {
  try {
    last_error.clear();
    fn();
    return LTC_OK;
  } catch (const ltc::FormatError& e) {
    last_error = e.what();
    return LTC_ERR_FORMAT;
  } catch (const ltc::ShapeError& e) {
    last_error = e.what();
    return LTC_ERR_SHAPE;
  } catch (const ltc::ArgumentError& e) {
    last_error = e.what();
    return LTC_ERR_ARGUMENT;
  } catch (const ltc::ConfigError& e) {
    last_error = e.what();
    return LTC_ERR_CONFIG;
  } catch (const ltc::InputError& e) {
    last_error = e.what();
    return LTC_ERR_INPUT;
  } catch (const ltc::IoError& e) {
    last_error = e.what();
    return LTC_ERR_IO;
  } catch (const ltc::NumericError& e) {
    last_error = e.what();
    return LTC_ERR_NUMERIC;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return LTC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return LTC_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return LTC_ERR_INTERNAL;
  }
}

template <typename P>
void require(const P* ptr, const char* name) {
  if (ptr == nullptr) throw ltc::ArgumentError(std::string(name) + " must not be NULL");
}

ltc::LtcConfig to_core(ltc_compression c) {
  if (c.target_layer == 0) return ltc::LtcConfig::disabled();
  return ltc::LtcConfig::at(c.target_layer, c.rate);
}

ltc_compression to_c(const ltc::LtcConfig& c) {
  return {c.target_layer ? static_cast<uint32_t>(*c.target_layer) : 0u, c.rate};
}

ltc::ModelConfig to_core(const ltc_model_config& c) {
  ltc::ModelConfig m;
  m.num_layers = c.num_layers;
  m.hidden = c.hidden;
  m.num_heads = c.num_heads;
  m.mlp_dim = c.mlp_dim;
  m.vocab_size = c.vocab_size;
  m.max_seq = c.max_seq;
  m.rope_base = c.rope_base;
  m.validate();
  return m;
}

ltc_model_config to_c(const ltc::ModelConfig& m) {
  return {static_cast<uint32_t>(m.num_layers), static_cast<uint32_t>(m.hidden),
          static_cast<uint32_t>(m.num_heads),  static_cast<uint32_t>(m.mlp_dim),
          static_cast<uint32_t>(m.vocab_size), static_cast<uint32_t>(m.max_seq),
          m.rope_base};
}

ltc::RerankOptions to_core(const ltc_rerank_options* o) {
  ltc::RerankOptions r;
  if (o == nullptr) return r;
  r.depth = o->depth;
  r.window = o->window;
  r.step = o->step;
  r.max_doc_tokens = o->max_doc_tokens;
  r.threads = o->threads;
  r.ltc = to_core(o->ltc);
  if (o->tag != nullptr) r.tag = o->tag;
  if (r.tag.empty() || r.tag.find_first_of(" \t\r\n") != std::string::npos) {
    throw ltc::ArgumentError("run tag must be a nonempty word without whitespace");
  }
  if (r.depth == 0) throw ltc::ArgumentError("depth must be at least 1");
  if (r.threads == 0) throw ltc::ArgumentError("threads must be at least 1");
  return r;
}

ltc::TrainConfig to_core(const ltc_train_config& c) {
  ltc::TrainConfig t;
  t.epochs = c.epochs;
  t.batch_size = c.batch_size;
  t.learning_rate = c.learning_rate;
  t.momentum = c.momentum;
  t.grad_clip = c.grad_clip;
  t.negatives = c.negatives;
  t.ltc = to_core(c.ltc);
  t.seed = c.seed;
  t.train_queries = c.train_queries;
  t.resample_each_epoch = c.resample_each_epoch != 0;
  t.heldout_queries = c.heldout_queries;
  t.doc_len = c.doc_len;
  t.query_pool = c.query_pool;
  t.threads = c.threads;
  return t;
}

void forward_warnings(const ltc::Warnings& warnings, ltc_message_fn fn, void* user) {
  if (fn == nullptr) return;
  for (const auto& w : warnings) fn(w.c_str(), user);
}

void write_text(const std::string& text, const char* path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ltc::IoError(std::string("cannot open ") + path + " for writing");
  out << text;
  if (!out) throw ltc::IoError(std::string("failed writing ") + path);
}

}  // namespace

extern "C" {

const char* ltc_last_error(void) { return last_error.c_str(); }

const char* ltc_status_name(ltc_status status) {
  switch (status) {
    case LTC_OK: return "ok";
    case LTC_ERR_ARGUMENT: return "argument error";
    case LTC_ERR_CONFIG: return "configuration error";
    case LTC_ERR_SHAPE: return "shape error";
    case LTC_ERR_INPUT: return "input error";
    case LTC_ERR_FORMAT: return "format error";
    case LTC_ERR_IO: return "i/o error";
    case LTC_ERR_NUMERIC: return "numeric error";
    case LTC_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void ltc_model_config_default(ltc_model_config* config) {
  if (config) *config = to_c(ltc::ModelConfig{});
}

void ltc_model_config_train_default(ltc_model_config* config) {
  if (config) *config = to_c(ltc::default_train_model());
}

ltc_status ltc_model_create(const ltc_model_config* config, uint64_t seed, ltc_model** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    *out = nullptr;
    *out = new ltc_model{ltc::Parameters<float>::init(to_core(*config), seed)};
  });
}

ltc_status ltc_model_load(const char* path, ltc_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    *out = new ltc_model{ltc::load_checkpoint(path)};
  });
}

ltc_status ltc_model_save(const ltc_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    ltc::save_checkpoint(model->params, path);
  });
}

void ltc_model_free(ltc_model* model) { delete model; }

ltc_status ltc_model_get_config(const ltc_model* model, ltc_model_config* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = to_c(model->params.config);
  });
}

ltc_status ltc_tokenize(const char* text, uint32_t vocab_size, int32_t* out, size_t capacity,
                        size_t* length) {
  return guarded([&] {
    require(text, "text");
    require(length, "length");
    if (capacity > 0) require(out, "out");
    const auto ids = ltc::tokenize(text, vocab_size);
    *length = ids.size();
    std::copy_n(ids.begin(), std::min(capacity, ids.size()), out);
  });
}

ltc_status ltc_score_pointwise(const ltc_model* model, const int32_t* query, size_t query_len,
                               const int32_t* doc, size_t doc_len, ltc_compression ltc,
                               double* score) {
  return guarded([&] {
    require(model, "model");
    require(score, "score");
    if (query_len > 0) require(query, "query");
    if (doc_len > 0) require(doc, "doc");
    *score = ltc::pointwise_score<float>(std::span(query, query_len), std::span(doc, doc_len),
                                         model->params, to_core(ltc));
  });
}

ltc_status ltc_listwise_logits(const ltc_model* model, const int32_t* query, size_t query_len,
                               const int32_t* const* docs, const size_t* doc_lens, size_t k,
                               ltc_compression ltc, double* out_logits) {
  return guarded([&] {
    require(model, "model");
    require(out_logits, "out_logits");
    if (query_len > 0) require(query, "query");
    if (k > 0) {
      require(docs, "docs");
      require(doc_lens, "doc_lens");
    }
    std::vector<std::vector<std::int32_t>> bodies(k);
    for (size_t j = 0; j < k; ++j) {
      if (doc_lens[j] > 0) require(docs[j], "docs[j]");
      bodies[j].assign(docs[j], docs[j] + doc_lens[j]);
    }
    const auto logits = ltc::listwise_identifier_logits<float>(std::span(query, query_len), bodies,
                                                               model->params, to_core(ltc));
    std::copy(logits.begin(), logits.end(), out_logits);
  });
}

void ltc_rerank_options_default(ltc_rerank_options* options) {
  if (options == nullptr) return;
  const ltc::RerankOptions r;
  options->depth = r.depth;
  options->window = r.window;
  options->step = r.step;
  options->max_doc_tokens = r.max_doc_tokens;
  options->threads = r.threads;
  options->ltc = to_c(r.ltc);
  options->tag = nullptr;
}

ltc_status ltc_rerank_files(const ltc_model* model, const char* corpus_path,
                            const char* queries_path, const char* run_path,
                            const char* output_path, const ltc_rerank_options* options,
                            int listwise, ltc_message_fn on_warning, void* user) {
  return guarded([&] {
    require(model, "model");
    require(corpus_path, "corpus_path");
    require(queries_path, "queries_path");
    require(run_path, "run_path");
    require(output_path, "output_path");
    const auto opts = to_core(options);
    opts.ltc.validate(model->params.config.num_layers);
    const auto corpus = ltc::load_corpus(corpus_path);
    const auto queries = ltc::load_queries(queries_path);
    const auto run = ltc::load_run(run_path);
    ltc::Warnings warnings;
    const auto entries =
        listwise ? ltc::rerank_run_listwise(model->params, corpus, queries, run, opts, &warnings)
                 : ltc::rerank_run_pointwise(model->params, corpus, queries, run, opts, &warnings);
    forward_warnings(warnings, on_warning, user);
    ltc::write_run(entries, output_path);
  });
}

namespace {

std::vector<ltc::RunEntry> read_entries(const char* path) { return ltc::load_run_entries(path); }

}  // namespace

ltc_status ltc_evaluate_files(const char* run_path, const char* qrels_path,
                              const char* report_path, ltc_message_fn on_report_line,
                              double* mean_ndcg, size_t* query_count, ltc_message_fn on_warning,
                              void* user) {
  return guarded([&] {
    require(run_path, "run_path");
    require(qrels_path, "qrels_path");
    ltc::Warnings warnings;
    const auto qrels = ltc::load_qrels(qrels_path, &warnings);
    forward_warnings(warnings, on_warning, user);
    const auto report = ltc::evaluate_run(read_entries(run_path), qrels);
    const auto text = ltc::format_report(report);
    if (report_path != nullptr) write_text(text, report_path);
    if (on_report_line != nullptr) {
      std::size_t start = 0;
      while (start < text.size()) {
        const auto end = text.find('\n', start);
        const auto line = text.substr(start, end - start);
        on_report_line(line.c_str(), user);
        start = end + 1;
      }
    }
    if (mean_ndcg) *mean_ndcg = report.mean;
    if (query_count) *query_count = report.query_count;
  });
}

ltc_status ltc_compare_runs(const char* run_a_path, const char* run_b_path,
                            const char* qrels_path, double* t, double* p, size_t* df) {
  return guarded([&] {
    require(run_a_path, "run_a_path");
    require(run_b_path, "run_b_path");
    require(qrels_path, "qrels_path");
    const auto qrels = ltc::load_qrels(qrels_path);
    const auto a = ltc::evaluate_run(read_entries(run_a_path), qrels);
    const auto b = ltc::evaluate_run(read_entries(run_b_path), qrels);
    const auto r = ltc::paired_t_test(ltc::paired_deltas(a, b));
    if (t) *t = r.t;
    if (p) *p = r.p;
    if (df) *df = r.df;
  });
}

ltc_status ltc_t_test(const double* deltas, size_t n, double* t, double* p, size_t* df) {
  return guarded([&] {
    if (n > 0) require(deltas, "deltas");
    const auto r = ltc::paired_t_test(std::span(deltas, n));
    if (t) *t = r.t;
    if (p) *p = r.p;
    if (df) *df = r.df;
  });
}

ltc_status ltc_attention_cost(uint32_t num_layers, size_t n, ltc_compression ltc,
                              double* baseline, double* compressed, double* ratio) {
  return guarded([&] {
    const auto c = ltc::attention_cost_model(num_layers, n, to_core(ltc));
    if (baseline) *baseline = c.baseline;
    if (compressed) *compressed = c.ltc;
    if (ratio) *ratio = c.ratio;
  });
}

void ltc_train_config_default(ltc_train_config* config) {
  if (config == nullptr) return;
  const ltc::TrainConfig t;
  config->epochs = t.epochs;
  config->batch_size = t.batch_size;
  config->learning_rate = t.learning_rate;
  config->momentum = t.momentum;
  config->grad_clip = t.grad_clip;
  config->negatives = t.negatives;
  config->ltc = to_c(t.ltc);
  config->seed = t.seed;
  config->train_queries = t.train_queries;
  config->resample_each_epoch = t.resample_each_epoch ? 1 : 0;
  config->heldout_queries = t.heldout_queries;
  config->doc_len = t.doc_len;
  config->query_pool = t.query_pool;
  config->threads = t.threads;
}

ltc_status ltc_train(const ltc_train_config* config, const ltc_model_config* model_config,
                     ltc_message_fn on_epoch, void* user, ltc_model** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    *out = nullptr;
    const auto model = model_config ? to_core(*model_config) : ltc::default_train_model();
    auto result = ltc::train(to_core(*config), model, [&](const ltc::EpochLog& e) {
      if (on_epoch == nullptr) return;
      char line[96];
      std::snprintf(line, sizeof(line), "%zu\t%.6f\t%.4f", e.epoch, e.loss, e.heldout_accuracy);
      on_epoch(line, user);
    });
    *out = new ltc_model{std::move(result.params)};
  });
}

ltc_status ltc_synthetic_accuracy(const ltc_model* model, const ltc_train_config* config,
                                  size_t num_queries, ltc_compression ltc, double* accuracy) {
  return guarded([&] {
    require(model, "model");
    require(config, "config");
    require(accuracy, "accuracy");
    if (num_queries == 0) throw ltc::ArgumentError("accuracy needs at least one query");
    const auto t = to_core(*config);
    const auto examples =
        ltc::synth_task_gen(ltc::heldout_seed(t.seed), num_queries, t.doc_len,
                            ltc::synth_options_for(t, model->params.config));
    *accuracy = ltc::pairwise_accuracy(model->params, examples, to_core(ltc), t.threads);
  });
}

ltc_status ltc_gradcheck(const ltc_model_config* config, uint64_t seed, ltc_compression ltc,
                         double epsilon, size_t stride, double* max_rel_error, size_t* checked) {
  return guarded([&] {
    require(max_rel_error, "max_rel_error");
    const auto model = config ? to_core(*config) : ltc::gradcheck_model();
    const auto params = ltc::Parameters<double>::init(model, seed);
    const auto example = ltc::gradcheck_example(seed, model);
    const auto report = ltc::finite_diff_check(params, example, to_core(ltc), epsilon, stride);
    *max_rel_error = report.max_rel_error;
    if (checked) *checked = report.checked;
  });
}

ltc_status ltc_synth_write(const char* dir, uint64_t seed, size_t num_queries, size_t candidates,
                           size_t doc_len, uint32_t vocab_size) {
  return guarded([&] {
    require(dir, "dir");
    ltc::SynthCollectionOptions o;
    o.num_queries = num_queries;
    o.candidates = candidates;
    o.doc_len = doc_len;
    o.task.vocab_size = vocab_size;
    ltc::write_synth_collection(ltc::make_synth_collection(seed, o), dir);
  });
}

ltc_status ltc_sweep_files(const ltc_model* model, const char* corpus_path,
                           const char* queries_path, const char* run_path, const char* qrels_path,
                           const double* rates, size_t rate_count, const uint32_t* layers,
                           size_t layer_count, const ltc_rerank_options* options, size_t warmup,
                           size_t repeats, const char* output_path) {
  return guarded([&] {
    require(model, "model");
    require(corpus_path, "corpus_path");
    require(queries_path, "queries_path");
    require(run_path, "run_path");
    require(qrels_path, "qrels_path");
    require(output_path, "output_path");
    ltc::SweepOptions s;
    if (rate_count > 0) {
      require(rates, "rates");
      s.rates.assign(rates, rates + rate_count);
    }
    if (layer_count > 0) {
      require(layers, "layers");
      s.layers.assign(layers, layers + layer_count);
    }
    s.rerank = to_core(options);
    s.warmup = warmup;
    s.repeats = repeats;
    s.measure_throughput = repeats > 0;
    const auto corpus = ltc::load_corpus(corpus_path);
    const auto queries = ltc::load_queries(queries_path);
    const auto run = ltc::load_run(run_path);
    const auto qrels = ltc::load_qrels(qrels_path);
    const auto cells = ltc::sweep_grid(model->params, corpus, queries, run, qrels, s);
    write_text(ltc::format_sweep_csv(cells), output_path);
  });
}

ltc_status ltc_bench_files(const ltc_model* model, const char* corpus_path,
                           const char* queries_path, const char* run_path,
                           const ltc_rerank_options* options, size_t warmup, size_t repeats,
                           double* qps, double* median_seconds, double* predicted_attn_ratio) {
  return guarded([&] {
    require(model, "model");
    require(corpus_path, "corpus_path");
    require(queries_path, "queries_path");
    require(run_path, "run_path");
    const auto opts = to_core(options);
    opts.ltc.validate(model->params.config.num_layers);
    const auto corpus = ltc::load_corpus(corpus_path);
    const auto queries = ltc::load_queries(queries_path);
    const auto run = ltc::load_run(run_path);
    const auto m = ltc::measure_rerank_qps(model->params, corpus, queries, run, opts, warmup,
                                           repeats);
    if (qps) *qps = m.qps;
    if (median_seconds) *median_seconds = m.median_seconds;
    if (predicted_attn_ratio) {
      *predicted_attn_ratio =
          ltc::workload_attention_cost(model->params.config, corpus, queries, run, opts).ratio;
    }
  });
}

}  // extern "C"
