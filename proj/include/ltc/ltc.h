/* Copyright 2026 The ltc-rerank Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface of the ltc reranking engine. Every function returns an
 * ltc_status; on failure ltc_last_error() describes the cause (thread-local,
 * valid until the next call on the same thread). Handles are opaque.
 */
#ifndef LTC_LTC_H_
#define LTC_LTC_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define LTC_API __declspec(dllexport)
#else
#define LTC_API __attribute__((visibility("default")))
#endif

typedef enum ltc_status {
  LTC_OK = 0,
  LTC_ERR_ARGUMENT = 1, /* null pointer, bad count, out-of-domain value */
  LTC_ERR_CONFIG = 2,   /* invalid model / compression / pipeline settings */
  LTC_ERR_SHAPE = 3,
  LTC_ERR_INPUT = 4,    /* token input rejected */
  LTC_ERR_FORMAT = 5,   /* malformed file, message carries path:line */
  LTC_ERR_IO = 6,
  LTC_ERR_NUMERIC = 7,  /* NaN / inf encountered */
  LTC_ERR_INTERNAL = 8
} ltc_status;

LTC_API const char* ltc_last_error(void);
LTC_API const char* ltc_status_name(ltc_status status);

typedef struct ltc_model ltc_model;

typedef struct ltc_model_config {
  uint32_t num_layers;
  uint32_t hidden;
  uint32_t num_heads;
  uint32_t mlp_dim;
  uint32_t vocab_size;
  uint32_t max_seq;
  double rope_base;
} ltc_model_config;

/* target_layer 0 disables compression; otherwise 1 <= target_layer <= L and
 * rate in (0,1]. */
typedef struct ltc_compression {
  uint32_t target_layer;
  double rate;
} ltc_compression;

/* Receives warnings and per-epoch progress lines. */
typedef void (*ltc_message_fn)(const char* message, void* user);

LTC_API void ltc_model_config_default(ltc_model_config* config);
/* The small configuration used for synthetic-task training. */
LTC_API void ltc_model_config_train_default(ltc_model_config* config);

LTC_API ltc_status ltc_model_create(const ltc_model_config* config, uint64_t seed,
                                    ltc_model** out);
LTC_API ltc_status ltc_model_load(const char* path, ltc_model** out);
LTC_API ltc_status ltc_model_save(const ltc_model* model, const char* path);
LTC_API void ltc_model_free(ltc_model* model);
LTC_API ltc_status ltc_model_get_config(const ltc_model* model, ltc_model_config* out);

/* Writes up to `capacity` ids; *length receives the full token count. */
LTC_API ltc_status ltc_tokenize(const char* text, uint32_t vocab_size, int32_t* out,
                                size_t capacity, size_t* length);

LTC_API ltc_status ltc_score_pointwise(const ltc_model* model, const int32_t* query,
                                       size_t query_len, const int32_t* doc, size_t doc_len,
                                       ltc_compression ltc, double* score);

/* `out_logits` holds k values, one per document identifier. */
LTC_API ltc_status ltc_listwise_logits(const ltc_model* model, const int32_t* query,
                                       size_t query_len, const int32_t* const* docs,
                                       const size_t* doc_lens, size_t k, ltc_compression ltc,
                                       double* out_logits);

typedef struct ltc_rerank_options {
  size_t depth;
  size_t window;
  size_t step;
  size_t max_doc_tokens;
  size_t threads;
  ltc_compression ltc;
  const char* tag; /* NULL means "ltc" */
} ltc_rerank_options;

LTC_API void ltc_rerank_options_default(ltc_rerank_options* options);

/* Reranks a TREC run with document and query text and writes a TREC run. */
LTC_API ltc_status ltc_rerank_files(const ltc_model* model, const char* corpus_path,
                                    const char* queries_path, const char* run_path,
                                    const char* output_path, const ltc_rerank_options* options,
                                    int listwise, ltc_message_fn on_warning, void* user);

/* nDCG@10 of a run. The per-query report goes to `report_path` and, line
 * by line, to `on_report_line`; either may be NULL. */
LTC_API ltc_status ltc_evaluate_files(const char* run_path, const char* qrels_path,
                                      const char* report_path, ltc_message_fn on_report_line,
                                      double* mean_ndcg, size_t* query_count,
                                      ltc_message_fn on_warning, void* user);

/* Paired t-test of run_b against run_a on their common judged queries. */
LTC_API ltc_status ltc_compare_runs(const char* run_a_path, const char* run_b_path,
                                    const char* qrels_path, double* t, double* p, size_t* df);

LTC_API ltc_status ltc_t_test(const double* deltas, size_t n, double* t, double* p, size_t* df);

LTC_API ltc_status ltc_attention_cost(uint32_t num_layers, size_t n, ltc_compression ltc,
                                      double* baseline, double* compressed, double* ratio);

typedef struct ltc_train_config {
  size_t epochs;
  size_t batch_size;
  double learning_rate;
  double momentum;
  double grad_clip;
  size_t negatives;
  ltc_compression ltc;
  uint64_t seed;
  size_t train_queries;
  int resample_each_epoch;
  size_t heldout_queries;
  size_t doc_len;
  size_t query_pool;
  size_t threads;
} ltc_train_config;

LTC_API void ltc_train_config_default(ltc_train_config* config);

/* Trains on the synthetic task. `on_epoch` receives "epoch\tloss\tacc". */
LTC_API ltc_status ltc_train(const ltc_train_config* config, const ltc_model_config* model_config,
                             ltc_message_fn on_epoch, void* user, ltc_model** out);

/* Held-out pairwise accuracy of `model` on `num_queries` fresh synthetic
 * queries drawn from the held-out split of `config->seed`. */
LTC_API ltc_status ltc_synthetic_accuracy(const ltc_model* model, const ltc_train_config* config,
                                          size_t num_queries, ltc_compression ltc,
                                          double* accuracy);

/* Finite-difference gradient check of a fresh double-precision model. */
LTC_API ltc_status ltc_gradcheck(const ltc_model_config* config, uint64_t seed,
                                 ltc_compression ltc, double epsilon, size_t stride,
                                 double* max_rel_error, size_t* checked);

/* Writes corpus.jsonl, queries.tsv, run.trec and qrels.txt into `dir`. */
LTC_API ltc_status ltc_synth_write(const char* dir, uint64_t seed, size_t num_queries,
                                   size_t candidates, size_t doc_len, uint32_t vocab_size);

/* Rate x layer grid to CSV. Empty `layers` selects the default layers. */
LTC_API ltc_status ltc_sweep_files(const ltc_model* model, const char* corpus_path,
                                   const char* queries_path, const char* run_path,
                                   const char* qrels_path, const double* rates, size_t rate_count,
                                   const uint32_t* layers, size_t layer_count,
                                   const ltc_rerank_options* options, size_t warmup,
                                   size_t repeats, const char* output_path);

LTC_API ltc_status ltc_bench_files(const ltc_model* model, const char* corpus_path,
                                   const char* queries_path, const char* run_path,
                                   const ltc_rerank_options* options, size_t warmup,
                                   size_t repeats, double* qps, double* median_seconds,
                                   double* predicted_attn_ratio);

#ifdef __cplusplus
}
#endif

#endif /* LTC_LTC_H_ */
