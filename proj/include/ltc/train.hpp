// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ltc/compression.hpp"
#include "ltc/model.hpp"

namespace ltc {

// ---------------------------------------------------------------------------
// Synthetic relevance task

struct SynthOptions {
  std::size_t vocab_size = 512;
  std::size_t negatives = 5;
  std::size_t query_len = 2;
  std::size_t query_pool = 64;  // word ids [kLowReserved, kLowReserved + query_pool) form queries
};

/// One query with its positive and hard negatives. The positive carries every
/// query token planted at random positions among distractors; each negative
/// carries the same number of query-pool tokens that are NOT in the query.
struct SynthExample {
  std::vector<std::int32_t> query;
  std::vector<std::int32_t> positive;
  std::vector<std::vector<std::int32_t>> negatives;
  std::vector<std::int32_t> signal;  // planted tokens of the positive
  std::string description;
};

std::vector<SynthExample> synth_task_gen(std::uint64_t seed, std::size_t num_queries,
                                         std::size_t doc_len, const SynthOptions& options = {});

/// Seed of the held-out split paired with a training seed.
std::uint64_t heldout_seed(std::uint64_t seed) noexcept;
/// Seed of the training draw for a given 1-based epoch (epoch 1 uses `seed`).
std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) noexcept;

// ---------------------------------------------------------------------------
// Loss and gradients

/// -log softmax(scores)[positive_index].
double group_ce_loss(std::span<const double> scores, std::size_t positive_index);
/// d loss / d scores = softmax(scores) - onehot(positive_index).
std::vector<double> group_ce_grad(std::span<const double> scores, std::size_t positive_index);

/// Reverse pass over a recorded forward trace. `grad_final` is the gradient
/// of the loss w.r.t. the final-normed hidden states; parameter gradients are
/// accumulated into `grads`.
template <typename T>
void backward(std::span<const std::int32_t> tokens, const Parameters<T>& params,
              const ForwardTrace<T>& trace, const Matrix<T>& grad_final, Parameters<T>& grads);

/// Group loss of one example (positive at index 0) and, when `grads` is
/// given, its parameter gradients accumulated into it.
template <typename T>
double example_loss(const SynthExample& example, const Parameters<T>& params, const LtcConfig& ltc,
                    Parameters<T>* grads = nullptr);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t checked = 0;
};

/// Central differences against analytic gradients in double precision.
/// `stride` > 1 checks every stride-th parameter. Relative error is
/// |analytic - numeric| / max(1e-8, |numeric|).
GradCheckReport finite_diff_check(const Parameters<double>& params, const SynthExample& example,
                                  const LtcConfig& ltc, double epsilon, std::size_t stride = 1);

/// Tiny model (L=2, h=8) for gradient checks.
ModelConfig gradcheck_model();
/// One synthetic example sized for `config` (8-token documents).
SynthExample gradcheck_example(std::uint64_t seed, const ModelConfig& config);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double grad_clip = 1.0;  // global-norm clip, <= 0 disables
  std::size_t negatives = 5;
  LtcConfig ltc;
  std::uint64_t seed = 1;
  std::size_t train_queries = 1000;  // per epoch
  bool resample_each_epoch = true;   // draw a fresh training set every epoch
  std::size_t heldout_queries = 200;
  std::size_t doc_len = 12;
  std::size_t query_pool = 64;
  std::size_t threads = 1;

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double heldout_accuracy = 0.0;
};

struct TrainResult {
  Parameters<float> params;
  std::vector<EpochLog> log;
};

/// Small model used for the synthetic task.
ModelConfig default_train_model();

SynthOptions synth_options_for(const TrainConfig& train, const ModelConfig& model);

/// Momentum SGD on mean group_ce_loss, compression active in every forward
/// pass when train.ltc is enabled. Throws NumericError on a non-finite loss.
TrainResult train(const TrainConfig& train, const ModelConfig& model,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// Fraction of examples whose positive strictly outscores every negative.
double pairwise_accuracy(const Parameters<float>& params, std::span<const SynthExample> examples,
                         const LtcConfig& ltc, std::size_t threads = 1);

}  // namespace ltc
