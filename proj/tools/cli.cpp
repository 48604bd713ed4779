// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ltc/ltc.h"

namespace ltc_cli {

namespace {

struct ModelDeleter {
  void operator()(ltc_model* m) const { ltc_model_free(m); }
};
using ModelPtr = std::unique_ptr<ltc_model, ModelDeleter>;

/// A failed library call, carried to the top level as an exit code.
struct Failure {
  int code;
  std::string message;
};

/// Invalid flag combination detected after parsing.
struct UsageFailure {
  std::string message;
};

int exit_code_for(ltc_status status) {
  switch (status) {
    case LTC_OK: return kOk;
    case LTC_ERR_ARGUMENT:
    case LTC_ERR_CONFIG: return kUsage;
    case LTC_ERR_NUMERIC: return kNumeric;
    default: return kData;
  }
}

void check(ltc_status status) {
  if (status != LTC_OK) throw Failure{exit_code_for(status), ltc_last_error()};
}

void warn_to_stream(const char* message, void* user) {
  *static_cast<std::ostream*>(user) << "warning: " << message << '\n';
}

struct LtcFlags {
  std::optional<std::uint32_t> layer;
  std::optional<double> rate;

  void add(CLI::App* cmd) {
    cmd->add_option("--layer", layer, "Target layer l* where compression starts (1-based)");
    cmd->add_option("--rate", rate, "Compression rate r in (0,1]; omit to disable");
  }

  /// Rate-only checks that do not need the model.
  void validate() const {
    if (layer && !rate) throw UsageFailure{"--layer requires --rate"};
    if (rate && !(*rate > 0.0 && *rate <= 1.0)) {
      char buf[128];
      std::snprintf(buf, sizeof(buf),
                    "--rate %g is outside the valid interval (0,1]", *rate);
      throw UsageFailure{buf};
    }
    if (layer && *layer == 0) throw UsageFailure{"--layer must be at least 1"};
  }

  /// Disabled without --rate; --layer defaults to max(1, L/4).
  ltc_compression resolve(std::uint32_t num_layers) const {
    if (!rate) return {0, 1.0};
    const std::uint32_t fallback = num_layers / 4 > 0 ? num_layers / 4 : 1;
    return {layer.value_or(fallback), *rate};
  }
};

struct PipelineFlags {
  std::string corpus, queries, run, checkpoint, output;
  std::size_t depth = 100;
  std::size_t window = 20;
  std::size_t step = 10;
  std::size_t max_doc_tokens = 128;
  std::size_t threads = 1;
  std::string tag = "ltc";

  void add_inputs(CLI::App* cmd) {
    cmd->add_option("--corpus", corpus, "JSONL corpus {\"id\", \"text\"}")->required()->check(CLI::ExistingFile);
    cmd->add_option("--queries", queries, "TSV queries id<TAB>text")->required()->check(CLI::ExistingFile);
    cmd->add_option("--run", run, "First-stage TREC run")->required()->check(CLI::ExistingFile);
  }

  void add_rerank(CLI::App* cmd) {
    cmd->add_option("--depth", depth, "Candidates reranked per query")->check(CLI::PositiveNumber);
    cmd->add_option("--max-doc-tokens", max_doc_tokens, "Document truncation length")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--threads", threads, "Worker threads over queries")->check(CLI::PositiveNumber);
    cmd->add_option("--tag", tag, "Run tag written in column 6");
  }

  ltc_rerank_options options(ltc_compression ltc) const {
    ltc_rerank_options o;
    ltc_rerank_options_default(&o);
    o.depth = depth;
    o.window = window;
    o.step = step;
    o.max_doc_tokens = max_doc_tokens;
    o.threads = threads;
    o.ltc = ltc;
    o.tag = tag.c_str();
    return o;
  }
};

struct ModelFlags {
  std::uint32_t num_layers = 0, hidden = 0, num_heads = 0, mlp_dim = 0, vocab = 0, max_seq = 0;

  void add(CLI::App* cmd) {
    cmd->add_option("--num-layers", num_layers, "Decoder layers");
    cmd->add_option("--hidden", hidden, "Hidden size");
    cmd->add_option("--heads", num_heads, "Attention heads");
    cmd->add_option("--mlp-dim", mlp_dim, "MLP inner size");
    cmd->add_option("--vocab", vocab, "Vocabulary size");
    cmd->add_option("--max-seq", max_seq, "Maximum sequence length");
  }

  ltc_model_config apply(ltc_model_config c) const {
    if (num_layers) c.num_layers = num_layers;
    if (hidden) c.hidden = hidden;
    if (num_heads) c.num_heads = num_heads;
    if (mlp_dim) c.mlp_dim = mlp_dim;
    if (vocab) c.vocab_size = vocab;
    if (max_seq) c.max_seq = max_seq;
    return c;
  }
};

ModelPtr load_model(const std::string& path) {
  ltc_model* raw = nullptr;
  check(ltc_model_load(path.c_str(), &raw));
  return ModelPtr(raw);
}

std::uint32_t layers_of(const ltc_model* model) {
  ltc_model_config c;
  check(ltc_model_get_config(model, &c));
  return c.num_layers;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Layer-wise token compression for transformer rerankers", "ltc"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  std::uint64_t seed = 1;
  LtcFlags ltc_flags;
  PipelineFlags pipe;
  ModelFlags model_flags;

  // train
  ltc_train_config tc;
  ltc_train_config_default(&tc);
  std::string train_output, train_log;
  auto* train = app.add_subcommand("train", "Train the pointwise scorer on the synthetic task");
  train->add_option("--output", train_output, "Checkpoint path")->required();
  train->add_option("--log", train_log, "Per-epoch log (epoch, loss, heldout_acc)");
  train->add_option("--epochs", tc.epochs)->check(CLI::PositiveNumber);
  train->add_option("--batch-size", tc.batch_size)->check(CLI::PositiveNumber);
  train->add_option("--lr", tc.learning_rate);
  train->add_option("--momentum", tc.momentum);
  train->add_option("--grad-clip", tc.grad_clip);
  train->add_option("--train-queries", tc.train_queries, "Training queries per epoch");
  train->add_option("--heldout-queries", tc.heldout_queries);
  train->add_option("--doc-len", tc.doc_len);
  train->add_option("--threads", tc.threads)->check(CLI::PositiveNumber);
  train->add_option("--seed", seed);
  ltc_flags.add(train);
  model_flags.add(train);

  // gradcheck
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  std::size_t stride = 1;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the backward pass");
  gradcheck->add_option("--seed", seed);
  gradcheck->add_option("--epsilon", epsilon, "Central difference step");
  gradcheck->add_option("--stride", stride, "Check every n-th parameter")->check(CLI::PositiveNumber);
  gradcheck->add_option("--tolerance", tolerance, "Maximum relative error");
  ltc_flags.add(gradcheck);

  // synth
  std::string synth_dir;
  std::size_t synth_queries = 20, synth_candidates = 20, synth_doc_len = 12;
  std::uint32_t synth_vocab = 512;
  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus, queries, run and qrels");
  synth->add_option("--output", synth_dir, "Output directory")->required();
  synth->add_option("--seed", seed);
  synth->add_option("--num-queries", synth_queries)->check(CLI::PositiveNumber);
  synth->add_option("--candidates", synth_candidates, "Candidates per query");
  synth->add_option("--doc-len", synth_doc_len);
  synth->add_option("--vocab", synth_vocab);

  // rerank / listwise-rerank
  auto* rerank = app.add_subcommand("rerank", "Pointwise reranking of a TREC run");
  auto* listwise = app.add_subcommand("listwise-rerank", "Sliding-window listwise reranking");
  for (auto* cmd : {rerank, listwise}) {
    pipe.add_inputs(cmd);
    cmd->add_option("--checkpoint", pipe.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
    cmd->add_option("--output", pipe.output, "Output TREC run")->required();
    pipe.add_rerank(cmd);
    ltc_flags.add(cmd);
  }
  listwise->add_option("--window", pipe.window, "Documents per listwise call");
  listwise->add_option("--step", pipe.step, "Window stride");

  // eval
  std::string eval_run, eval_qrels, eval_output, eval_baseline;
  auto* eval = app.add_subcommand("eval", "nDCG@10 of a run, optionally tested against a baseline");
  eval->add_option("--run", eval_run)->required()->check(CLI::ExistingFile);
  eval->add_option("--qrels", eval_qrels)->required()->check(CLI::ExistingFile);
  eval->add_option("--output", eval_output, "Per-query report TSV (default: stdout)");
  eval->add_option("--baseline", eval_baseline, "Run for a paired t-test")->check(CLI::ExistingFile);

  // sweep
  std::string sweep_qrels;
  std::vector<double> sweep_rates = {0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<std::uint32_t> sweep_layers;
  std::size_t warmup = 1, repeats = 3;
  auto* sweep = app.add_subcommand("sweep", "Rate x layer grid to CSV");
  pipe.add_inputs(sweep);
  sweep->add_option("--checkpoint", pipe.checkpoint)->required()->check(CLI::ExistingFile);
  sweep->add_option("--qrels", sweep_qrels)->required()->check(CLI::ExistingFile);
  sweep->add_option("--output", pipe.output, "CSV path")->required();
  sweep->add_option("--rates", sweep_rates, "Rates, must include 1.0")->delimiter(',');
  sweep->add_option("--layers", sweep_layers, "Target layers (default: spread over depth)")
      ->delimiter(',');
  sweep->add_option("--warmup", warmup);
  sweep->add_option("--repeats", repeats, "Timed passes per cell, 0 skips timing");
  pipe.add_rerank(sweep);

  // bench
  std::size_t bench_repeats = 5;
  auto* bench = app.add_subcommand("bench", "Pointwise reranking throughput");
  pipe.add_inputs(bench);
  bench->add_option("--checkpoint", pipe.checkpoint, "Model checkpoint (default: random init)")
      ->check(CLI::ExistingFile);
  bench->add_option("--seed", seed, "Init seed when no checkpoint is given");
  bench->add_option("--warmup", warmup);
  bench->add_option("--repeats", bench_repeats)->check(CLI::PositiveNumber);
  pipe.add_rerank(bench);
  ltc_flags.add(bench);
  model_flags.add(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto* active = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << active->help();
    return kUsage;
  }

  auto* cmd = app.get_subcommands().front();
  try {
    ltc_flags.validate();

    if (cmd == train) {
      ltc_model_config mc;
      ltc_model_config_train_default(&mc);
      mc = model_flags.apply(mc);
      tc.seed = seed;
      tc.ltc = ltc_flags.resolve(mc.num_layers);
      std::ofstream log;
      if (!train_log.empty()) {
        log.open(train_log, std::ios::trunc);
        if (!log) throw Failure{kData, "cannot open log file " + train_log};
      }
      struct Sinks {
        std::ostream* out;
        std::ofstream* log;
      } sinks{&out, log.is_open() ? &log : nullptr};
      auto on_epoch = [](const char* line, void* user) {
        auto* s = static_cast<Sinks*>(user);
        *s->out << line << '\n';
        s->out->flush();
        if (s->log) *s->log << line << '\n' << std::flush;
      };
      ltc_model* raw = nullptr;
      check(ltc_train(&tc, &mc, on_epoch, &sinks, &raw));
      ModelPtr model(raw);
      check(ltc_model_save(model.get(), train_output.c_str()));
      return kOk;
    }

    if (cmd == gradcheck) {
      const ltc_compression c = ltc_flags.resolve(2);
      double max_rel = 0.0;
      std::size_t checked = 0;
      check(ltc_gradcheck(nullptr, seed, c, epsilon, stride, &max_rel, &checked));
      char line[160];
      std::snprintf(line, sizeof(line), "checked %zu parameters, max relative error %.3e\n",
                    checked, max_rel);
      out << line;
      if (!(max_rel < tolerance)) {
        err << "gradient check failed: error exceeds tolerance " << tolerance << '\n';
        return kNumeric;
      }
      return kOk;
    }

    if (cmd == synth) {
      check(ltc_synth_write(synth_dir.c_str(), seed, synth_queries, synth_candidates,
                            synth_doc_len, synth_vocab));
      return kOk;
    }

    if (cmd == rerank || cmd == listwise) {
      if (cmd == listwise && !(pipe.window > pipe.step && pipe.step >= 1)) {
        throw UsageFailure{"--window must exceed --step and --step must be at least 1"};
      }
      auto model = load_model(pipe.checkpoint);
      const auto options = pipe.options(ltc_flags.resolve(layers_of(model.get())));
      check(ltc_rerank_files(model.get(), pipe.corpus.c_str(), pipe.queries.c_str(),
                             pipe.run.c_str(), pipe.output.c_str(), &options,
                             cmd == listwise ? 1 : 0, warn_to_stream, &err));
      return kOk;
    }

    if (cmd == eval) {
      double mean = 0.0;
      std::size_t count = 0;
      struct Sinks {
        std::ostream* out;
        std::ostream* err;
      } sinks{eval_output.empty() ? &out : nullptr, &err};
      auto on_line = [](const char* line, void* user) {
        auto* s = static_cast<Sinks*>(user);
        if (s->out) *s->out << line << '\n';
      };
      auto on_warning = [](const char* message, void* user) {
        *static_cast<Sinks*>(user)->err << "warning: " << message << '\n';
      };
      check(ltc_evaluate_files(eval_run.c_str(), eval_qrels.c_str(),
                               eval_output.empty() ? nullptr : eval_output.c_str(), on_line,
                               &mean, &count, on_warning, &sinks));
      if (!eval_baseline.empty()) {
        double t = 0.0, p = 1.0;
        std::size_t df = 0;
        check(ltc_compare_runs(eval_baseline.c_str(), eval_run.c_str(), eval_qrels.c_str(), &t,
                               &p, &df));
        char line[128];
        std::snprintf(line, sizeof(line), "t-test vs baseline: t=%.4f df=%zu p=%.4g\n", t, df, p);
        err << line;
      }
      return kOk;
    }

    if (cmd == sweep) {
      for (double r : sweep_rates) {
        if (!(r > 0.0 && r <= 1.0)) {
          throw UsageFailure{"--rates entry " + std::to_string(r) +
                             " is outside the valid interval (0,1]"};
        }
      }
      auto model = load_model(pipe.checkpoint);
      const auto options = pipe.options({0, 1.0});
      check(ltc_sweep_files(model.get(), pipe.corpus.c_str(), pipe.queries.c_str(),
                            pipe.run.c_str(), sweep_qrels.c_str(), sweep_rates.data(),
                            sweep_rates.size(), sweep_layers.data(), sweep_layers.size(),
                            &options, warmup, repeats, pipe.output.c_str()));
      return kOk;
    }

    if (cmd == bench) {
      ModelPtr model;
      if (!pipe.checkpoint.empty()) {
        model = load_model(pipe.checkpoint);
      } else {
        ltc_model_config mc;
        ltc_model_config_default(&mc);
        mc = model_flags.apply(mc);
        ltc_model* raw = nullptr;
        check(ltc_model_create(&mc, seed, &raw));
        model.reset(raw);
      }
      const auto options = pipe.options(ltc_flags.resolve(layers_of(model.get())));
      double qps = 0.0, median = 0.0, ratio = 1.0;
      check(ltc_bench_files(model.get(), pipe.corpus.c_str(), pipe.queries.c_str(),
                            pipe.run.c_str(), &options, warmup, bench_repeats, &qps, &median,
                            &ratio));
      char line[160];
      std::snprintf(line, sizeof(line), "qps\t%.3f\nmedian_seconds\t%.6f\npredicted_attn_ratio\t%.4f\n",
                    qps, median, ratio);
      out << line;
      return kOk;
    }
  } catch (const UsageFailure& f) {
    err << "error: " << f.message << "\n\n" << cmd->help();
    return kUsage;
  } catch (const Failure& f) {
    err << "error: " << f.message << '\n';
    if (f.code == kUsage) err << '\n' << cmd->help();
    return f.code;
  }
  return kUsage;
}

}  // namespace ltc_cli
