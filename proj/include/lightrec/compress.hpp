#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "lightrec/cost.hpp"
#include "lightrec/errors.hpp"
#include "lightrec/matrix.hpp"
#include "lightrec/metrics.hpp"
#include "lightrec/model.hpp"
#include "lightrec/quantize.hpp"
#include "lightrec/train.hpp"

namespace lightrec {

// Threshold such that the fraction of magnitudes strictly below it is the
// largest achievable fraction <= p: sorted ascending, take index floor(p*N).
inline double compute_threshold(std::vector<double> magnitudes, double p) {
  if (magnitudes.empty()) throw ConfigError("compute_threshold: no weights");
  if (p < 0.0 || p >= 1.0)
    throw ConfigError("compute_threshold: p must be in [0, 1); prune-everything is degenerate");
  std::sort(magnitudes.begin(), magnitudes.end());
  const auto idx = static_cast<std::size_t>(
      std::floor(p * static_cast<double>(magnitudes.size())));
  return magnitudes[std::min(idx, magnitudes.size() - 1)];
}

inline Matrix2D make_mask(const Matrix2D& w, double theta) {
  if (theta < 0.0) throw ConfigError("make_mask: theta must be >= 0");
  Matrix2D mask(w.rows, w.cols);
  for (std::size_t i = 0; i < w.size(); ++i)
    mask.data[i] = std::abs(w.data[i]) >= theta ? 1.0 : 0.0;
  return mask;
}

// W_new = W_prev o M, with masked entries written as exact +0.
inline Matrix2D prune_step(const Matrix2D& w_prev, const Matrix2D& mask) {
  if (!w_prev.same_shape(mask))
    throw ShapeError("prune_step: " + shape_str(w_prev) + " vs " + shape_str(mask));
  Matrix2D out(w_prev.rows, w_prev.cols);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data[i] = mask.data[i] != 0.0 ? w_prev.data[i] : 0.0;
  return out;
}

struct PruneSchedule {
  double p_target = 0.0;
  std::size_t rounds = 1;  // K
  std::size_t finetune_epochs_per_round = 0;
  double lr = 0.1;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  bool per_layer = false;  // default: one global threshold per round
  std::size_t eval_k = 10;

  void validate() const {
    if (p_target < 0.0 || p_target >= 1.0)
      throw ConfigError("PruneSchedule: p_target must be in [0, 1)");
    if (rounds < 1) throw ConfigError("PruneSchedule: rounds must be >= 1");
  }
};

struct PruneRound {
  double sparsity = 0.0;
  double theta = 0.0;
  double task_loss = 0.0;
  EvalResult eval;
};

struct PruneHistory {
  std::vector<PruneRound> rounds;
};

namespace detail_compress {

inline std::uint64_t total_prunable(const Model& model) {
  std::uint64_t n = 0;
  for (const auto* wm : model.prunable()) n += wm->w.size();
  return n;
}

inline std::uint64_t retained_prunable(const Model& model) {
  std::uint64_t n = 0;
  for (const auto* wm : model.prunable()) n += wm->retained_count();
  return n;
}

// Prune the `additional` smallest nonzero magnitudes across the given
// matrices, composing with any existing masks. Returns the threshold used.
inline double prune_smallest(std::vector<WeightMatrix*> matrices, std::uint64_t additional) {
  std::vector<double> magnitudes;
  for (const auto* wm : matrices)
    for (double v : wm->w.data)
      if (v != 0.0) magnitudes.push_back(std::abs(v));
  if (magnitudes.empty()) throw ConfigError("prune: no nonzero weights left");
  if (additional >= magnitudes.size())
    throw ConfigError("prune: schedule would remove every weight");
  // ask for exactly `additional` entries strictly below the threshold; the
  // +0.5 keeps floor() off the integer boundary
  const double ratio = (static_cast<double>(additional) + 0.5) /
                       static_cast<double>(magnitudes.size());
  const double theta = compute_threshold(std::move(magnitudes), ratio);
  for (auto* wm : matrices) {
    Matrix2D round_mask = make_mask(wm->w, theta);
    if (wm->mask) round_mask = prune_step(*wm->mask, round_mask);  // masks only shrink
    wm->w = prune_step(wm->w, round_mask);
    wm->mask = std::move(round_mask);
  }
  return theta;
}

}  // namespace detail_compress

inline double model_sparsity(const Model& model) {
  const auto total = detail_compress::total_prunable(model);
  return 1.0 - static_cast<double>(detail_compress::retained_prunable(model)) /
                   static_cast<double>(total);
}

// K rounds of dynamic-threshold magnitude pruning with fine-tuning between
// rounds. Cumulative targets follow the linear schedule p*k/K; each round
// recomputes the threshold over the weights still alive. Diverged fine-tuning
// rolls the model back to the start of the round before rethrowing.
inline PruneHistory prune_loop(Model& model, const PruneSchedule& schedule,
                               const Dataset& dataset) {
  schedule.validate();
  const std::uint64_t total = detail_compress::total_prunable(model);
  const auto test = dataset.test_events();
  PruneHistory history;
  for (std::size_t k = 1; k <= schedule.rounds; ++k) {
    const Model snapshot = model;
    try {
      const double cumulative =
          schedule.p_target * static_cast<double>(k) / static_cast<double>(schedule.rounds);
      const auto target_zeros =
          static_cast<std::uint64_t>(std::floor(cumulative * static_cast<double>(total)));
      const std::uint64_t current_zeros = total - detail_compress::retained_prunable(model);
      double theta = 0.0;
      if (target_zeros > current_zeros) {
        const std::uint64_t additional = target_zeros - current_zeros;
        if (schedule.per_layer) {
          for (auto* wm : model.prunable()) {
            const std::uint64_t layer_total = wm->w.size();
            const std::uint64_t layer_target = static_cast<std::uint64_t>(
                std::floor(cumulative * static_cast<double>(layer_total)));
            const std::uint64_t layer_zeros = layer_total - wm->retained_count();
            if (layer_target > layer_zeros)
              theta = detail_compress::prune_smallest({wm}, layer_target - layer_zeros);
          }
        } else {
          theta = detail_compress::prune_smallest(model.prunable(), additional);
        }
      }
      PruneRound round;
      round.theta = theta;
      if (schedule.finetune_epochs_per_round > 0) {
        TrainConfig cfg;
        cfg.epochs = schedule.finetune_epochs_per_round;
        cfg.lr = schedule.lr;
        cfg.batch_size = schedule.batch_size;
        cfg.seed = schedule.seed + k;
        const TrainHistory ft = train_loop(model, dataset.train_events(), cfg);
        round.task_loss = ft.task_loss.back();
      }
      round.sparsity = model_sparsity(model);
      if (!test.empty())
        round.eval = evaluate(model, test, std::min(schedule.eval_k, model.spec.m));
      history.rounds.push_back(round);
    } catch (const NumericError&) {
      model = snapshot;
      throw;
    }
  }
  return history;
}

struct PipelineOptions {
  std::uint32_t bits = 8;
  std::size_t qat_epochs = 0;
  double qat_lr = 0.05;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  bool quantize_activations = false;
  std::size_t eval_k = 10;
  CostParams cost;
};

struct PipelineResult {
  CostReport before, after;
  PruneHistory prune_history;
  TrainHistory qat_history;
  EvalResult eval_before, eval_after;
  double sparsity = 0.0;
};

// The closed loop: prune -> fine-tune -> quantize -> QAT. bits == 32 means
// full precision and skips the quantization stage entirely, so a p=0,
// zero-epoch schedule leaves the model bit-identical.
inline PipelineResult pipeline_run(Model& model, const PruneSchedule& schedule,
                                   const PipelineOptions& opts, const Dataset& dataset) {
  if (opts.bits != 32 && (opts.bits < 2 || opts.bits > 16))
    throw ConfigError("pipeline_run: bits must be in [2, 16] or 32");
  PipelineResult result;
  const auto test = dataset.test_events();
  const std::size_t eval_k = std::min(opts.eval_k, model.spec.m);
  result.before = cost_report(model, opts.cost);
  if (!test.empty()) result.eval_before = evaluate(model, test, eval_k);

  result.prune_history = prune_loop(model, schedule, dataset);

  if (opts.bits != 32) {
    for (auto* wm : model.prunable()) wm->qp = quant_params(wm->w, opts.bits);
    if (opts.quantize_activations) model.act_quant_bits = opts.bits;
    if (opts.qat_epochs > 0) {
      TrainConfig cfg;
      cfg.epochs = opts.qat_epochs;
      cfg.lr = opts.qat_lr;
      cfg.batch_size = opts.batch_size;
      cfg.seed = opts.seed;
      cfg.qat_dynamic_range = true;
      result.qat_history = train_loop(model, dataset.train_events(), cfg);
      // ranges drifted during the last updates; refresh so the stored
      // parameters describe the final weights
      for (auto* wm : model.prunable()) *wm->qp = quant_params(wm->w, opts.bits);
    }
  }
  result.sparsity = model_sparsity(model);
  result.after = cost_report(model, opts.cost);
  if (!test.empty()) result.eval_after = evaluate(model, test, eval_k);
  return result;
}

}  // namespace lightrec
