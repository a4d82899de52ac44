#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lightrec/compress.hpp"
#include "lightrec/cost.hpp"
#include "lightrec/dataset.hpp"
#include "lightrec/distill.hpp"
#include "lightrec/errors.hpp"
#include "lightrec/metrics.hpp"
#include "lightrec/model.hpp"
#include "lightrec/train.hpp"

namespace lightrec {

using ordered_json = nlohmann::ordered_json;

struct BenchmarkRow {
  std::string variant;
  std::uint64_t params = 0;
  std::uint64_t storage_bytes = 0;
  std::uint64_t macs = 0;
  EvalResult eval;
  double predicted_latency_ms = 0.0;
  std::optional<double> measured_latency_ms;
};

struct BenchmarkMatrix {
  std::size_t eval_k = 10;
  std::vector<BenchmarkRow> rows;
  std::vector<std::string> notes;

  const BenchmarkRow* baseline() const {
    for (const auto& r : rows)
      if (r.variant == "baseline") return &r;
    return nullptr;
  }
};

// Ratio columns are derived from upstream counts only; nothing is
// re-measured at reporting time.
inline ordered_json matrix_to_json(const BenchmarkMatrix& matrix) {
  const BenchmarkRow* base = matrix.baseline();
  if (base == nullptr || matrix.rows.empty())
    throw DomainError("report: benchmark matrix needs a baseline row");
  ordered_json j;
  j["eval_k"] = matrix.eval_k;
  ordered_json rows = ordered_json::array();
  for (const auto& r : matrix.rows) {
    ordered_json rj;
    rj["variant"] = r.variant;
    rj["params"] = r.params;
    rj["storage_bytes"] = r.storage_bytes;
    rj["macs"] = r.macs;
    rj["hit_rate_at_k"] = r.eval.hit_rate_at_k;
    rj["ndcg_at_k"] = r.eval.ndcg_at_k;
    rj["mrr"] = r.eval.mrr;
    rj["predicted_latency_ms"] = r.predicted_latency_ms;
    if (r.measured_latency_ms)
      rj["measured_latency_ms"] = *r.measured_latency_ms;
    else
      rj["measured_latency_ms"] = nullptr;
    ordered_json ratios;
    ratios["params"] = static_cast<double>(r.params) / static_cast<double>(base->params);
    ratios["storage"] =
        static_cast<double>(r.storage_bytes) / static_cast<double>(base->storage_bytes);
    ratios["macs"] = static_cast<double>(r.macs) / static_cast<double>(base->macs);
    ratios["hit_rate"] = base->eval.hit_rate_at_k == 0.0
                             ? 0.0
                             : r.eval.hit_rate_at_k / base->eval.hit_rate_at_k;
    rj["ratios_to_baseline"] = ratios;
    rows.push_back(rj);
  }
  j["rows"] = rows;
  j["notes"] = matrix.notes;
  return j;
}

inline std::string matrix_to_csv(const BenchmarkMatrix& matrix) {
  const BenchmarkRow* base = matrix.baseline();
  if (base == nullptr || matrix.rows.empty())
    throw DomainError("report: benchmark matrix needs a baseline row");
  std::string out =
      "variant,params,storage_bytes,macs,hit_rate_at_k,ndcg_at_k,mrr,predicted_latency_ms,"
      "measured_latency_ms,params_ratio,storage_ratio,macs_ratio\n";
  char buf[512];
  for (const auto& r : matrix.rows) {
    std::string measured = r.measured_latency_ms
                               ? [&] {
                                   char m[48];
                                   std::snprintf(m, sizeof(m), "%.6f", *r.measured_latency_ms);
                                   return std::string(m);
                                 }()
                               : std::string();
    std::snprintf(buf, sizeof(buf), "%s,%llu,%llu,%llu,%.6f,%.6f,%.6f,%.6f,%s,%.6f,%.6f,%.6f\n",
                  r.variant.c_str(), static_cast<unsigned long long>(r.params),
                  static_cast<unsigned long long>(r.storage_bytes),
                  static_cast<unsigned long long>(r.macs), r.eval.hit_rate_at_k, r.eval.ndcg_at_k,
                  r.eval.mrr, r.predicted_latency_ms, measured.c_str(),
                  static_cast<double>(r.params) / static_cast<double>(base->params),
                  static_cast<double>(r.storage_bytes) / static_cast<double>(base->storage_bytes),
                  static_cast<double>(r.macs) / static_cast<double>(base->macs));
    out += buf;
  }
  return out;
}

// --- five-variant benchmark ---------------------------------------------------

struct BenchConfig {
  // synthetic data
  std::uint64_t users = 200, items = 1000, d_latent = 16, events_per_user = 8;
  std::uint64_t m = 50, s_max = 20, data_seed = 1;
  // model
  std::size_t d_e = 16, h = 64, l_net = 3;
  bool attention = true;
  std::size_t heads = 2, attn_layers = 2;
  std::uint64_t model_seed = 7;
  // task training
  std::size_t epochs = 10;
  double lr = 0.2;
  std::size_t batch_size = 16;
  std::uint64_t train_seed = 3;
  // compression
  double p_target = 0.4;
  std::size_t prune_rounds = 3;
  std::size_t finetune_epochs = 2;
  std::uint32_t bits = 8;
  std::size_t qat_epochs = 2;
  double qat_lr = 0.05;
  // distilled student
  std::size_t student_h = 28, student_l_net = 2, student_attn_layers = 1;
  std::size_t distill_epochs = 6;
  double distill_lr = 0.2;
  double lambda_kd = 1.0;
  // evaluation
  std::size_t eval_k = 10;
  CostParams cost{1e-6, 5.0};
  bool measure_latency = false;  // wall-clock timing is non-reproducible; off by default
  std::size_t measure_events = 30;
};

namespace detail_bench {

inline double median_forward_ms(const Model& model, const std::vector<const Event*>& events,
                                std::size_t count) {
  const EffectiveWeights eff = EffectiveWeights::of(model);
  std::vector<double> samples;
  for (std::size_t i = 0; i < std::min(count, events.size()); ++i) {
    const Event* e = events[i];
    const auto t0 = std::chrono::steady_clock::now();
    score_event(model, eff, e->seq, e->cands);
    const auto t1 = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(samples.begin(), samples.end());
  return samples.empty() ? 0.0 : samples[samples.size() / 2];
}

inline BenchmarkRow make_row(const std::string& variant, const Model& model,
                             const Dataset& dataset, const BenchConfig& cfg) {
  BenchmarkRow row;
  row.variant = variant;
  const CostReport cr = cost_report(model, cfg.cost);
  row.params = cr.params;
  row.storage_bytes = cr.storage_bytes;
  row.macs = cr.flops;
  row.predicted_latency_ms =
      cfg.cost.alpha_ms_per_mac * static_cast<double>(cr.flops) + cfg.cost.beta_ms;
  row.eval = evaluate(model, dataset.test_events(), std::min(cfg.eval_k, model.spec.m));
  if (cfg.measure_latency)
    row.measured_latency_ms =
        median_forward_ms(model, dataset.test_events(), cfg.measure_events);
  return row;
}

}  // namespace detail_bench

struct BenchResult {
  BenchmarkMatrix matrix;
  Dataset dataset;
  Model baseline;
};

// Runs the variant comparison: baseline, post-training quantized, pruned,
// pruned+quantized (full pipeline), and a distilled student.
inline BenchResult run_benchmark(const BenchConfig& cfg) {
  BenchResult result;
  result.dataset = generate_synthetic(cfg.users, cfg.items, cfg.d_latent, cfg.events_per_user,
                                      cfg.m, cfg.s_max, cfg.data_seed);
  ModelSpec spec;
  spec.d_e = cfg.d_e;
  spec.h = cfg.h;
  spec.l_net = cfg.l_net;
  spec.m = cfg.m;
  spec.vocab = cfg.items;
  if (cfg.attention) {
    AttentionConfig att;
    att.l_seq = cfg.s_max;
    att.d_model = cfg.d_e;
    att.heads = cfg.heads;
    att.n_layers = cfg.attn_layers;
    spec.attention = att;
  }
  Model baseline = build_model(spec, cfg.model_seed);
  train_task(baseline, result.dataset, cfg.epochs, cfg.lr, cfg.train_seed, cfg.batch_size);

  BenchmarkMatrix& matrix = result.matrix;
  matrix.eval_k = std::min(cfg.eval_k, spec.m);
  matrix.rows.push_back(detail_bench::make_row("baseline", baseline, result.dataset, cfg));

  {
    Model quantized = baseline;
    for (auto* wm : quantized.prunable()) wm->qp = quant_params(wm->w, cfg.bits);
    matrix.rows.push_back(detail_bench::make_row("quantized", quantized, result.dataset, cfg));
  }
  PruneSchedule schedule;
  schedule.p_target = cfg.p_target;
  schedule.rounds = cfg.prune_rounds;
  schedule.finetune_epochs_per_round = cfg.finetune_epochs;
  schedule.lr = cfg.lr;
  schedule.batch_size = cfg.batch_size;
  schedule.seed = cfg.train_seed + 1;
  schedule.eval_k = matrix.eval_k;
  {
    Model pruned = baseline;
    prune_loop(pruned, schedule, result.dataset);
    matrix.rows.push_back(detail_bench::make_row("pruned", pruned, result.dataset, cfg));
  }
  {
    Model compressed = baseline;
    PipelineOptions opts;
    opts.bits = cfg.bits;
    opts.qat_epochs = cfg.qat_epochs;
    opts.qat_lr = cfg.qat_lr;
    opts.batch_size = cfg.batch_size;
    opts.seed = cfg.train_seed + 2;
    opts.eval_k = matrix.eval_k;
    opts.cost = cfg.cost;
    pipeline_run(compressed, schedule, opts, result.dataset);
    matrix.rows.push_back(
        detail_bench::make_row("pruned_quantized", compressed, result.dataset, cfg));
  }
  if (cfg.attention) {
    ModelSpec student_spec = spec;
    student_spec.h = cfg.student_h;
    student_spec.l_net = cfg.student_l_net;
    student_spec.attention->n_layers = cfg.student_attn_layers;
    Model student = build_model(student_spec, cfg.model_seed + 1);
    DistillConfig dc;
    dc.lambda_kd = cfg.lambda_kd;
    dc.epochs = cfg.distill_epochs;
    dc.lr = cfg.distill_lr;
    dc.batch_size = cfg.batch_size;
    dc.seed = cfg.train_seed + 3;
    distill_train(baseline, student, result.dataset, dc);
    matrix.rows.push_back(detail_bench::make_row("distilled", student, result.dataset, cfg));
    const double ratio = static_cast<double>(count_actual_params(student)) /
                         static_cast<double>(count_actual_params(baseline));
    char note[200];
    std::snprintf(note, sizeof(note),
                  "distilled student at %.3fx baseline parameters; sizing conventions differ "
                  "(~0.2x by the size table vs ~0.7x, i.e. 30%% fewer) and both are reported, "
                  "not reconciled",
                  ratio);
    matrix.notes.push_back(note);
  }
  if (cfg.measure_latency)
    matrix.notes.push_back("measured_latency_ms is wall-clock and not run-to-run reproducible");
  result.baseline = std::move(baseline);
  return result;
}

}  // namespace lightrec
