// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exit code is the failure count.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lightrec/cli.hpp"
#include "lightrec/compress.hpp"
#include "lightrec/distill.hpp"
#include "lightrec/gradcheck.hpp"
#include "lightrec/metrics.hpp"
#include "lightrec/model_io.hpp"
#include "lightrec/report.hpp"
#include "lightrec/sim/simulator.hpp"
#include "lightrec/train.hpp"

using namespace lightrec;
namespace fs = std::filesystem;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const char* message) {
  if (!ok) throw Failure(message);
}

template <typename First, typename... Rest>
void require(bool ok, const char* fmt, First first, Rest... rest) {
  if (ok) return;
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, first, rest...);
  throw Failure(buf);
}

// ---- shared desk-scale fixtures ---------------------------------------------

ModelSpec desk_spec() {
  ModelSpec spec;
  spec.d_e = 16;
  spec.h = 64;
  spec.l_net = 3;
  spec.m = 50;
  spec.vocab = 600;
  return spec;
}

Dataset desk_dataset(std::uint64_t seed) {
  return generate_synthetic(120, 600, 16, 8, 50, 20, seed);
}

PruneSchedule desk_schedule(std::uint64_t seed) {
  PruneSchedule schedule;
  schedule.p_target = 0.4;
  schedule.rounds = 3;
  schedule.finetune_epochs_per_round = 2;
  schedule.lr = 0.15;
  schedule.seed = seed;
  return schedule;
}

// ---- criteria ----------------------------------------------------------------

void criterion_1_formula_exactness() {
  require(param_count_formula(16, 64, 3) == 9280, "param_count_formula(16,64,3) != 9280");
  require(flops_formula(50, 16, 64, 3) == 464000, "flops_formula(50,16,64,3) != 464000");
  Rng rng(17);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t d_e = 1 + rng.uniform_index(32);
    const std::size_t h = 1 + rng.uniform_index(64);
    const std::size_t l_net = 1 + rng.uniform_index(5);
    ModelSpec spec;
    spec.d_e = d_e;
    spec.h = h;
    spec.l_net = l_net;
    spec.m = 5;
    spec.vocab = 50;
    const Model model = build_model(spec, trial);
    require(count_actual_params(model) == param_count_formula(d_e, h, l_net),
            "count_actual_params mismatch at spec (%zu,%zu,%zu)", d_e, h, l_net);
  }
}

void criterion_2_storage_table() {
  const struct {
    std::uint64_t params;
    std::uint32_t bits;
    std::uint64_t bytes;
  } table[] = {{32000000, 32, 128000000},
               {32000000, 8, 32000000},
               {19200000, 32, 76800000},
               {19200000, 8, 19200000},
               {6400000, 16, 12800000}};
  for (const auto& row : table)
    require(model_storage_bytes(row.params, row.bits) == row.bytes,
            "storage(%llu, %u) != %llu", (unsigned long long)row.params, row.bits,
            (unsigned long long)row.bytes);
}

void criterion_3_pruning_ratio() {
  Dataset ds = desk_dataset(3);
  Model model = build_model(desk_spec(), 33);
  train_task(model, ds, 4, 0.25, 21);
  PruneHistory history = prune_loop(model, desk_schedule(5), ds);
  const double expected[] = {0.4 / 3.0, 0.8 / 3.0, 0.4};
  for (std::size_t k = 0; k < 3; ++k) {
    require(std::abs(history.rounds[k].sparsity - expected[k]) <= 0.01,
            "round %zu sparsity %.4f not within 0.01 of %.4f", k + 1,
            history.rounds[k].sparsity, expected[k]);
    if (k > 0)
      require(history.rounds[k].sparsity > history.rounds[k - 1].sparsity,
              "sparsity not monotone at round %zu", k + 1);
  }
  require(std::abs(model_sparsity(model) - 0.40) <= 0.01, "final sparsity %.4f != 0.40 +- 0.01",
          model_sparsity(model));
}

void criterion_4_compression_ratios() {
  Dataset ds = desk_dataset(4);
  Model model = build_model(desk_spec(), 44);
  train_task(model, ds, 4, 0.25, 22);
  PipelineOptions opts;
  opts.bits = 8;
  opts.qat_epochs = 2;
  opts.qat_lr = 0.08;
  opts.seed = 9;
  PipelineResult result = pipeline_run(model, desk_schedule(6), opts, ds);
  const double storage_ratio = static_cast<double>(result.after.storage_bytes) /
                               static_cast<double>(result.before.storage_bytes);
  const double mac_ratio =
      static_cast<double>(result.after.flops) / static_cast<double>(result.before.flops);
  require(std::abs(storage_ratio - 0.15) <= 0.005, "storage ratio %.4f != 0.15 +- 0.005",
          storage_ratio);
  require(std::abs(mac_ratio - 0.60) <= 0.01, "MAC retention %.4f != 0.60 +- 0.01", mac_ratio);
}

void criterion_5_quantization_bounds() {
  Rng rng(55);
  for (int layer = 0; layer < 1000; ++layer) {
    const std::uint32_t bits = 2 + static_cast<std::uint32_t>(rng.uniform_index(7));  // 2..8
    Matrix2D w(6, 11);
    for (auto& v : w.data) v = rng.uniform(-3.0, 3.0);
    for (std::size_t i = 0; i < w.size(); i += 7) w.data[i] = 0.0;  // pruned positions
    const QuantParams qp = quant_params(w, bits);
    const Matrix2D q = quantize_weights(w, qp);
    std::set<double> distinct;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w.data[i] == 0.0) {
        require(q.data[i] == 0.0, "layer %d: zero not preserved", layer);
        continue;
      }
      require(std::abs(q.data[i] - w.data[i]) <= qp.step / 2.0 + 1e-12,
              "layer %d: |q - w| = %.3e > s/2 = %.3e", layer,
              std::abs(q.data[i] - w.data[i]), qp.step / 2.0);
      if (q.data[i] != 0.0) distinct.insert(q.data[i]);
    }
    require(distinct.size() <= (std::size_t{1} << bits),
            "layer %d: %zu distinct values > 2^%u", layer, distinct.size(), bits);
  }
}

void criterion_6_accuracy_retention() {
  double base_sum = 0.0, compressed_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Dataset ds = desk_dataset(seed);
    Model model = build_model(desk_spec(), seed * 11);
    train_task(model, ds, 10, 0.25, seed * 7);
    const EvalResult base = evaluate(model, ds.test_events(), 10);
    PipelineOptions opts;
    opts.bits = 8;
    opts.qat_epochs = 2;
    opts.qat_lr = 0.08;
    opts.seed = seed * 5;
    PipelineResult result = pipeline_run(model, desk_schedule(seed * 3), opts, ds);
    base_sum += base.hit_rate_at_k;
    compressed_sum += result.eval_after.hit_rate_at_k;
  }
  require(base_sum / 3.0 > 0.3, "baseline HitRate@10 %.3f too weak for the check",
          base_sum / 3.0);
  require(compressed_sum >= 0.95 * base_sum,
          "compressed HitRate@10 mean %.4f < 95%% of baseline %.4f", compressed_sum / 3.0,
          base_sum / 3.0);
}

void criterion_7_kd_correctness() {
  Matrix2D map{{0.3, 0.7}, {0.5, 0.5}};
  require(kd_loss({map}, {map}) == 0.0, "kd_loss on identical maps != 0");
  Matrix2D teacher_row{{0.5, 0.5}};
  Matrix2D student_row{{0.25, 0.75}};
  const double hand = kd_loss({teacher_row}, {student_row});
  require(std::abs(hand - 0.1438) <= 1e-3, "kd_loss hand value %.5f != 0.1438 +- 1e-3", hand);

  Dataset ds = generate_synthetic(24, 80, 8, 6, 6, 8, 61);
  ModelSpec teacher_spec;
  teacher_spec.d_e = 8;
  teacher_spec.h = 16;
  teacher_spec.l_net = 2;
  teacher_spec.m = 6;
  teacher_spec.vocab = 80;
  AttentionConfig att;
  att.l_seq = 8;
  att.d_model = 8;
  att.heads = 2;
  att.n_layers = 2;
  teacher_spec.attention = att;
  Model teacher = build_model(teacher_spec, 9);
  train_task(teacher, ds, 4, 0.2, 11);
  const Model teacher_before = teacher;

  ModelSpec student_spec = teacher_spec;
  student_spec.h = 10;
  student_spec.attention->n_layers = 1;
  Model student = build_model(student_spec, 13);
  DistillConfig cfg;
  cfg.lambda_kd = 1.0;
  cfg.epochs = 6;
  cfg.lr = 0.2;
  cfg.seed = 15;
  const TrainHistory history = distill_train(teacher, student, ds, cfg);
  require(history.kd_loss.back() < history.kd_loss.front(),
          "kd_loss did not fall: %.5f -> %.5f", history.kd_loss.front(),
          history.kd_loss.back());
  require(teacher.embedding == teacher_before.embedding &&
              teacher.head.wm.w == teacher_before.head.wm.w,
          "teacher parameters changed during distillation");
  for (std::size_t l = 0; l < teacher.attn.size(); ++l)
    require(teacher.attn[l].q.w == teacher_before.attn[l].q.w &&
                teacher.attn[l].k.w == teacher_before.attn[l].k.w &&
                teacher.attn[l].v.w == teacher_before.attn[l].v.w,
            "teacher attention layer %zu changed", l);
}

void criterion_8_sparse_attention() {
  Rng rng(8);
  const std::size_t l = 12, d = 8;
  Matrix2D x = Matrix2D::random_normal(l, d, 0.0, 1.0, rng);
  AttentionWeights w{Matrix2D::random_normal(d, d, 0.0, 0.5, rng),
                     Matrix2D::random_normal(d, d, 0.0, 0.5, rng),
                     Matrix2D::random_normal(d, d, 0.0, 0.5, rng)};
  AttentionConfig cfg;
  cfg.l_seq = l;
  cfg.d_model = d;
  cfg.heads = 2;
  cfg.window_w = l;
  cfg.random_g = 0;
  auto [sparse_out, pattern] = sparse_attention(x, w, cfg);
  const Matrix2D causal = attention_full(x, w, 2, /*causal=*/true);
  for (std::size_t i = 0; i < sparse_out.size(); ++i)
    require(std::abs(sparse_out.data[i] - causal.data[i]) <= 1e-12,
            "sparse(w=L,g=0) differs from causal dense by %.3e",
            std::abs(sparse_out.data[i] - causal.data[i]));

  AttentionConfig sparse_cfg;
  sparse_cfg.l_seq = 256;
  sparse_cfg.d_model = 32;
  sparse_cfg.heads = 2;
  sparse_cfg.window_w = 16;
  sparse_cfg.random_g = 8;
  sparse_cfg.seed = 3;
  AttentionConfig dense_cfg = sparse_cfg;
  dense_cfg.window_w = 0;
  dense_cfg.random_g = 0;
  const double ratio = static_cast<double>(attention_macs(sparse_cfg).score_value) /
                       static_cast<double>(attention_macs(dense_cfg).score_value);
  require(ratio <= (16.0 + 8.0) / 256.0 + 1e-9, "sparse/dense MAC ratio %.6f above bound",
          ratio);
}

// finite-difference oracle over every parameter of a model
double grad_check(const Model& model, const std::vector<const Event*>& events, double lambda,
                  const Model* teacher,
                  const std::vector<std::pair<std::size_t, std::size_t>>& layer_map) {
  EffectiveWeights teacher_eff;
  if (teacher) teacher_eff = EffectiveWeights::of(*teacher);
  auto maps_for = [&](const Event& e) {
    std::vector<std::pair<Matrix2D, std::size_t>> maps;
    if (teacher) {
      EventTrace tt;
      score_event(*teacher, teacher_eff, e.seq, e.cands, &tt);
      for (const auto& [tl, sl] : layer_map) maps.emplace_back(tt.attn_traces[tl].avg_map, sl);
    }
    return maps;
  };
  const EffectiveWeights eff = EffectiveWeights::of(model);
  ModelGrads grads = ModelGrads::like(model);
  const double inv_n = 1.0 / static_cast<double>(events.size());
  for (const Event* e : events) {
    auto maps = maps_for(*e);
    event_loss_and_grads(model, eff, *e, inv_n, lambda * inv_n, teacher ? &maps : nullptr,
                         &grads);
  }
  const std::vector<double> flat = flatten_params(model);
  Matrix2D params(1, flat.size());
  params.data = flat;
  Matrix2D analytic(1, flat.size());
  analytic.data = flatten_grads(grads);
  auto loss_fn = [&](const Matrix2D& p) {
    Model probe = model;
    assign_params(probe, p.data);
    const EffectiveWeights peff = EffectiveWeights::of(probe);
    double total = 0.0;
    for (const Event* e : events) {
      auto maps = maps_for(*e);
      const EventLoss l =
          event_loss_and_grads(probe, peff, *e, 1.0, 0.0, teacher ? &maps : nullptr, nullptr);
      total += l.task + lambda * l.kd;
    }
    return total / static_cast<double>(events.size());
  };
  return finite_difference_grad_check(loss_fn, params, analytic, 1e-5).max_rel_error;
}

void criterion_9_gradient_integrity() {
  Dataset ds = generate_synthetic(8, 30, 6, 4, 5, 6, 31);
  std::vector<const Event*> events;
  for (const auto& e : ds.events) {
    events.push_back(&e);
    if (events.size() == 4) break;
  }
  ModelSpec spec;
  spec.d_e = 4;
  spec.h = 8;
  spec.l_net = 2;
  spec.m = 5;
  spec.vocab = 30;
  {
    Model model = build_model(spec, 3);
    const double err = grad_check(model, events, 0.0, nullptr, {});
    require(err < 1e-3, "task-loss gradient error %.2e >= 1e-3", err);
  }
  {
    ModelSpec attn_spec = spec;
    AttentionConfig att;
    att.l_seq = 6;
    att.d_model = 4;
    att.heads = 2;
    att.n_layers = 2;
    attn_spec.attention = att;
    Model teacher = build_model(attn_spec, 11);
    ModelSpec student_spec = attn_spec;
    student_spec.h = 6;
    student_spec.attention->n_layers = 1;
    Model student = build_model(student_spec, 13);
    const double err = grad_check(student, events, 1.0, &teacher, uniform_layer_map(2, 1));
    require(err < 1e-3, "distillation gradient error %.2e >= 1e-3", err);
  }
  {
    // straight-through estimator: gradients at quantized weights match the
    // dense path wherever clipping did not saturate
    Model qat = build_model(spec, 19);
    for (auto* wm : qat.prunable()) wm->qp = quant_params(wm->w, 8);
    Model dense = qat;
    for (auto* wm : dense.prunable()) {
      wm->w = quantize_weights(wm->w, *wm->qp);
      wm->qp.reset();
    }
    const EffectiveWeights eff = EffectiveWeights::of(qat);
    const EffectiveWeights dense_eff = EffectiveWeights::of(dense);
    ModelGrads g_qat = ModelGrads::like(qat);
    ModelGrads g_dense = ModelGrads::like(dense);
    for (const Event* e : events) {
      event_loss_and_grads(qat, eff, *e, 0.25, 0.0, nullptr, &g_qat);
      event_loss_and_grads(dense, dense_eff, *e, 0.25, 0.0, nullptr, &g_dense);
    }
    double max_diff = 0.0;
    for (std::size_t l = 0; l < g_qat.tower.size(); ++l)
      for (std::size_t i = 0; i < g_qat.tower[l].w.size(); ++i)
        if (eff.tower[l].pass_through->data[i] != 0.0)
          max_diff = std::max(
              max_diff, std::abs(g_qat.tower[l].w.data[i] - g_dense.tower[l].w.data[i]));
    require(max_diff < 1e-3, "STE gradient differs from dense path by %.2e", max_diff);
  }
}

void criterion_10_simulator_calibration() {
  // D/D/1: deterministic interarrival 20 ms, deterministic service 10 ms
  sim::Scenario dd1;
  dd1.duration_s = 10.0;
  dd1.arrival.kind = sim::ArrivalSpec::Kind::Deterministic;
  dd1.arrival.rate_per_s = 50.0;
  dd1.tiers = {sim::TierSpec{"std", 1.0, 1e9, 1e9, false, 0.0}};
  dd1.model_cost.cost = {1e-3, 0.0};
  dd1.model_cost.m = 1;
  dd1.model_cost.l_net = 1;
  dd1.model_cost.h = 100;  // 1e-3 * 10000 = 10 ms
  dd1.model_cost.dist = sim::ModelCostSpec::Dist::Deterministic;
  dd1.seed = 1;
  const sim::SimResult dd = sim::simulate(dd1);
  require(dd.report.completed == 500, "D/D/1 completed %llu != 500",
          (unsigned long long)dd.report.completed);
  for (const auto& rec : dd.records)
    require(rec.latency_ms == 10.0, "D/D/1 latency %.6f != 10", rec.latency_ms);
  require(dd.report.mean_utilization == 0.5, "D/D/1 utilization %.6f != 0.5",
          dd.report.mean_utilization);

  // M/M/1: lambda 50/s, mu 100/s -> mean sojourn 20 ms, averaged over 20 seeds
  double mean_sum = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    sim::Scenario mm1 = dd1;
    mm1.duration_s = 30.0;
    mm1.arrival.kind = sim::ArrivalSpec::Kind::Poisson;
    mm1.model_cost.dist = sim::ModelCostSpec::Dist::Exponential;
    mm1.seed = 1000 + static_cast<std::uint64_t>(seed);
    mean_sum += sim::simulate(mm1).report.latency_mean_ms;
  }
  const double mm1_mean = mean_sum / 20.0;
  require(std::abs(mm1_mean - 20.0) <= 2.0, "M/M/1 mean latency %.2f outside 20 +- 10%%",
          mm1_mean);
}

void criterion_11_serving_tradeoffs() {
  // batching at saturating offered load
  auto batch_run = [](std::size_t max_batch) {
    sim::Scenario s;
    s.duration_s = 60.0;
    s.arrival.kind = sim::ArrivalSpec::Kind::Poisson;
    s.arrival.rate_per_s = 1200.0;
    s.tiers = {sim::TierSpec{"std", 1.0, 1e9, 1e9, false, 0.0}};
    s.model_cost.cost = {1e-3, 5.0};
    s.model_cost.m = 1;
    s.model_cost.l_net = 1;
    s.model_cost.h = 32;
    s.model_cost.dist = sim::ModelCostSpec::Dist::Deterministic;
    s.batching.max_batch = max_batch;
    s.batching.max_wait_ms = 4.0;
    s.rate_limiter.shed_threshold = 0.8;
    s.rate_limiter.shed_slope = 20.0;
    s.rate_limiter.shed_window_s = 0.05;
    s.seed = 11;
    return sim::simulate(s);
  };
  const sim::SimResult b1 = batch_run(1);
  const sim::SimResult b8 = batch_run(8);
  require(b8.report.throughput_rps >= 1.5 * b1.report.throughput_rps,
          "throughput(B=8) %.1f < 1.5x throughput(B=1) %.1f", b8.report.throughput_rps,
          b1.report.throughput_rps);
  require(b8.report.latency_mean_ms >= b1.report.latency_mean_ms,
          "latency(B=8) %.2f < latency(B=1) %.2f", b8.report.latency_mean_ms,
          b1.report.latency_mean_ms);

  // priority bypass beats the batched tier on p99
  {
    sim::Scenario s;
    s.duration_s = 30.0;
    s.arrival.kind = sim::ArrivalSpec::Kind::Poisson;
    s.arrival.rate_per_s = 300.0;
    s.tiers = {sim::TierSpec{"gold", 0.2, 1e9, 1e9, true, 0.0},
               sim::TierSpec{"std", 0.8, 1e9, 1e9, false, 0.0}};
    s.model_cost.cost = {1e-3, 1.0};
    s.model_cost.m = 1;
    s.model_cost.l_net = 1;
    s.model_cost.h = 32;
    s.batching.max_batch = 8;
    s.batching.max_wait_ms = 20.0;
    s.seed = 23;
    const sim::SimResult result = sim::simulate(s);
    require(result.report.per_tier[0].latency_p99_ms < result.report.per_tier[1].latency_p99_ms,
            "priority p99 %.2f >= batched p99 %.2f", result.report.per_tier[0].latency_p99_ms,
            result.report.per_tier[1].latency_p99_ms);
  }

  // least-loaded vs random on max queue length, 20 seeded runs
  {
    int wins = 0;
    for (int seed = 0; seed < 20; ++seed) {
      auto run = [&](sim::RoutingPolicy policy) {
        sim::Scenario s;
        s.duration_s = 20.0;
        s.arrival.kind = sim::ArrivalSpec::Kind::Poisson;
        s.arrival.rate_per_s = 260.0;
        s.tiers = {sim::TierSpec{"std", 1.0, 1e9, 1e9, false, 0.0}};
        s.fleet.initial_replicas = 4;
        s.fleet.max_replicas = 4;
        s.model_cost.cost = {1e-3, 10.0};
        s.model_cost.m = 1;
        s.model_cost.l_net = 1;
        s.model_cost.h = 32;
        s.model_cost.dist = sim::ModelCostSpec::Dist::Lognormal;
        s.model_cost.noise_sigma = 0.6;
        s.routing = policy;
        s.seed = 500 + static_cast<std::uint64_t>(seed);
        return sim::simulate(s).report.max_queue_length;
      };
      wins += run(sim::RoutingPolicy::LeastLoaded) <= run(sim::RoutingPolicy::Random) ? 1 : 0;
    }
    require(wins >= 18, "least-loaded beat random in only %d/20 runs", wins);
  }

  // pruned+quantized cost law (alpha scaled by MAC retention 0.6) under an
  // identical saturating workload
  {
    auto law_run = [](double alpha) {
      sim::Scenario s;
      s.duration_s = 60.0;
      s.arrival.kind = sim::ArrivalSpec::Kind::Poisson;
      s.arrival.rate_per_s = 400.0;
      s.tiers = {sim::TierSpec{"std", 1.0, 1e9, 1e9, false, 0.0}};
      s.model_cost.cost = {alpha, 2.0};
      s.model_cost.m = 1;
      s.model_cost.l_net = 1;
      s.model_cost.h = 10;  // variable = alpha * 100 ms
      s.model_cost.dist = sim::ModelCostSpec::Dist::Deterministic;
      s.rate_limiter.shed_threshold = 0.8;
      s.rate_limiter.shed_slope = 20.0;
      s.rate_limiter.shed_window_s = 0.05;
      s.seed = 19;
      return sim::simulate(s);
    };
    const sim::SimResult baseline = law_run(0.2);
    const sim::SimResult compressed = law_run(0.2 * 0.6);
    require(compressed.report.throughput_rps >= 1.4 * baseline.report.throughput_rps,
            "compressed throughput %.1f < 1.4x baseline %.1f",
            compressed.report.throughput_rps, baseline.report.throughput_rps);
  }
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure("missing artifact " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void criterion_12_determinism() {
  const fs::path root = fs::temp_directory_path() / "lightrec_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  auto write_config = [&](const std::string& name, const nlohmann::ordered_json& j) {
    const auto path = (root / name).string();
    std::ofstream out(path);
    out << j.dump(2);
    return path;
  };
  auto run = [](const std::vector<std::string>& args) {
    std::ostringstream sink;  // keep per-command chatter out of the criterion lines
    auto* old = std::cout.rdbuf(sink.rdbuf());
    const int code = cli::run_command(args);
    std::cout.rdbuf(old);
    if (code != 0) throw Failure("command failed with exit " + std::to_string(code));
  };

  const auto data_cfg = write_config(
      "data.json", {{"users", 20}, {"items", 80}, {"d_latent", 8}, {"events_per_user", 6},
                    {"m", 8}, {"s_max", 6}, {"seed", 5}});
  run({"gen-data", "--config", data_cfg, "--out", (root / "d1").string()});
  run({"gen-data", "--config", data_cfg, "--out", (root / "d2").string()});
  require(slurp(root / "d1" / "dataset.jsonl") == slurp(root / "d2" / "dataset.jsonl"),
          "gen-data reruns differ");

  const auto train_cfg = write_config(
      "train.json", {{"dataset", (root / "d1" / "dataset.jsonl").string()},
                     {"model", {{"d_e", 8}, {"h", 12}, {"l_net", 2}}},
                     {"epochs", 2}, {"lr", 0.2}, {"seed", 9}, {"eval_k", 5}});
  run({"train", "--config", train_cfg, "--out", (root / "t1").string()});
  run({"train", "--config", train_cfg, "--out", (root / "t2").string()});
  require(slurp(root / "t1" / "model.lrm") == slurp(root / "t2" / "model.lrm"),
          "train reruns produce different models");
  require(slurp(root / "t1" / "train_report.json") == slurp(root / "t2" / "train_report.json"),
          "train reruns produce different reports");

  const auto pipeline_cfg = write_config(
      "pipeline.json",
      {{"dataset", (root / "d1" / "dataset.jsonl").string()},
       {"model_in", (root / "t1" / "model.lrm").string()},
       {"prune", {{"p_target", 0.4}, {"rounds", 2}, {"finetune_epochs", 1}, {"lr", 0.1}}},
       {"bits", 8}, {"qat_epochs", 1}, {"seed", 3}});
  run({"pipeline", "--config", pipeline_cfg, "--out", (root / "p1").string()});
  run({"pipeline", "--config", pipeline_cfg, "--out", (root / "p2").string()});
  require(slurp(root / "p1" / "model.lrm") == slurp(root / "p2" / "model.lrm"),
          "pipeline reruns produce different models");
  require(slurp(root / "p1" / "compression_report.json") ==
              slurp(root / "p2" / "compression_report.json"),
          "pipeline reruns produce different reports");

  nlohmann::ordered_json scenario = {
      {"duration_s", 5.0},
      {"arrival", {{"type", "poisson"}, {"rate_per_s", 120.0}}},
      {"tiers", nlohmann::ordered_json::array(
                    {{{"name", "gold"}, {"share", 0.3}, {"token_rate", 50.0},
                      {"bucket_capacity", 20.0}, {"priority", true}},
                     {{"name", "std"}, {"share", 0.7}, {"token_rate", 100.0},
                      {"bucket_capacity", 40.0}, {"priority", false}}})},
      {"batching", {{"max_batch", 4}, {"max_wait_ms", 6.0}}},
      {"model_cost", {{"alpha_ms_per_mac", 1e-6}, {"beta_ms", 2.0}, {"m", 50}, {"l_net", 3},
                      {"h", 64}, {"noise_sigma", 0.2}, {"distribution", "lognormal"}}},
      {"seed", 12}};
  const auto sim_cfg = write_config("sim.json", {{"scenario", scenario}});
  run({"simulate", "--config", sim_cfg, "--out", (root / "s1").string()});
  run({"simulate", "--config", sim_cfg, "--out", (root / "s2").string()});
  require(slurp(root / "s1" / "sim_report.json") == slurp(root / "s2" / "sim_report.json"),
          "simulate reruns produce different reports");
  require(slurp(root / "s1" / "sim_timeseries.csv") == slurp(root / "s2" / "sim_timeseries.csv"),
          "simulate reruns produce different time series");

  const auto bench_cfg = write_config(
      "bench.json", {{"users", 20}, {"items", 100}, {"d_latent", 8}, {"events_per_user", 6},
                     {"m", 8}, {"s_max", 6}, {"d_e", 8}, {"h", 12}, {"l_net", 2},
                     {"heads", 2}, {"attn_layers", 2}, {"epochs", 2}, {"prune_rounds", 2},
                     {"finetune_epochs", 1}, {"qat_epochs", 1}, {"student_h", 8},
                     {"student_l_net", 2}, {"student_attn_layers", 1}, {"distill_epochs", 1},
                     {"eval_k", 5}, {"seed", 2}});
  run({"bench", "--config", bench_cfg, "--out", (root / "b1").string()});
  run({"bench", "--config", bench_cfg, "--out", (root / "b2").string()});
  require(slurp(root / "b1" / "benchmark.json") == slurp(root / "b2" / "benchmark.json"),
          "bench reruns produce different matrices");
  require(slurp(root / "b1" / "manifest.json") == slurp(root / "b2" / "manifest.json"),
          "bench reruns produce different manifests");
  fs::remove_all(root);
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void()>>> criteria = {
      {"formula exactness: Eq-1 params and Eq-2 FLOPs match enumeration", criterion_1_formula_exactness},
      {"storage table: five (params, bits) sizes reproduced exactly", criterion_2_storage_table},
      {"pruning ratio: 0.40 +- 0.01 with monotone per-round schedule", criterion_3_pruning_ratio},
      {"compression: storage ratio 0.15 +- 0.005, MAC retention 0.60 +- 0.01", criterion_4_compression_ratios},
      {"quantization: error <= s/2, <= 2^b levels, zeros preserved (1000 layers)", criterion_5_quantization_bounds},
      {"accuracy retention: compressed HitRate@10 >= 95% of baseline over 3 seeds", criterion_6_accuracy_retention},
      {"knowledge distillation: hand value, falling KD loss, frozen teacher", criterion_7_kd_correctness},
      {"sparse attention: causal-dense equivalence and MAC ratio bound", criterion_8_sparse_attention},
      {"gradient integrity: task, distillation and STE paths < 1e-3", criterion_9_gradient_integrity},
      {"simulator calibration: D/D/1 exact, M/M/1 within 10%", criterion_10_simulator_calibration},
      {"serving trade-offs: batching, priority bypass, routing, cost law", criterion_11_serving_tradeoffs},
      {"determinism: rerun of every command is byte-identical", criterion_12_determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second();
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::printf("PASS criterion %2zu (%5.1fs): %s\n", i + 1, secs, criteria[i].first.c_str());
    } catch (const std::exception& e) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::printf("FAIL criterion %2zu (%5.1fs): %s -- %s\n", i + 1, secs,
                  criteria[i].first.c_str(), e.what());
      ++failures;
    }
    std::fflush(stdout);
  }
  if (failures == 0)
    std::printf("all %zu acceptance criteria passed\n", criteria.size());
  else
    std::printf("%d of %zu acceptance criteria FAILED\n", failures, criteria.size());
  return failures;
}
