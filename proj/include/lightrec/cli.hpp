#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "lightrec/compress.hpp"
#include "lightrec/dataset.hpp"
#include "lightrec/distill.hpp"
#include "lightrec/errors.hpp"
#include "lightrec/metrics.hpp"
#include "lightrec/model_io.hpp"
#include "lightrec/report.hpp"
#include "lightrec/sim/simulator.hpp"
#include "lightrec/train.hpp"
#include "lightrec/version.hpp"

namespace lightrec::cli {

using ordered_json = nlohmann::ordered_json;

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

inline std::string hash_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
  if (!out) throw ConfigError("write failed for " + path.string());
}

// Context shared by every subcommand: resolved config, flag overrides, run
// directory and manifest emission. Runs are self-describing: the manifest
// records the resolved config, its hash, the seed and the library version,
// and rerunning the same config reproduces every artifact byte for byte.
struct RunContext {
  ordered_json config;
  std::string command;
  std::string out_dir;
  std::string format = "json";

  std::uint64_t seed(std::uint64_t fallback = 0) const {
    return config.value("seed", fallback);
  }

  std::filesystem::path dir() const { return out_dir; }

  void finalize_out_dir(const std::string& flag_out) {
    if (!flag_out.empty()) {
      out_dir = flag_out;
      return;
    }
    const char* root = std::getenv("LIGHTREC_OUT_ROOT");
    const std::string base = root != nullptr ? root : "runs";
    out_dir = base + "/" + command + "-" + hash_hex(config.dump());
  }

  void write_manifest() const {
    ordered_json manifest;
    manifest["command"] = command;
    manifest["version"] = kVersion;
    manifest["seed"] = config.value("seed", std::uint64_t{0});
    manifest["config_hash"] = hash_hex(config.dump());
    manifest["config"] = config;
    write_text(dir() / "manifest.json", manifest.dump(2) + "\n");
  }

  void write_json(const std::string& name, const ordered_json& j) const {
    write_text(dir() / name, j.dump(2) + "\n");
  }
};

inline ordered_json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open config file " + path);
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw CLI::ValidationError("--config", std::string("malformed config JSON: ") + e.what());
  }
}

inline ModelSpec spec_from_config(const ordered_json& m, std::uint64_t vocab) {
  ModelSpec spec;
  spec.d = m.value("d", std::size_t{1});
  spec.d_e = m.value("d_e", std::size_t{16});
  spec.h = m.value("h", std::size_t{64});
  spec.l_net = m.value("l_net", std::size_t{3});
  spec.m = m.value("m", std::size_t{50});
  spec.vocab = m.value("vocab", vocab);
  spec.b_p = m.value("b_p", std::uint32_t{4});
  spec.b_a = m.value("b_a", std::uint32_t{4});
  if (m.contains("attention")) {
    const auto& a = m.at("attention");
    AttentionConfig att;
    att.l_seq = a.value("l_seq", std::size_t{1});
    att.d_model = a.value("d_model", spec.d_e);
    att.heads = a.value("heads", std::size_t{1});
    att.n_layers = a.value("n_layers", std::size_t{1});
    att.window_w = a.value("window_w", std::size_t{0});
    att.random_g = a.value("random_g", std::size_t{0});
    att.seed = a.value("seed", std::uint64_t{0});
    spec.attention = att;
  }
  return spec;
}

inline ordered_json eval_to_json(const EvalResult& e) {
  return ordered_json{{"hit_rate_at_k", e.hit_rate_at_k}, {"ndcg_at_k", e.ndcg_at_k}, {"mrr", e.mrr}};
}

inline ordered_json cost_to_json(const CostReport& c) {
  ordered_json j;
  j["params"] = c.params;
  j["flops"] = c.flops;
  j["latency_ms_predicted"] = c.latency_ms_predicted;
  j["mem_params_bytes"] = c.mem_params_bytes;
  j["mem_act_bytes"] = c.mem_act_bytes;
  j["storage_bytes"] = c.storage_bytes;
  return j;
}

// --- subcommand bodies ------------------------------------------------------

inline void cmd_gen_data(RunContext& ctx) {
  const auto& c = ctx.config;
  Dataset ds = generate_synthetic(
      c.value("users", std::uint64_t{200}), c.value("items", std::uint64_t{1000}),
      c.value("d_latent", std::uint64_t{16}), c.value("events_per_user", std::uint64_t{8}),
      c.value("m", std::uint64_t{50}), c.value("s_max", std::uint64_t{20}), ctx.seed(1));
  std::filesystem::create_directories(ctx.dir());
  save_dataset_jsonl(ds, (ctx.dir() / "dataset.jsonl").string());
  ordered_json summary;
  summary["events"] = ds.events.size();
  summary["train_events"] = ds.train_events().size();
  summary["test_events"] = ds.test_events().size();
  ctx.write_json("gen_report.json", summary);
  ctx.write_manifest();
}

inline void cmd_train(RunContext& ctx) {
  const auto& c = ctx.config;
  Dataset ds = load_dataset_jsonl(c.at("dataset").get<std::string>());
  ModelSpec spec = spec_from_config(c.value("model", ordered_json::object()), ds.items);
  spec.m = ds.m;
  Model model = build_model(spec, ctx.seed(7));
  TrainHistory history =
      train_task(model, ds, c.value("epochs", std::size_t{10}), c.value("lr", 0.2), ctx.seed(7),
                 c.value("batch_size", std::size_t{16}));
  const std::size_t k = std::min(c.value("eval_k", std::size_t{10}), spec.m);
  const EvalResult eval = evaluate(model, ds.test_events(), k);
  std::filesystem::create_directories(ctx.dir());
  save_model(model, (ctx.dir() / "model.lrm").string());
  ordered_json report;
  report["task_loss"] = history.task_loss;
  report["eval_k"] = k;
  report["eval"] = eval_to_json(eval);
  report["cost"] = cost_to_json(cost_report(model, CostParams{c.value("alpha", 1e-6),
                                                              c.value("beta", 5.0)}));
  ctx.write_json("train_report.json", report);
  ctx.write_manifest();
}

inline PruneSchedule schedule_from_config(const ordered_json& c, std::uint64_t seed) {
  PruneSchedule schedule;
  schedule.p_target = c.value("p_target", 0.4);
  schedule.rounds = c.value("rounds", std::size_t{3});
  schedule.finetune_epochs_per_round = c.value("finetune_epochs", std::size_t{2});
  schedule.lr = c.value("lr", 0.1);
  schedule.batch_size = c.value("batch_size", std::size_t{16});
  schedule.seed = seed;
  schedule.per_layer = c.value("per_layer", false);
  schedule.eval_k = c.value("eval_k", std::size_t{10});
  return schedule;
}

inline ordered_json prune_history_to_json(const PruneHistory& history) {
  ordered_json rounds = ordered_json::array();
  for (const auto& r : history.rounds) {
    ordered_json rj;
    rj["sparsity"] = r.sparsity;
    rj["theta"] = r.theta;
    rj["task_loss"] = r.task_loss;
    rj["eval"] = eval_to_json(r.eval);
    rounds.push_back(rj);
  }
  return rounds;
}

inline void cmd_prune(RunContext& ctx) {
  const auto& c = ctx.config;
  Dataset ds = load_dataset_jsonl(c.at("dataset").get<std::string>());
  Model model = load_model(c.at("model_in").get<std::string>());
  PruneSchedule schedule = schedule_from_config(c, ctx.seed(5));
  schedule.eval_k = std::min(schedule.eval_k, model.spec.m);
  PruneHistory history = prune_loop(model, schedule, ds);
  std::filesystem::create_directories(ctx.dir());
  save_model(model, (ctx.dir() / "model.lrm").string());
  ordered_json report;
  report["rounds"] = prune_history_to_json(history);
  report["final_sparsity"] = model_sparsity(model);
  ctx.write_json("prune_report.json", report);
  ctx.write_manifest();
}

inline ordered_json qp_summary(const Model& model) {
  ordered_json layers = ordered_json::array();
  for (const auto& meta : model_io::matrix_order(model)) {
    ordered_json lj;
    lj["name"] = meta.name;
    lj["retained"] = meta.wm->retained_count();
    if (meta.wm->qp) {
      lj["bits"] = meta.wm->qp->bits;
      lj["step"] = meta.wm->qp->step;
      lj["w_min"] = meta.wm->qp->w_min;
      lj["w_max"] = meta.wm->qp->w_max;
    }
    layers.push_back(lj);
  }
  return layers;
}

inline void cmd_quantize(RunContext& ctx) {
  const auto& c = ctx.config;
  Model model = load_model(c.at("model_in").get<std::string>());
  const auto bits = c.value("bits", std::uint32_t{8});
  for (auto* wm : model.prunable()) wm->qp = quant_params(wm->w, bits);
  if (c.value("quantize_activations", false)) model.act_quant_bits = bits;
  std::filesystem::create_directories(ctx.dir());
  save_model(model, (ctx.dir() / "model.lrm").string());
  ordered_json report;
  report["bits"] = bits;
  report["layers"] = qp_summary(model);
  if (c.contains("dataset")) {
    Dataset ds = load_dataset_jsonl(c.at("dataset").get<std::string>());
    const std::size_t k = std::min(c.value("eval_k", std::size_t{10}), model.spec.m);
    report["eval_k"] = k;
    report["eval"] = eval_to_json(evaluate(model, ds.test_events(), k));
  }
  ctx.write_json("quant_report.json", report);
  ctx.write_manifest();
}

inline void cmd_pipeline(RunContext& ctx) {
  const auto& c = ctx.config;
  Dataset ds = load_dataset_jsonl(c.at("dataset").get<std::string>());
  Model model = load_model(c.at("model_in").get<std::string>());
  PruneSchedule schedule =
      schedule_from_config(c.value("prune", ordered_json::object()), ctx.seed(5));
  schedule.eval_k = std::min(schedule.eval_k, model.spec.m);
  PipelineOptions opts;
  opts.bits = c.value("bits", std::uint32_t{8});
  opts.qat_epochs = c.value("qat_epochs", std::size_t{2});
  opts.qat_lr = c.value("qat_lr", 0.05);
  opts.batch_size = c.value("batch_size", std::size_t{16});
  opts.seed = ctx.seed(5) + 1;
  opts.quantize_activations = c.value("quantize_activations", false);
  opts.eval_k = schedule.eval_k;
  opts.cost = CostParams{c.value("alpha", 1e-6), c.value("beta", 5.0)};
  PipelineResult result = pipeline_run(model, schedule, opts, ds);
  std::filesystem::create_directories(ctx.dir());
  save_model(model, (ctx.dir() / "model.lrm").string());
  ordered_json report;
  report["prune_rounds"] = prune_history_to_json(result.prune_history);
  report["sparsity"] = result.sparsity;
  report["quant_layers"] = qp_summary(model);
  report["qat_task_loss"] = result.qat_history.task_loss;
  report["cost_before"] = cost_to_json(result.before);
  report["cost_after"] = cost_to_json(result.after);
  report["storage_ratio"] = static_cast<double>(result.after.storage_bytes) /
                            static_cast<double>(result.before.storage_bytes);
  report["mac_ratio"] =
      static_cast<double>(result.after.flops) / static_cast<double>(result.before.flops);
  report["eval_before"] = eval_to_json(result.eval_before);
  report["eval_after"] = eval_to_json(result.eval_after);
  report["eval_delta"] =
      ordered_json{{"hit_rate_at_k", result.eval_after.hit_rate_at_k - result.eval_before.hit_rate_at_k},
                   {"ndcg_at_k", result.eval_after.ndcg_at_k - result.eval_before.ndcg_at_k},
                   {"mrr", result.eval_after.mrr - result.eval_before.mrr}};
  ctx.write_json("compression_report.json", report);
  ctx.write_manifest();
}

inline void cmd_distill(RunContext& ctx) {
  const auto& c = ctx.config;
  Dataset ds = load_dataset_jsonl(c.at("dataset").get<std::string>());
  Model teacher = load_model(c.at("teacher").get<std::string>());
  ModelSpec student_spec =
      spec_from_config(c.value("student", ordered_json::object()), teacher.spec.vocab);
  student_spec.m = teacher.spec.m;
  if (!student_spec.attention) student_spec.attention = teacher.spec.attention;
  Model student = build_model(student_spec, ctx.seed(13));
  DistillConfig cfg;
  cfg.lambda_kd = c.value("lambda_kd", 1.0);
  cfg.epochs = c.value("epochs", std::size_t{6});
  cfg.lr = c.value("lr", 0.2);
  cfg.batch_size = c.value("batch_size", std::size_t{16});
  cfg.seed = ctx.seed(13);
  TrainHistory history = distill_train(teacher, student, ds, cfg);
  const std::size_t k = std::min(c.value("eval_k", std::size_t{10}), student.spec.m);
  std::filesystem::create_directories(ctx.dir());
  save_model(student, (ctx.dir() / "student.lrm").string());
  ordered_json report;
  report["task_loss"] = history.task_loss;
  report["kd_loss"] = history.kd_loss;
  report["eval_k"] = k;
  report["eval_teacher"] = eval_to_json(evaluate(teacher, ds.test_events(), k));
  report["eval_student"] = eval_to_json(evaluate(student, ds.test_events(), k));
  report["teacher_params"] = count_actual_params(teacher);
  report["student_params"] = count_actual_params(student);
  report["param_ratio"] = static_cast<double>(count_actual_params(student)) /
                          static_cast<double>(count_actual_params(teacher));
  ctx.write_json("distill_report.json", report);
  ctx.write_manifest();
}

inline BenchConfig bench_config_from_json(const ordered_json& c) {
  BenchConfig cfg;
  cfg.users = c.value("users", cfg.users);
  cfg.items = c.value("items", cfg.items);
  cfg.d_latent = c.value("d_latent", cfg.d_latent);
  cfg.events_per_user = c.value("events_per_user", cfg.events_per_user);
  cfg.m = c.value("m", cfg.m);
  cfg.s_max = c.value("s_max", cfg.s_max);
  cfg.data_seed = c.value("data_seed", cfg.data_seed);
  cfg.d_e = c.value("d_e", cfg.d_e);
  cfg.h = c.value("h", cfg.h);
  cfg.l_net = c.value("l_net", cfg.l_net);
  cfg.attention = c.value("attention", cfg.attention);
  cfg.heads = c.value("heads", cfg.heads);
  cfg.attn_layers = c.value("attn_layers", cfg.attn_layers);
  cfg.model_seed = c.value("model_seed", cfg.model_seed);
  cfg.epochs = c.value("epochs", cfg.epochs);
  cfg.lr = c.value("lr", cfg.lr);
  cfg.batch_size = c.value("batch_size", cfg.batch_size);
  cfg.train_seed = c.value("seed", cfg.train_seed);
  cfg.p_target = c.value("p_target", cfg.p_target);
  cfg.prune_rounds = c.value("prune_rounds", cfg.prune_rounds);
  cfg.finetune_epochs = c.value("finetune_epochs", cfg.finetune_epochs);
  cfg.bits = c.value("bits", cfg.bits);
  cfg.qat_epochs = c.value("qat_epochs", cfg.qat_epochs);
  cfg.qat_lr = c.value("qat_lr", cfg.qat_lr);
  cfg.student_h = c.value("student_h", cfg.student_h);
  cfg.student_l_net = c.value("student_l_net", cfg.student_l_net);
  cfg.student_attn_layers = c.value("student_attn_layers", cfg.student_attn_layers);
  cfg.distill_epochs = c.value("distill_epochs", cfg.distill_epochs);
  cfg.distill_lr = c.value("distill_lr", cfg.distill_lr);
  cfg.lambda_kd = c.value("lambda_kd", cfg.lambda_kd);
  cfg.eval_k = c.value("eval_k", cfg.eval_k);
  cfg.cost.alpha_ms_per_mac = c.value("alpha", cfg.cost.alpha_ms_per_mac);
  cfg.cost.beta_ms = c.value("beta", cfg.cost.beta_ms);
  cfg.measure_latency = c.value("measure_latency", false);
  cfg.measure_events = c.value("measure_events", cfg.measure_events);
  return cfg;
}

inline void cmd_bench(RunContext& ctx) {
  BenchConfig cfg = bench_config_from_json(ctx.config);
  BenchResult result = run_benchmark(cfg);
  std::filesystem::create_directories(ctx.dir());
  ctx.write_json("benchmark.json", matrix_to_json(result.matrix));
  if (ctx.format == "csv" || ctx.format == "both")
    write_text(ctx.dir() / "benchmark.csv", matrix_to_csv(result.matrix));
  ctx.write_manifest();
}

inline void cmd_simulate(RunContext& ctx) {
  const auto& c = ctx.config;
  sim::Scenario scenario;
  if (c.contains("scenario_file"))
    scenario = sim::load_scenario(c.at("scenario_file").get<std::string>());
  else if (c.contains("scenario"))
    scenario = sim::scenario_from_json(c.at("scenario"));
  else
    throw ConfigError("simulate: config needs 'scenario' or 'scenario_file'");
  if (c.contains("seed")) scenario.seed = c.at("seed").get<std::uint64_t>();
  sim::SimResult result = sim::simulate(scenario);
  std::filesystem::create_directories(ctx.dir());
  ctx.write_json("sim_report.json", sim::report_to_json(result.report));
  write_text(ctx.dir() / "sim_timeseries.csv", sim::records_to_csv(result.records));
  ctx.write_manifest();
}

// Reads a benchmark.json produced by `bench` and re-emits it in the requested
// format; ratios are recomputed from the stored counts, never re-measured.
inline void cmd_report(RunContext& ctx) {
  const auto& c = ctx.config;
  std::ifstream in(c.at("matrix").get<std::string>());
  if (!in) throw ConfigError("report: cannot open matrix file");
  const ordered_json j = ordered_json::parse(in);
  BenchmarkMatrix matrix;
  matrix.eval_k = j.value("eval_k", std::size_t{10});
  for (const auto& rj : j.at("rows")) {
    BenchmarkRow row;
    row.variant = rj.at("variant").get<std::string>();
    row.params = rj.at("params").get<std::uint64_t>();
    row.storage_bytes = rj.at("storage_bytes").get<std::uint64_t>();
    row.macs = rj.at("macs").get<std::uint64_t>();
    row.eval.hit_rate_at_k = rj.at("hit_rate_at_k").get<double>();
    row.eval.ndcg_at_k = rj.at("ndcg_at_k").get<double>();
    row.eval.mrr = rj.at("mrr").get<double>();
    row.predicted_latency_ms = rj.at("predicted_latency_ms").get<double>();
    if (rj.contains("measured_latency_ms") && !rj.at("measured_latency_ms").is_null())
      row.measured_latency_ms = rj.at("measured_latency_ms").get<double>();
    matrix.rows.push_back(row);
  }
  if (j.contains("notes"))
    for (const auto& n : j.at("notes")) matrix.notes.push_back(n.get<std::string>());
  std::filesystem::create_directories(ctx.dir());
  if (ctx.format == "csv")
    write_text(ctx.dir() / "report.csv", matrix_to_csv(matrix));
  else
    ctx.write_json("report.json", matrix_to_json(matrix));
  ctx.write_manifest();
}

// --- entry point --------------------------------------------------------------

inline int run_command(const std::vector<std::string>& args) {
  CLI::App app{"model compression and serving-simulation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path, out_dir, format;
  bool seed_set = false;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "JSON config file")->configurable(false);
  app.add_option("--seed", seed, "seed override")->each([&](const std::string&) { seed_set = true; });
  app.add_option("--out", out_dir, "output directory (default: $LIGHTREC_OUT_ROOT/<cmd>-<hash>)");
  app.add_option("--format", format, "report format: csv or json");

  const std::vector<std::string> commands = {"gen-data", "train",    "prune",
                                             "quantize", "pipeline", "distill",
                                             "bench",    "simulate", "report"};
  for (const auto& name : commands) app.add_subcommand(name);

  std::vector<const char*> argv;
  argv.push_back("lightrec");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help() << std::endl;
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << std::endl;
    return 2;
  }

  try {
    RunContext ctx;
    ctx.command = app.get_subcommands().front()->get_name();
    ctx.config = config_path.empty() ? ordered_json::object() : load_config_file(config_path);
    if (seed_set) ctx.config["seed"] = seed;
    if (!format.empty()) {
      if (format != "csv" && format != "json") {
        std::cerr << "usage error: --format must be csv or json" << std::endl;
        return 2;
      }
      ctx.format = format;
    } else {
      ctx.format = ctx.config.value("format", "json");
    }
    ctx.finalize_out_dir(out_dir);

    if (ctx.command == "gen-data")
      cmd_gen_data(ctx);
    else if (ctx.command == "train")
      cmd_train(ctx);
    else if (ctx.command == "prune")
      cmd_prune(ctx);
    else if (ctx.command == "quantize")
      cmd_quantize(ctx);
    else if (ctx.command == "pipeline")
      cmd_pipeline(ctx);
    else if (ctx.command == "distill")
      cmd_distill(ctx);
    else if (ctx.command == "bench")
      cmd_bench(ctx);
    else if (ctx.command == "simulate")
      cmd_simulate(ctx);
    else if (ctx.command == "report")
      cmd_report(ctx);
    std::cout << "ok: " << ctx.dir().string() << std::endl;
    return 0;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << std::endl;
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "usage error: config: " << e.what() << std::endl;
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}

}  // namespace lightrec::cli
