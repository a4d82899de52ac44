#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lightrec/attention.hpp"
#include "lightrec/cost.hpp"
#include "lightrec/errors.hpp"
#include "lightrec/matrix.hpp"
#include "lightrec/quantize.hpp"
#include "lightrec/rng.hpp"

namespace lightrec {

// Architecture hyperparameters. Raw d-dimensional features never enter the
// model directly; items arrive as ids and are looked up in the embedding
// table, so d is carried for reporting only.
struct ModelSpec {
  std::size_t d = 1;
  std::size_t d_e = 1;
  std::size_t h = 1;
  std::size_t l_net = 1;   // hidden layer count: d_e->h then (l_net-1) x (h->h)
  std::size_t m = 1;       // candidate set size
  std::size_t vocab = 1;   // embedding rows (item id space)
  std::uint32_t b_p = 4;   // bytes per parameter
  std::uint32_t b_a = 4;   // bytes per activation
  std::optional<AttentionConfig> attention;

  void validate() const {
    if (d < 1 || d_e < 1 || h < 1 || l_net < 1 || m < 1 || vocab < 1)
      throw ConfigError("ModelSpec: dimensions must be >= 1");
    auto ok_bytes = [](std::uint32_t b) { return b == 1 || b == 2 || b == 4; };
    if (!ok_bytes(b_p) || !ok_bytes(b_a)) throw ConfigError("ModelSpec: b_p/b_a must be 1, 2 or 4");
    if (attention) {
      attention->validate();
      if (attention->d_model != d_e)
        throw ConfigError("ModelSpec: attention d_model must equal d_e");
      // The in-model block uses dense projection matrices; the structured
      // projection variants live as standalone kernels.
      if (attention->groups_k != 1 || attention->lowrank_r != 0 || attention->dw_kernel_c != 0)
        throw ConfigError("ModelSpec: in-model attention requires dense projections");
    }
  }
};

// A weight matrix together with its pruning mask and quantization parameters.
// Masked entries are kept exactly zero in w itself; the mask additionally
// pins their gradients during fine-tuning.
struct WeightMatrix {
  Matrix2D w;
  std::optional<Matrix2D> mask;
  std::optional<QuantParams> qp;

  // Values the forward pass sees: quantized when QuantParams are present.
  Matrix2D effective() const { return qp ? quantize_weights(w, *qp) : w; }

  std::uint64_t retained_count() const {
    if (!mask) return w.size();
    std::uint64_t n = 0;
    for (double v : mask->data) n += v != 0.0 ? 1 : 0;
    return n;
  }
};

struct DenseLayer {
  WeightMatrix wm;
  std::vector<double> bias;
};

struct AttentionLayerParams {
  WeightMatrix q, k, v;
};

// Scoring model: embedding -> optional self-attention over the behavior
// sequence -> mean pooling into a user vector -> elementwise interaction with
// each candidate embedding -> tanh MLP tower -> scalar score per candidate.
struct Model {
  ModelSpec spec;
  Matrix2D embedding;                       // vocab x d_e (exempt from prune/quant)
  std::vector<AttentionLayerParams> attn;   // spec.attention->n_layers entries
  std::vector<DenseLayer> tower;            // l_net entries
  DenseLayer head;                          // h -> 1
  std::optional<SparsityPattern> attn_pattern;  // fixed pattern when attention is sparse
  std::optional<std::uint32_t> act_quant_bits;  // fake-quant tower activations when set

  // All matrices subject to pruning and quantization, in a fixed order.
  std::vector<const WeightMatrix*> prunable() const {
    std::vector<const WeightMatrix*> out;
    for (const auto& a : attn) {
      out.push_back(&a.q);
      out.push_back(&a.k);
      out.push_back(&a.v);
    }
    for (const auto& l : tower) out.push_back(&l.wm);
    out.push_back(&head.wm);
    return out;
  }
  std::vector<WeightMatrix*> prunable() {
    std::vector<WeightMatrix*> out;
    for (auto& a : attn) {
      out.push_back(&a.q);
      out.push_back(&a.k);
      out.push_back(&a.v);
    }
    for (auto& l : tower) out.push_back(&l.wm);
    out.push_back(&head.wm);
    return out;
  }
};

inline Matrix2D glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::size_t rows,
                               std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return Matrix2D::random_uniform(rows, cols, -limit, limit, rng);
}

// Deterministic initialization from a seed. Draw order is fixed: embedding,
// attention layers (q, k, v per layer), tower, head.
inline Model build_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  Model model;
  model.spec = spec;
  model.embedding = Matrix2D::random_uniform(spec.vocab, spec.d_e, -0.5, 0.5, rng);
  if (spec.attention) {
    const auto& cfg = *spec.attention;
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
      AttentionLayerParams p;
      p.q.w = glorot_uniform(cfg.d_model, cfg.d_model, cfg.d_model, cfg.d_model, rng);
      p.k.w = glorot_uniform(cfg.d_model, cfg.d_model, cfg.d_model, cfg.d_model, rng);
      p.v.w = glorot_uniform(cfg.d_model, cfg.d_model, cfg.d_model, cfg.d_model, rng);
      model.attn.push_back(std::move(p));
    }
    if (cfg.sparse()) model.attn_pattern = build_sparsity_pattern(cfg);
  }
  std::size_t in_dim = spec.d_e;
  for (std::size_t l = 0; l < spec.l_net; ++l) {
    DenseLayer layer;
    layer.wm.w = glorot_uniform(in_dim, spec.h, in_dim, spec.h, rng);
    layer.bias.assign(spec.h, 0.0);
    model.tower.push_back(std::move(layer));
    in_dim = spec.h;
  }
  model.head.wm.w = glorot_uniform(spec.h, 1, spec.h, 1, rng);
  model.head.bias.assign(1, 0.0);
  return model;
}

// Tower-only forward: one row of features per candidate, one score per row.
// Pruned weights are zero in place and quantized layers use their quantized
// values, so masks and QuantParams are honored without special casing.
inline Matrix2D forward(const Model& model, const Matrix2D& features) {
  if (features.cols != model.spec.d_e)
    throw ShapeError("forward: features must have d_e columns, got " + shape_str(features));
  Matrix2D act = features;
  for (const auto& layer : model.tower) {
    Matrix2D z = matmul(act, layer.wm.effective());
    for (std::size_t i = 0; i < z.rows; ++i)
      for (std::size_t j = 0; j < z.cols; ++j) z(i, j) = std::tanh(z(i, j) + layer.bias[j]);
    if (model.act_quant_bits) quantize_activations_inplace(z, *model.act_quant_bits);
    act = std::move(z);
  }
  Matrix2D scores = matmul(act, model.head.wm.effective());
  for (std::size_t i = 0; i < scores.rows; ++i) scores(i, 0) += model.head.bias[0];
  if (!all_finite(scores)) throw NumericError("forward: non-finite scores");
  return scores;
}

// Forward cache for one event, retained when gradients or attention maps are
// needed downstream.
struct EventTrace {
  Matrix2D seq_emb;                        // L x d_e
  std::vector<Matrix2D> attn_inputs;       // input to each attention layer
  std::vector<AttentionTrace> attn_traces; // per-layer projections and maps
  Matrix2D pooled;                         // 1 x d_e user vector
  Matrix2D cand_emb;                       // m x d_e
  Matrix2D interact;                       // m x d_e
  std::vector<Matrix2D> tower_acts;        // post-tanh activations per layer
  Matrix2D scores;                         // m x 1
};

// Effective (quantization-resolved) weights for one training step or forward
// pass, plus straight-through masks for QAT backprop.
struct EffectiveWeights {
  struct Entry {
    Matrix2D values;
    std::optional<Matrix2D> pass_through;
  };
  std::vector<Entry> attn_q, attn_k, attn_v;
  std::vector<Entry> tower;
  Entry head;

  static Entry resolve(const WeightMatrix& wm) {
    if (!wm.qp) return {wm.w, std::nullopt};
    FakeQuant fq = fake_quant_forward(wm.w, *wm.qp);
    return {std::move(fq.values), std::move(fq.pass_through)};
  }

  static EffectiveWeights of(const Model& model) {
    EffectiveWeights eff;
    for (const auto& a : model.attn) {
      eff.attn_q.push_back(resolve(a.q));
      eff.attn_k.push_back(resolve(a.k));
      eff.attn_v.push_back(resolve(a.v));
    }
    for (const auto& l : model.tower) eff.tower.push_back(resolve(l.wm));
    eff.head = resolve(model.head.wm);
    return eff;
  }
};

inline Matrix2D embed_rows(const Matrix2D& table, const std::vector<std::uint32_t>& ids) {
  Matrix2D out(ids.size(), table.cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= table.rows) throw DomainError("embed_rows: id out of range");
    for (std::size_t j = 0; j < table.cols; ++j) out(i, j) = table(ids[i], j);
  }
  return out;
}

// Scores the m candidates of one event given the user's behavior sequence.
inline Matrix2D score_event(const Model& model, const EffectiveWeights& eff,
                            const std::vector<std::uint32_t>& seq,
                            const std::vector<std::uint32_t>& cands, EventTrace* trace = nullptr) {
  const std::size_t d_e = model.spec.d_e;
  if (model.spec.attention && seq.size() != model.spec.attention->l_seq)
    throw ShapeError("score_event: sequence length must match attention l_seq");
  if (seq.empty()) throw ShapeError("score_event: empty behavior sequence");
  Matrix2D x = embed_rows(model.embedding, seq);
  if (trace) trace->seq_emb = x;
  for (std::size_t l = 0; l < model.attn.size(); ++l) {
    if (trace) trace->attn_inputs.push_back(x);
    AttentionTrace at;
    Matrix2D q = matmul(x, eff.attn_q[l].values);
    Matrix2D k = matmul(x, eff.attn_k[l].values);
    Matrix2D v = matmul(x, eff.attn_v[l].values);
    const SparsityPattern* pattern =
        model.attn_pattern ? &*model.attn_pattern : nullptr;
    Matrix2D out = detail::attend(q, k, v, model.spec.attention->heads, false, pattern,
                                  trace ? &at : nullptr);
    if (trace) {
      at.q = std::move(q);
      at.k = std::move(k);
      at.v = std::move(v);
      trace->attn_traces.push_back(std::move(at));
    }
    x = std::move(out);
  }
  Matrix2D pooled(1, d_e);
  for (std::size_t t = 0; t < x.rows; ++t)
    for (std::size_t j = 0; j < d_e; ++j) pooled(0, j) += x(t, j);
  scale_inplace(pooled, 1.0 / static_cast<double>(x.rows));

  Matrix2D cand = embed_rows(model.embedding, cands);
  Matrix2D interact(cand.rows, d_e);
  for (std::size_t i = 0; i < cand.rows; ++i)
    for (std::size_t j = 0; j < d_e; ++j) interact(i, j) = cand(i, j) * pooled(0, j);

  Matrix2D act = interact;
  std::vector<Matrix2D> acts;
  for (std::size_t l = 0; l < model.tower.size(); ++l) {
    Matrix2D z = matmul(act, eff.tower[l].values);
    for (std::size_t i = 0; i < z.rows; ++i)
      for (std::size_t j = 0; j < z.cols; ++j) z(i, j) = std::tanh(z(i, j) + model.tower[l].bias[j]);
    if (model.act_quant_bits) quantize_activations_inplace(z, *model.act_quant_bits);
    if (trace) acts.push_back(z);
    act = std::move(z);
  }
  Matrix2D scores = matmul(act, eff.head.values);
  for (std::size_t i = 0; i < scores.rows; ++i) scores(i, 0) += model.head.bias[0];
  if (!all_finite(scores)) throw NumericError("score_event: non-finite scores");
  if (trace) {
    trace->pooled = std::move(pooled);
    trace->cand_emb = std::move(cand);
    trace->interact = std::move(interact);
    trace->tower_acts = std::move(acts);
    trace->scores = scores;
  }
  return scores;
}

inline Matrix2D score_event(const Model& model, const std::vector<std::uint32_t>& seq,
                            const std::vector<std::uint32_t>& cands, EventTrace* trace = nullptr) {
  return score_event(model, EffectiveWeights::of(model), seq, cands, trace);
}

// Retained weight count over the prunable matrices (weights only; biases and
// the embedding table are exempt and reported separately). Where a mask is
// present the mask defines retention, so values that quantization happens to
// snap onto the zero level still count as stored parameters.
inline std::uint64_t count_actual_params(const Model& model) {
  std::uint64_t n = 0;
  for (const auto* wm : model.prunable()) n += wm->retained_count();
  return n;
}

inline std::uint64_t count_embedding_params(const Model& model) {
  return model.embedding.size();
}

inline std::uint64_t count_bias_params(const Model& model) {
  std::uint64_t n = model.head.bias.size();
  for (const auto& l : model.tower) n += l.bias.size();
  return n;
}

// Multiply-accumulates of one m-candidate forward pass, excluding
// multiplications by pruned weights. The tower term is m x retained weights;
// an attention block adds its sequence-level cost with projections counted
// from retained entries.
inline std::uint64_t count_actual_macs(const Model& model) {
  std::uint64_t tower_macs = model.head.wm.retained_count();
  for (const auto& l : model.tower) tower_macs += l.wm.retained_count();
  std::uint64_t macs = model.spec.m * tower_macs;
  if (model.spec.attention) {
    const auto& cfg = *model.spec.attention;
    std::uint64_t proj = 0;
    for (const auto& a : model.attn)
      proj += a.q.retained_count() + a.k.retained_count() + a.v.retained_count();
    macs += cfg.l_seq * proj;  // per token, retained projection weights
    std::uint64_t attended = 0;
    if (model.attn_pattern) {
      for (const auto& row : model.attn_pattern->attended) attended += row.size();
    } else {
      attended = cfg.l_seq * cfg.l_seq;
    }
    macs += 2 * attended * cfg.d_model * model.attn.size();
  }
  return macs;
}

// Per-model cost summary. Storage and parameter memory are accounted per
// layer: quantized layers at their bit width, full-precision layers at 32
// bits (b_p bytes).
inline CostReport cost_report(const Model& model, const CostParams& cp) {
  CostReport report;
  report.params = count_actual_params(model);
  report.flops = count_actual_macs(model);
  report.latency_ms_predicted =
      predict_latency_ms(cp, model.spec.m, model.spec.l_net, model.spec.h);
  std::uint64_t storage = 0, mem = 0;
  for (const auto* wm : model.prunable()) {
    const std::uint64_t retained = wm->retained_count();
    const std::uint32_t bits = wm->qp ? wm->qp->bits : 32;
    storage += retained * bits / 8;
    mem += retained * (wm->qp ? wm->qp->bits / 8 : model.spec.b_p);
  }
  report.storage_bytes = storage;
  report.mem_params_bytes = mem;
  report.mem_act_bytes = memory_footprint(report.params, model.spec.b_p, model.spec.m,
                                          model.spec.h, model.spec.b_a)
                             .mem_act_bytes;
  return report;
}

}  // namespace lightrec
