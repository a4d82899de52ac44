#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "lightrec/dataset.hpp"
#include "lightrec/errors.hpp"
#include "lightrec/matrix.hpp"
#include "lightrec/model.hpp"

namespace lightrec {

// Gradient buffers mirroring the trainable parameters of a Model.
struct ModelGrads {
  Matrix2D embedding;
  struct AttnG {
    Matrix2D q, k, v;
  };
  std::vector<AttnG> attn;
  struct LayerG {
    Matrix2D w;
    std::vector<double> b;
  };
  std::vector<LayerG> tower;
  LayerG head;

  static ModelGrads like(const Model& m) {
    ModelGrads g;
    g.embedding = Matrix2D(m.embedding.rows, m.embedding.cols);
    for (const auto& a : m.attn)
      g.attn.push_back({Matrix2D(a.q.w.rows, a.q.w.cols), Matrix2D(a.k.w.rows, a.k.w.cols),
                        Matrix2D(a.v.w.rows, a.v.w.cols)});
    for (const auto& l : m.tower)
      g.tower.push_back({Matrix2D(l.wm.w.rows, l.wm.w.cols),
                         std::vector<double>(l.bias.size(), 0.0)});
    g.head = {Matrix2D(m.head.wm.w.rows, m.head.wm.w.cols),
              std::vector<double>(m.head.bias.size(), 0.0)};
    return g;
  }
};

struct TrainConfig {
  std::size_t epochs = 1;
  double lr = 0.1;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  // knowledge distillation: teacher attention maps supervise the student
  double lambda_kd = 0.0;
  const Model* teacher = nullptr;
  std::vector<std::pair<std::size_t, std::size_t>> layer_map;  // (teacher, student)
  // recompute quantization ranges from current weights at each epoch start
  bool qat_dynamic_range = true;
};

struct TrainHistory {
  std::vector<double> task_loss;  // per-epoch mean
  std::vector<double> kd_loss;    // per-epoch mean (zero when KD disabled)
};

namespace detail_train {

// Softmax cross-entropy over the m candidate scores. Returns the loss and
// writes d(loss)/d(scores), both unscaled.
inline double softmax_ce(const Matrix2D& scores, std::size_t pos, Matrix2D& dscores) {
  Matrix2D probs = softmax_rows(transpose(scores));  // 1 x m
  dscores = Matrix2D(scores.rows, 1);
  for (std::size_t j = 0; j < scores.rows; ++j) dscores(j, 0) = probs(0, j);
  dscores(pos, 0) -= 1.0;
  const double p = std::max(probs(0, pos), 1e-300);
  return -std::log(p);
}

// Backward through one attention layer. dout is the gradient at the layer
// output; dmap (optional) is an extra gradient on the head-averaged map from
// the distillation loss. Returns the gradient at the layer input and
// accumulates projection-weight gradients.
inline Matrix2D attention_backward(const Matrix2D& x_in, const AttentionTrace& at,
                                   const EffectiveWeights::Entry& wq,
                                   const EffectiveWeights::Entry& wk,
                                   const EffectiveWeights::Entry& wv, std::size_t heads,
                                   const Matrix2D& dout, const Matrix2D* dmap,
                                   ModelGrads::AttnG& g) {
  const std::size_t l = x_in.rows;
  const std::size_t d = x_in.cols;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix2D dq(l, d), dk(l, d), dv(l, d);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    const Matrix2D& a = at.head_maps[h];
    // dA = dOut_h V_h^T (+ dmap / H); dV = A^T dOut_h
    Matrix2D da(l, l);
    for (std::size_t i = 0; i < l; ++i)
      for (std::size_t j = 0; j < l; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < dh; ++c) acc += dout(i, off + c) * at.v(j, off + c);
        if (dmap) acc += (*dmap)(i, j) / static_cast<double>(heads);
        da(i, j) = acc;
      }
    for (std::size_t j = 0; j < l; ++j)
      for (std::size_t c = 0; c < dh; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < l; ++i) acc += a(i, j) * dout(i, off + c);
        dv(j, off + c) = acc;
      }
    // softmax rows: dS = A o (dA - rowsum(dA o A)); zero off-pattern since A is
    Matrix2D ds(l, l);
    for (std::size_t i = 0; i < l; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < l; ++j) dot += da(i, j) * a(i, j);
      for (std::size_t j = 0; j < l; ++j) ds(i, j) = a(i, j) * (da(i, j) - dot);
    }
    // dQ_h = dS K_h * scale; dK_h = dS^T Q_h * scale
    for (std::size_t i = 0; i < l; ++i)
      for (std::size_t c = 0; c < dh; ++c) {
        double accq = 0.0;
        for (std::size_t j = 0; j < l; ++j) accq += ds(i, j) * at.k(j, off + c);
        dq(i, off + c) = accq * scale;
      }
    for (std::size_t j = 0; j < l; ++j)
      for (std::size_t c = 0; c < dh; ++c) {
        double acck = 0.0;
        for (std::size_t i = 0; i < l; ++i) acck += ds(i, j) * at.q(i, off + c);
        dk(j, off + c) = acck * scale;
      }
  }
  Matrix2D xt = transpose(x_in);
  add_inplace(g.q, matmul(xt, dq));
  add_inplace(g.k, matmul(xt, dk));
  add_inplace(g.v, matmul(xt, dv));
  Matrix2D dx = matmul(dq, transpose(wq.values));
  add_inplace(dx, matmul(dk, transpose(wk.values)));
  add_inplace(dx, matmul(dv, transpose(wv.values)));
  return dx;
}

}  // namespace detail_train

struct EventLoss {
  double task = 0.0;
  double kd = 0.0;
};

// Loss and gradients for one event. dscale multiplies the task gradient
// (1/batch); kd_scale multiplies the distillation gradient (lambda/batch).
// teacher_maps, when given, pairs (teacher avg map, student attention layer).
inline EventLoss event_loss_and_grads(
    const Model& model, const EffectiveWeights& eff, const Event& event, double dscale,
    double kd_scale, const std::vector<std::pair<Matrix2D, std::size_t>>* teacher_maps,
    ModelGrads* grads) {
  EventTrace trace;
  score_event(model, eff, event.seq, event.cands, &trace);

  EventLoss loss;
  Matrix2D dscores;
  loss.task = detail_train::softmax_ce(trace.scores, event.pos_index, dscores);

  std::vector<Matrix2D> map_grads(model.attn.size());
  if (teacher_maps && !teacher_maps->empty()) {
    const double pair_scale = 1.0 / static_cast<double>(teacher_maps->size());
    for (const auto& [tmap, slayer] : *teacher_maps) {
      const Matrix2D& smap = trace.attn_traces[slayer].avg_map;
      loss.kd += kl_divergence_rows(tmap, smap) * pair_scale;
      if (grads && kd_scale != 0.0) {
        if (map_grads[slayer].size() == 0) map_grads[slayer] = Matrix2D(smap.rows, smap.cols);
        const double row_scale =
            kd_scale * pair_scale / static_cast<double>(smap.rows);
        for (std::size_t i = 0; i < smap.rows; ++i)
          for (std::size_t j = 0; j < smap.cols; ++j) {
            const double p = tmap(i, j);
            const double q = smap(i, j);
            if (p > 0.0 && q > kKlEps) map_grads[slayer](i, j) += -row_scale * p / q;
          }
      }
    }
  }
  if (!grads) return loss;

  scale_inplace(dscores, dscale);
  const std::size_t d_e = model.spec.d_e;
  const std::size_t m = event.cands.size();

  // head
  const Matrix2D& last_act = trace.tower_acts.back();
  add_inplace(grads->head.w, matmul(transpose(last_act), dscores));
  for (std::size_t i = 0; i < m; ++i) grads->head.b[0] += dscores(i, 0);
  Matrix2D dact = matmul(dscores, transpose(eff.head.values));

  // tower, last layer to first
  for (std::size_t l = model.tower.size(); l-- > 0;) {
    const Matrix2D& act = trace.tower_acts[l];
    Matrix2D dz(act.rows, act.cols);
    for (std::size_t i = 0; i < act.size(); ++i)
      dz.data[i] = dact.data[i] * (1.0 - act.data[i] * act.data[i]);
    const Matrix2D& input = l == 0 ? trace.interact : trace.tower_acts[l - 1];
    add_inplace(grads->tower[l].w, matmul(transpose(input), dz));
    for (std::size_t j = 0; j < dz.cols; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < dz.rows; ++i) acc += dz(i, j);
      grads->tower[l].b[j] += acc;
    }
    dact = matmul(dz, transpose(eff.tower[l].values));
  }

  // interaction: interact = cand_emb o pooled (pooled broadcast per row)
  Matrix2D dpooled(1, d_e);
  for (std::size_t i = 0; i < m; ++i) {
    const std::uint32_t id = event.cands[i];
    for (std::size_t j = 0; j < d_e; ++j) {
      grads->embedding(id, j) += dact(i, j) * trace.pooled(0, j);
      dpooled(0, j) += dact(i, j) * trace.cand_emb(i, j);
    }
  }

  // mean pooling over the (attended) sequence representation
  const std::size_t l_seq = trace.seq_emb.rows;
  Matrix2D dx(l_seq, d_e);
  for (std::size_t t = 0; t < l_seq; ++t)
    for (std::size_t j = 0; j < d_e; ++j) dx(t, j) = dpooled(0, j) / static_cast<double>(l_seq);

  // attention stack, last layer to first
  for (std::size_t l = model.attn.size(); l-- > 0;) {
    const Matrix2D* dmap = map_grads[l].size() > 0 ? &map_grads[l] : nullptr;
    dx = detail_train::attention_backward(trace.attn_inputs[l], trace.attn_traces[l],
                                          eff.attn_q[l], eff.attn_k[l], eff.attn_v[l],
                                          model.spec.attention->heads, dx, dmap, grads->attn[l]);
  }
  for (std::size_t t = 0; t < l_seq; ++t)
    for (std::size_t j = 0; j < d_e; ++j) grads->embedding(event.seq[t], j) += dx(t, j);
  return loss;
}

// One SGD update. Pruned positions stay pinned at zero and QAT layers route
// the gradient straight through except where clipping saturated.
inline void sgd_step(Model& model, const EffectiveWeights& eff, const ModelGrads& grads,
                     double lr) {
  for (std::size_t i = 0; i < model.embedding.size(); ++i)
    model.embedding.data[i] -= lr * grads.embedding.data[i];
  auto update = [lr](WeightMatrix& wm, const EffectiveWeights::Entry& entry, const Matrix2D& g) {
    for (std::size_t i = 0; i < wm.w.size(); ++i) {
      double delta = g.data[i];
      if (entry.pass_through) delta *= entry.pass_through->data[i];
      if (wm.mask) delta *= wm.mask->data[i];
      wm.w.data[i] -= lr * delta;
    }
  };
  for (std::size_t l = 0; l < model.attn.size(); ++l) {
    update(model.attn[l].q, eff.attn_q[l], grads.attn[l].q);
    update(model.attn[l].k, eff.attn_k[l], grads.attn[l].k);
    update(model.attn[l].v, eff.attn_v[l], grads.attn[l].v);
  }
  for (std::size_t l = 0; l < model.tower.size(); ++l) {
    update(model.tower[l].wm, eff.tower[l], grads.tower[l].w);
    for (std::size_t j = 0; j < model.tower[l].bias.size(); ++j)
      model.tower[l].bias[j] -= lr * grads.tower[l].b[j];
  }
  update(model.head.wm, eff.head, grads.head.w);
  model.head.bias[0] -= lr * grads.head.b[0];
}

// Mini-batch SGD over the training events. Handles plain task training,
// fine-tuning under masks, QAT (via QuantParams on layers) and distillation
// (via cfg.teacher) in one loop so that seeded runs of the reduced variants
// are bit-identical to the full one with the extras disabled.
inline TrainHistory train_loop(Model& model, const std::vector<const Event*>& train,
                               const TrainConfig& cfg) {
  if (train.empty()) throw DomainError("train_loop: no training events");
  if (cfg.batch_size < 1) throw ConfigError("train_loop: batch_size must be >= 1");
  const bool kd = cfg.lambda_kd > 0.0 && cfg.teacher != nullptr;
  if (kd && cfg.layer_map.empty())
    throw ConfigError("train_loop: KD enabled but layer_map empty");

  EffectiveWeights teacher_eff;
  if (kd) teacher_eff = EffectiveWeights::of(*cfg.teacher);

  TrainHistory history;
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.qat_dynamic_range) {
      for (auto* wm : model.prunable())
        if (wm->qp) *wm->qp = quant_params(wm->w, wm->qp->bits);
    }
    rng.shuffle(order);
    double task_sum = 0.0, kd_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double inv_n = 1.0 / static_cast<double>(end - start);
      const EffectiveWeights eff = EffectiveWeights::of(model);
      ModelGrads grads = ModelGrads::like(model);
      for (std::size_t idx = start; idx < end; ++idx) {
        const Event& event = *train[order[idx]];
        std::vector<std::pair<Matrix2D, std::size_t>> teacher_maps;
        if (kd) {
          EventTrace ttrace;
          score_event(*cfg.teacher, teacher_eff, event.seq, event.cands, &ttrace);
          for (const auto& [tl, sl] : cfg.layer_map)
            teacher_maps.emplace_back(ttrace.attn_traces[tl].avg_map, sl);
        }
        const EventLoss loss =
            event_loss_and_grads(model, eff, event, inv_n, cfg.lambda_kd * inv_n,
                                 kd ? &teacher_maps : nullptr, &grads);
        if (!std::isfinite(loss.task) || !std::isfinite(loss.kd))
          throw NumericError("train_loop: non-finite loss");
        task_sum += loss.task;
        kd_sum += loss.kd;
      }
      sgd_step(model, eff, grads, cfg.lr);
    }
    history.task_loss.push_back(task_sum / static_cast<double>(order.size()));
    history.kd_loss.push_back(kd_sum / static_cast<double>(order.size()));
  }
  return history;
}

inline TrainHistory train_task(Model& model, const Dataset& dataset, std::size_t epochs, double lr,
                               std::uint64_t seed, std::size_t batch_size = 16) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.lr = lr;
  cfg.seed = seed;
  cfg.batch_size = batch_size;
  return train_loop(model, dataset.train_events(), cfg);
}

// --- flat parameter views for gradient checking ---------------------------

inline std::vector<double> flatten_params(const Model& model) {
  std::vector<double> flat(model.embedding.data.begin(), model.embedding.data.end());
  auto push = [&flat](const Matrix2D& m) { flat.insert(flat.end(), m.data.begin(), m.data.end()); };
  for (const auto& a : model.attn) {
    push(a.q.w);
    push(a.k.w);
    push(a.v.w);
  }
  for (const auto& l : model.tower) {
    push(l.wm.w);
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  push(model.head.wm.w);
  flat.insert(flat.end(), model.head.bias.begin(), model.head.bias.end());
  return flat;
}

inline void assign_params(Model& model, const std::vector<double>& flat) {
  std::size_t at = 0;
  auto take = [&](double* dst, std::size_t n) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(at),
              flat.begin() + static_cast<std::ptrdiff_t>(at + n), dst);
    at += n;
  };
  take(model.embedding.data.data(), model.embedding.size());
  for (auto& a : model.attn) {
    take(a.q.w.data.data(), a.q.w.size());
    take(a.k.w.data.data(), a.k.w.size());
    take(a.v.w.data.data(), a.v.w.size());
  }
  for (auto& l : model.tower) {
    take(l.wm.w.data.data(), l.wm.w.size());
    take(l.bias.data(), l.bias.size());
  }
  take(model.head.wm.w.data.data(), model.head.wm.w.size());
  take(model.head.bias.data(), model.head.bias.size());
  if (at != flat.size()) throw ShapeError("assign_params: size mismatch");
}

inline std::vector<double> flatten_grads(const ModelGrads& g) {
  std::vector<double> flat(g.embedding.data.begin(), g.embedding.data.end());
  auto push = [&flat](const Matrix2D& m) { flat.insert(flat.end(), m.data.begin(), m.data.end()); };
  for (const auto& a : g.attn) {
    push(a.q);
    push(a.k);
    push(a.v);
  }
  for (const auto& l : g.tower) {
    push(l.w);
    flat.insert(flat.end(), l.b.begin(), l.b.end());
  }
  push(g.head.w);
  flat.insert(flat.end(), g.head.b.begin(), g.head.b.end());
  return flat;
}

}  // namespace lightrec
