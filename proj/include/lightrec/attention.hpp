#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "lightrec/errors.hpp"
#include "lightrec/matrix.hpp"
#include "lightrec/rng.hpp"

namespace lightrec {

// Configuration for a self-attention block over a user-behavior sequence.
// window_w == 0 selects dense attention; window_w >= 1 selects a causal
// window of that size plus random_g seeded samples outside the window.
// At most one projection structure may be enabled: groups_k > 1 (grouped),
// dw_kernel_c > 0 (depthwise separable, grouped pointwise stage), or
// lowrank_r > 0 (per-head low-rank factorization).
struct AttentionConfig {
  std::size_t l_seq = 1;
  std::size_t d_model = 1;
  std::size_t heads = 1;
  std::size_t n_layers = 1;
  std::size_t groups_k = 1;
  std::size_t lowrank_r = 0;
  std::size_t window_w = 0;
  std::size_t random_g = 0;
  std::size_t dw_kernel_c = 0;
  std::uint64_t seed = 0;

  bool sparse() const { return window_w > 0; }
  std::size_t d_head() const { return d_model / heads; }

  void validate() const {
    if (l_seq < 1 || d_model < 1 || heads < 1 || n_layers < 1)
      throw ConfigError("attention: dims must be >= 1");
    if (d_model % heads != 0) throw ConfigError("attention: d_model not divisible by heads");
    if (groups_k < 1 || d_model % groups_k != 0)
      throw ConfigError("attention: d_model not divisible by groups_k");
    if (lowrank_r > d_head()) throw ConfigError("attention: lowrank_r exceeds d_model/heads");
    if (window_w > l_seq) throw ConfigError("attention: window_w exceeds l_seq");
    if (dw_kernel_c > 0 && dw_kernel_c % 2 == 0)
      throw ConfigError("attention: depthwise kernel size must be odd");
  }
};

// Per-query sorted lists of attended positions. Every query attends to
// itself; list sizes never exceed min(l_seq, window_w + random_g).
struct SparsityPattern {
  std::vector<std::vector<std::size_t>> attended;
};

// Causal window {i-w+1..i} clipped to [0, l_seq), plus random_g distinct
// positions sampled without replacement from outside the window.
inline SparsityPattern build_sparsity_pattern(const AttentionConfig& cfg) {
  cfg.validate();
  if (!cfg.sparse()) throw ConfigError("build_sparsity_pattern: dense config");
  SparsityPattern pattern;
  pattern.attended.resize(cfg.l_seq);
  Rng rng(cfg.seed);
  for (std::size_t i = 0; i < cfg.l_seq; ++i) {
    auto& row = pattern.attended[i];
    const std::size_t lo = i + 1 >= cfg.window_w ? i + 1 - cfg.window_w : 0;
    std::vector<bool> in_window(cfg.l_seq, false);
    for (std::size_t j = lo; j <= i; ++j) {
      row.push_back(j);
      in_window[j] = true;
    }
    const std::size_t outside = cfg.l_seq - row.size();
    const std::size_t draw = std::min(cfg.random_g, outside);
    if (draw > 0) {
      auto extra = rng.sample_distinct(cfg.l_seq, draw, in_window);
      row.insert(row.end(), extra.begin(), extra.end());
    }
    std::sort(row.begin(), row.end());
  }
  return pattern;
}

struct AttentionWeights {
  Matrix2D wq, wk, wv;  // each d_model x d_model
};

// Forward cache for one attention layer: projections, per-head softmax maps
// and their head average (the map knowledge distillation matches).
struct AttentionTrace {
  Matrix2D q, k, v;
  std::vector<Matrix2D> head_maps;  // each l_seq x l_seq, zero outside the pattern
  Matrix2D avg_map;
};

namespace detail {

// Scaled dot-product over an explicit attended set per query. A dense pass
// uses pattern = nullptr (every query attends everywhere); causal restricts
// to j <= i. Identical arithmetic across the dense/causal/sparse paths keeps
// the window-covers-sequence equivalence exact.
inline Matrix2D attend(const Matrix2D& q, const Matrix2D& k, const Matrix2D& v,
                       std::size_t heads, bool causal, const SparsityPattern* pattern,
                       AttentionTrace* trace) {
  const std::size_t l = q.rows;
  const std::size_t d = q.cols;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix2D out(l, d);
  if (trace) {
    trace->head_maps.assign(heads, Matrix2D(l, l));
    trace->avg_map = Matrix2D(l, l);
  }
  std::vector<std::size_t> all(l);
  for (std::size_t j = 0; j < l; ++j) all[j] = j;
  std::vector<double> weights(l);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    for (std::size_t i = 0; i < l; ++i) {
      const std::size_t* idx;
      std::size_t count;
      if (pattern) {
        idx = pattern->attended[i].data();
        count = pattern->attended[i].size();
      } else {
        idx = all.data();
        count = causal ? i + 1 : l;
      }
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < count; ++t) {
        const std::size_t j = idx[t];
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += q(i, off + c) * k(j, off + c);
        weights[t] = s * scale;
        mx = std::max(mx, weights[t]);
      }
      double sum = 0.0;
      for (std::size_t t = 0; t < count; ++t) {
        weights[t] = std::exp(weights[t] - mx);
        sum += weights[t];
      }
      for (std::size_t t = 0; t < count; ++t) {
        const std::size_t j = idx[t];
        const double a = weights[t] / sum;
        if (trace) trace->head_maps[h](i, j) = a;
        for (std::size_t c = 0; c < dh; ++c) out(i, off + c) += a * v(j, off + c);
      }
    }
  }
  if (trace) {
    trace->avg_map = trace->head_maps[0];
    for (std::size_t h = 1; h < heads; ++h) add_inplace(trace->avg_map, trace->head_maps[h]);
    scale_inplace(trace->avg_map, 1.0 / static_cast<double>(heads));
  }
  return out;
}

}  // namespace detail

// Standard multi-head scaled dot-product self-attention. Head outputs are
// concatenated; there is no output projection.
inline Matrix2D attention_full(const Matrix2D& x, const AttentionWeights& w, std::size_t heads,
                               bool causal = false, AttentionTrace* trace = nullptr) {
  if (x.cols != w.wq.rows || w.wq.rows != w.wq.cols || !w.wq.same_shape(w.wk) ||
      !w.wq.same_shape(w.wv))
    throw ShapeError("attention_full: projection shapes");
  if (x.cols % heads != 0) throw ShapeError("attention_full: d_model not divisible by heads");
  Matrix2D q = matmul(x, w.wq);
  Matrix2D k = matmul(x, w.wk);
  Matrix2D v = matmul(x, w.wv);
  Matrix2D out = detail::attend(q, k, v, heads, causal, nullptr, trace);
  if (trace) {
    trace->q = std::move(q);
    trace->k = std::move(k);
    trace->v = std::move(v);
  }
  return out;
}

// Windowed + random sparse attention (causal window). Softmax runs only over
// each query's attended set.
inline std::pair<Matrix2D, SparsityPattern> sparse_attention(const Matrix2D& x,
                                                             const AttentionWeights& w,
                                                             const AttentionConfig& cfg,
                                                             AttentionTrace* trace = nullptr) {
  if (cfg.window_w < 1) throw ConfigError("sparse_attention: window_w must be >= 1");
  SparsityPattern pattern = build_sparsity_pattern(cfg);
  Matrix2D q = matmul(x, w.wq);
  Matrix2D k = matmul(x, w.wk);
  Matrix2D v = matmul(x, w.wv);
  Matrix2D out = detail::attend(q, k, v, cfg.heads, false, &pattern, trace);
  if (trace) {
    trace->q = std::move(q);
    trace->k = std::move(k);
    trace->v = std::move(v);
  }
  return {std::move(out), std::move(pattern)};
}

// Grouped linear transform: channel group g is projected by its own
// (d/k x d/k) matrix. MACs per token: d^2 / k.
inline Matrix2D grouped_projection(const Matrix2D& x, const std::vector<Matrix2D>& weight_groups) {
  const std::size_t k = weight_groups.size();
  if (k == 0 || x.cols % k != 0)
    throw ConfigError("grouped_projection: d_model not divisible by group count");
  const std::size_t gs = x.cols / k;
  Matrix2D out(x.rows, x.cols);
  for (std::size_t g = 0; g < k; ++g) {
    const Matrix2D& wg = weight_groups[g];
    if (wg.rows != gs || wg.cols != gs) throw ShapeError("grouped_projection: group weight shape");
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t a = 0; a < gs; ++a) {
        double acc = 0.0;
        for (std::size_t b = 0; b < gs; ++b) acc += x(i, g * gs + b) * wg(b, a);
        out(i, g * gs + a) = acc;
      }
  }
  return out;
}

// Depthwise 1-D convolution along the sequence (zero padded, odd kernel size)
// followed by a grouped pointwise projection. MACs per token: d*c + d^2/k.
inline Matrix2D depthwise_separable_projection(const Matrix2D& x, const Matrix2D& dw_kernels,
                                               const std::vector<Matrix2D>& pw_groups,
                                               std::size_t c) {
  if (c % 2 == 0 || c == 0) throw ConfigError("depthwise: kernel size must be odd");
  if (dw_kernels.rows != x.cols || dw_kernels.cols != c)
    throw ShapeError("depthwise: kernel shape must be d_model x c");
  const std::size_t half = c / 2;
  Matrix2D mixed(x.rows, x.cols);
  for (std::size_t ch = 0; ch < x.cols; ++ch)
    for (std::size_t t = 0; t < x.rows; ++t) {
      double acc = 0.0;
      for (std::size_t u = 0; u < c; ++u) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + u) - static_cast<std::ptrdiff_t>(half);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(x.rows)) continue;
        acc += dw_kernels(ch, u) * x(static_cast<std::size_t>(src), ch);
      }
      mixed(t, ch) = acc;
    }
  return grouped_projection(mixed, pw_groups);
}

// Each head's projection factored as (x * A_h) * B_h with A_h d x r and
// B_h r x d_head. Returns one l_seq x d_head matrix per head.
inline std::vector<Matrix2D> lowrank_head_projection(const Matrix2D& x,
                                                     const std::vector<Matrix2D>& factors_a,
                                                     const std::vector<Matrix2D>& factors_b) {
  if (factors_a.size() != factors_b.size() || factors_a.empty())
    throw ConfigError("lowrank: factor lists must pair up");
  std::vector<Matrix2D> heads;
  heads.reserve(factors_a.size());
  for (std::size_t h = 0; h < factors_a.size(); ++h) {
    const Matrix2D& a = factors_a[h];
    const Matrix2D& b = factors_b[h];
    if (a.rows != x.cols || a.cols != b.rows) throw ShapeError("lowrank: factor shapes");
    if (a.cols < 1) throw ConfigError("lowrank: rank must be >= 1");
    if (a.cols > b.cols) throw ConfigError("lowrank: rank exceeds head width");
    heads.push_back(matmul(matmul(x, a), b));
  }
  return heads;
}

// Exact MAC counts of the configured attention variant, split into the
// Q/K/V projection term and the score+value term.
struct AttentionMacs {
  std::uint64_t projection = 0;
  std::uint64_t score_value = 0;
  std::uint64_t total() const { return projection + score_value; }
};

inline AttentionMacs attention_macs(const AttentionConfig& cfg) {
  cfg.validate();
  const std::uint64_t l = cfg.l_seq;
  const std::uint64_t d = cfg.d_model;
  std::uint64_t per_token = 0;
  if (cfg.dw_kernel_c > 0) {
    per_token = d * cfg.dw_kernel_c + d * d / cfg.groups_k;
  } else if (cfg.lowrank_r > 0) {
    // H heads, each d*r + r*d_head
    per_token = cfg.heads * (d * cfg.lowrank_r + cfg.lowrank_r * cfg.d_head());
  } else {
    per_token = d * d / cfg.groups_k;
  }
  AttentionMacs macs;
  macs.projection = 3 * l * per_token;
  if (cfg.sparse()) {
    const SparsityPattern pattern = build_sparsity_pattern(cfg);
    std::uint64_t attended = 0;
    for (const auto& row : pattern.attended) attended += row.size();
    macs.score_value = 2 * attended * d;
  } else {
    macs.score_value = 2 * l * l * d;
  }
  macs.projection *= cfg.n_layers;
  macs.score_value *= cfg.n_layers;
  return macs;
}

}  // namespace lightrec
