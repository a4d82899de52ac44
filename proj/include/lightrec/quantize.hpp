#pragma once

#include <cmath>
#include <cstdint>

#include "lightrec/errors.hpp"
#include "lightrec/matrix.hpp"

namespace lightrec {

// Per-layer dynamic-range parameters. The range covers the nonzero weights
// only; step s = (w_max - w_min) / (2^(b-1) - 1), stored as 0 when the range
// is degenerate (all nonzero weights equal).
struct QuantParams {
  std::uint32_t bits = 8;
  double step = 0.0;
  double w_min = 0.0;
  double w_max = 0.0;
};

inline QuantParams quant_params(const Matrix2D& w, std::uint32_t bits) {
  if (bits < 2 || bits > 32) throw ConfigError("quant_params: bits must be in [2, 32]");
  bool any = false;
  double lo = 0.0, hi = 0.0;
  for (double v : w.data) {
    if (v == 0.0) continue;
    if (!any) {
      lo = hi = v;
      any = true;
    } else {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!any) throw ConfigError("quant_params: layer has no nonzero weights");
  QuantParams qp;
  qp.bits = bits;
  qp.w_min = lo;
  qp.w_max = hi;
  const double levels = std::pow(2.0, static_cast<double>(bits - 1)) - 1.0;
  qp.step = hi > lo ? (hi - lo) / levels : 0.0;
  return qp;
}

// Round half away from zero, for cross-platform determinism.
inline double round_half_away(double x) { return std::round(x); }

// Quantize a single nonzero weight. Zeros must be handled by the caller; they
// stay exactly zero so sparsity survives quantization.
inline double quantize_value(double w, const QuantParams& qp) {
  if (qp.step == 0.0) return qp.w_min;
  const double snapped = round_half_away(w / qp.step) * qp.step;
  return std::clamp(snapped, qp.w_min, qp.w_max);
}

inline Matrix2D quantize_weights(const Matrix2D& w, const QuantParams& qp) {
  Matrix2D out(w.rows, w.cols);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double v = w.data[i];
    out.data[i] = v == 0.0 ? 0.0 : quantize_value(v, qp);
  }
  return out;
}

// Forward values for QAT plus the straight-through mask: pass_through = 1
// where the gradient flows to the underlying full-precision weight, 0 where
// clipping saturated (pre-clip value fell outside [w_min, w_max]).
struct FakeQuant {
  Matrix2D values;
  Matrix2D pass_through;
};

inline FakeQuant fake_quant_forward(const Matrix2D& w, const QuantParams& qp) {
  FakeQuant fq{Matrix2D(w.rows, w.cols), Matrix2D(w.rows, w.cols)};
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double v = w.data[i];
    if (v == 0.0) {
      fq.values.data[i] = 0.0;
      fq.pass_through.data[i] = 1.0;
      continue;
    }
    if (qp.step == 0.0) {
      fq.values.data[i] = qp.w_min;
      fq.pass_through.data[i] = 1.0;
      continue;
    }
    const double snapped = round_half_away(v / qp.step) * qp.step;
    const bool saturated = snapped < qp.w_min || snapped > qp.w_max;
    fq.values.data[i] = std::clamp(snapped, qp.w_min, qp.w_max);
    fq.pass_through.data[i] = saturated ? 0.0 : 1.0;
  }
  return fq;
}

// Per-tensor dynamic-range fake quantization for activations: the range is
// observed from the tensor itself on every call, so clipping never saturates
// and gradients pass straight through unchanged.
inline void quantize_activations_inplace(Matrix2D& x, std::uint32_t bits) {
  if (bits < 2 || bits > 32) throw ConfigError("activation quant: bits must be in [2, 32]");
  if (x.size() == 0) return;
  double lo = x.data[0], hi = x.data[0];
  for (double v : x.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == lo) return;
  const double levels = std::pow(2.0, static_cast<double>(bits - 1)) - 1.0;
  const double step = (hi - lo) / levels;
  for (auto& v : x.data) v = std::clamp(round_half_away(v / step) * step, lo, hi);
}

}  // namespace lightrec
