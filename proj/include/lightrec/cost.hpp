#pragma once

#include <cstdint>

#include "lightrec/errors.hpp"

namespace lightrec {

// Latency law coefficients: tau = alpha * m * L_net * h^2 + beta, in ms.
struct CostParams {
  double alpha_ms_per_mac = 1e-6;
  double beta_ms = 0.0;

  void validate() const {
    if (alpha_ms_per_mac <= 0.0) throw ConfigError("CostParams: alpha must be > 0");
    if (beta_ms < 0.0) throw ConfigError("CostParams: beta must be >= 0");
  }
};

struct CostReport {
  std::uint64_t params = 0;             // retained weights of the compressible matrices
  std::uint64_t flops = 0;              // MACs of one m-candidate forward pass
  double latency_ms_predicted = 0.0;
  std::uint64_t mem_params_bytes = 0;
  std::uint64_t mem_act_bytes = 0;
  std::uint64_t storage_bytes = 0;      // sum over layers of retained * bits/8
};

// Weight count of the MLP chain d_e->h, (L_net-1) x (h->h), h->1. Weights only.
inline std::uint64_t param_count_formula(std::uint64_t d_e, std::uint64_t h,
                                         std::uint64_t l_net) {
  if (d_e < 1 || h < 1 || l_net < 1) throw ConfigError("param_count_formula: dims must be >= 1");
  return d_e * h + (l_net - 1) * h * h + h;
}

// MACs of one batch over m candidates; one MAC counted per weight product.
inline std::uint64_t flops_formula(std::uint64_t m, std::uint64_t d_e, std::uint64_t h,
                                   std::uint64_t l_net) {
  if (m < 1) throw ConfigError("flops_formula: m must be >= 1");
  return m * param_count_formula(d_e, h, l_net);
}

inline double predict_latency_ms(const CostParams& cp, std::uint64_t m, std::uint64_t l_net,
                                 std::uint64_t h) {
  cp.validate();
  return cp.alpha_ms_per_mac * static_cast<double>(m * l_net * h * h) + cp.beta_ms;
}

struct MemoryFootprint {
  std::uint64_t mem_params_bytes = 0;
  std::uint64_t mem_act_bytes = 0;
};

inline MemoryFootprint memory_footprint(std::uint64_t params, std::uint64_t b_p, std::uint64_t m,
                                        std::uint64_t h, std::uint64_t b_a) {
  return {params * b_p, m * h * b_a};
}

inline std::uint64_t model_storage_bytes(std::uint64_t params_retained, std::uint64_t bits) {
  if (bits != 8 && bits != 16 && bits != 32)
    throw ConfigError("model_storage_bytes: bits must be 8, 16 or 32");
  return params_retained * bits / 8;
}

}  // namespace lightrec
