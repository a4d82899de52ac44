#pragma once

#include <cmath>
#include <functional>

#include "lightrec/errors.hpp"
#include "lightrec/matrix.hpp"

namespace lightrec {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t param_index_worst = 0;
};

// Compares an analytic gradient against central differences of loss_fn.
// loss_fn must be deterministic; the relative error per parameter is
// |fd - analytic| / max(denom_floor, |fd| + |analytic|).
inline GradCheckResult finite_difference_grad_check(
    const std::function<double(const Matrix2D&)>& loss_fn, const Matrix2D& params,
    const Matrix2D& analytic_grad, double epsilon, double denom_floor = 1e-6) {
  if (epsilon <= 0.0) throw ConfigError("grad check: epsilon must be > 0");
  if (!params.same_shape(analytic_grad))
    throw ShapeError("grad check: params " + shape_str(params) + " vs grad " +
                     shape_str(analytic_grad));
  GradCheckResult result;
  Matrix2D probe = params;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe.data[i];
    const double h = epsilon * std::max(1.0, std::abs(saved));
    probe.data[i] = saved + h;
    const double up = loss_fn(probe);
    probe.data[i] = saved - h;
    const double down = loss_fn(probe);
    probe.data[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericError("grad check: non-finite loss at parameter " + std::to_string(i));
    const double fd = (up - down) / (2.0 * h);
    const double an = analytic_grad.data[i];
    const double rel = std::abs(fd - an) / std::max(denom_floor, std::abs(fd) + std::abs(an));
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.param_index_worst = i;
    }
  }
  return result;
}

}  // namespace lightrec
