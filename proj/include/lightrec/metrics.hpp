#pragma once

#include <cmath>
#include <vector>

#include "lightrec/dataset.hpp"
#include "lightrec/errors.hpp"
#include "lightrec/model.hpp"

namespace lightrec {

struct EvalResult {
  double hit_rate_at_k = 0.0;
  double ndcg_at_k = 0.0;
  double mrr = 0.0;
};

// 1-based rank of the positive candidate under descending score order, ties
// broken by ascending candidate index (a tied lower index ranks ahead).
inline std::size_t rank_of_positive(const Matrix2D& scores, std::size_t pos_index) {
  const double pos_score = scores(pos_index, 0);
  std::size_t rank = 1;
  for (std::size_t j = 0; j < scores.rows; ++j) {
    if (j == pos_index) continue;
    if (scores(j, 0) > pos_score || (scores(j, 0) == pos_score && j < pos_index)) ++rank;
  }
  return rank;
}

inline EvalResult evaluate(const Model& model, const std::vector<const Event*>& events,
                           std::size_t k) {
  if (events.empty()) throw DomainError("evaluate: empty test set");
  if (k < 1 || k > model.spec.m) throw ConfigError("evaluate: K must be in [1, m]");
  const EffectiveWeights eff = EffectiveWeights::of(model);
  EvalResult result;
  for (const Event* e : events) {
    const Matrix2D scores = score_event(model, eff, e->seq, e->cands);
    const std::size_t rank = rank_of_positive(scores, e->pos_index);
    if (rank <= k) {
      result.hit_rate_at_k += 1.0;
      result.ndcg_at_k += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
    }
    result.mrr += 1.0 / static_cast<double>(rank);
  }
  const double n = static_cast<double>(events.size());
  result.hit_rate_at_k /= n;
  result.ndcg_at_k /= n;
  result.mrr /= n;
  return result;
}

}  // namespace lightrec
