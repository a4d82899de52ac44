#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lightrec/errors.hpp"
#include "lightrec/matrix.hpp"
#include "lightrec/model.hpp"
#include "lightrec/train.hpp"

namespace lightrec {

struct DistillConfig {
  double lambda_kd = 1.0;
  // (teacher attention layer -> student attention layer); empty selects the
  // uniform-stride pairing
  std::vector<std::pair<std::size_t, std::size_t>> layer_map;
  std::size_t epochs = 1;
  double lr = 0.1;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
};

// Uniform-stride pairing for a teacher deeper than the student: student layer
// i matches teacher layer ((i+1)*T)/S - 1, so the last layers always pair up.
inline std::vector<std::pair<std::size_t, std::size_t>> uniform_layer_map(
    std::size_t teacher_layers, std::size_t student_layers) {
  if (student_layers > teacher_layers)
    throw ConfigError("layer map: student has more attention layers than teacher");
  std::vector<std::pair<std::size_t, std::size_t>> map;
  for (std::size_t s = 0; s < student_layers; ++s)
    map.emplace_back((s + 1) * teacher_layers / student_layers - 1, s);
  return map;
}

// Mean over paired layers of KL(teacher || student) between attention maps.
inline double kd_loss(const std::vector<Matrix2D>& teacher_maps,
                      const std::vector<Matrix2D>& student_maps) {
  if (teacher_maps.size() != student_maps.size() || teacher_maps.empty())
    throw ShapeError("kd_loss: map lists must pair up");
  double total = 0.0;
  for (std::size_t i = 0; i < teacher_maps.size(); ++i)
    total += kl_divergence_rows(teacher_maps[i], student_maps[i]);
  return total / static_cast<double>(teacher_maps.size());
}

// Trains the student on task loss + lambda * KD loss against the frozen
// teacher's head-averaged attention maps. With lambda_kd == 0 this runs the
// plain task trainer, bit for bit.
inline TrainHistory distill_train(const Model& teacher, Model& student, const Dataset& dataset,
                                  const DistillConfig& cfg) {
  if (cfg.lambda_kd < 0.0) throw ConfigError("distill: lambda_kd must be >= 0");
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.lr = cfg.lr;
  tc.batch_size = cfg.batch_size;
  tc.seed = cfg.seed;
  if (cfg.lambda_kd > 0.0) {
    if (teacher.attn.empty() || student.attn.empty())
      throw ConfigError("distill: both models need attention blocks for map distillation");
    if (teacher.spec.attention->l_seq != student.spec.attention->l_seq)
      throw ConfigError("distill: teacher and student must share l_seq");
    if (count_actual_params(student) >= count_actual_params(teacher))
      throw ConfigError("distill: student must be smaller than teacher");
    tc.lambda_kd = cfg.lambda_kd;
    tc.teacher = &teacher;
    tc.layer_map = cfg.layer_map.empty()
                       ? uniform_layer_map(teacher.attn.size(), student.attn.size())
                       : cfg.layer_map;
    for (const auto& [t, s] : tc.layer_map)
      if (t >= teacher.attn.size() || s >= student.attn.size())
        throw ConfigError("distill: layer_map index out of range");
  }
  return train_loop(student, dataset.train_events(), tc);
}

}  // namespace lightrec
