#include "lightrec/distill.hpp"

#include <gtest/gtest.h>

#include "lightrec/metrics.hpp"

using namespace lightrec;

namespace {

ModelSpec attn_spec(std::size_t h, std::size_t n_layers, std::size_t d_e = 8) {
  ModelSpec spec;
  spec.d_e = d_e;
  spec.h = h;
  spec.l_net = 2;
  spec.m = 6;
  spec.vocab = 80;
  AttentionConfig att;
  att.l_seq = 8;
  att.d_model = d_e;
  att.heads = 2;
  att.n_layers = n_layers;
  spec.attention = att;
  return spec;
}

Dataset distill_dataset(std::uint64_t seed = 61) {
  return generate_synthetic(24, 80, 8, 6, 6, 8, seed);
}

TEST(KdLoss, IdenticalMapsAreZero) {
  Matrix2D map{{0.2, 0.8}, {0.6, 0.4}};
  EXPECT_DOUBLE_EQ(kd_loss({map}, {map}), 0.0);
}

TEST(KdLoss, HandValue) {
  Matrix2D teacher{{0.5, 0.5}};
  Matrix2D student{{0.25, 0.75}};
  EXPECT_NEAR(kd_loss({teacher}, {student}), 0.1438, 1e-3);
}

TEST(KdLoss, NonNegativeOnRandomPairs) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix2D p(4, 4), q(4, 4);
    for (std::size_t i = 0; i < 4; ++i) {
      double ps = 0, qs = 0;
      for (std::size_t j = 0; j < 4; ++j) {
        p(i, j) = rng.uniform(1e-4, 1.0);
        q(i, j) = rng.uniform(1e-4, 1.0);
        ps += p(i, j);
        qs += q(i, j);
      }
      for (std::size_t j = 0; j < 4; ++j) {
        p(i, j) /= ps;
        q(i, j) /= qs;
      }
    }
    EXPECT_GE(kd_loss({p}, {q}), 0.0);
  }
}

TEST(KdLoss, ZeroIffEqualWithinTolerance) {
  Matrix2D p{{0.3, 0.7}};
  Matrix2D q{{0.3 + 1e-12, 0.7 - 1e-12}};
  EXPECT_NEAR(kd_loss({p}, {q}), 0.0, 1e-9);
  Matrix2D r{{0.31, 0.69}};
  EXPECT_GT(kd_loss({p}, {r}), 1e-5);
}

TEST(KdLoss, ShapeErrors) {
  Matrix2D a(2, 2), b(3, 3);
  a.fill(0.5);
  EXPECT_THROW(kd_loss({a}, {b}), ShapeError);
  EXPECT_THROW(kd_loss({a, a}, {a}), ShapeError);
}

TEST(UniformLayerMap, PairsLastLayers) {
  auto map21 = uniform_layer_map(2, 1);
  ASSERT_EQ(map21.size(), 1u);
  EXPECT_EQ(map21[0], (std::pair<std::size_t, std::size_t>{1, 0}));
  auto map42 = uniform_layer_map(4, 2);
  EXPECT_EQ(map42[0], (std::pair<std::size_t, std::size_t>{1, 0}));
  EXPECT_EQ(map42[1], (std::pair<std::size_t, std::size_t>{3, 1}));
  EXPECT_THROW(uniform_layer_map(1, 2), ConfigError);
}

TEST(DistillTrain, LambdaZeroMatchesPlainTrainerBitwise) {
  Dataset ds = distill_dataset();
  Model teacher = build_model(attn_spec(16, 2), 5);
  Model a = build_model(attn_spec(12, 1), 7);
  Model b = a;
  DistillConfig cfg;
  cfg.lambda_kd = 0.0;
  cfg.epochs = 2;
  cfg.lr = 0.15;
  cfg.seed = 21;
  distill_train(teacher, a, ds, cfg);
  TrainConfig plain;
  plain.epochs = 2;
  plain.lr = 0.15;
  plain.seed = 21;
  train_loop(b, ds.train_events(), plain);
  EXPECT_EQ(a.embedding, b.embedding);
  for (std::size_t l = 0; l < a.attn.size(); ++l) {
    EXPECT_EQ(a.attn[l].q.w, b.attn[l].q.w);
    EXPECT_EQ(a.attn[l].v.w, b.attn[l].v.w);
  }
  EXPECT_EQ(a.head.wm.w, b.head.wm.w);
}

TEST(DistillTrain, KdLossFallsAndTeacherUntouched) {
  Dataset ds = distill_dataset(62);
  Model teacher = build_model(attn_spec(16, 2), 9);
  train_task(teacher, ds, 4, 0.2, 11);
  const Model teacher_before = teacher;

  Model student = build_model(attn_spec(10, 1), 13);
  EXPECT_LT(count_actual_params(student), count_actual_params(teacher));
  DistillConfig cfg;
  cfg.lambda_kd = 1.0;
  cfg.epochs = 6;
  cfg.lr = 0.2;
  cfg.seed = 15;
  TrainHistory history = distill_train(teacher, student, ds, cfg);
  EXPECT_LT(history.kd_loss.back(), history.kd_loss.front());

  EXPECT_EQ(teacher.embedding, teacher_before.embedding);
  for (std::size_t l = 0; l < teacher.attn.size(); ++l) {
    EXPECT_EQ(teacher.attn[l].q.w, teacher_before.attn[l].q.w);
    EXPECT_EQ(teacher.attn[l].k.w, teacher_before.attn[l].k.w);
    EXPECT_EQ(teacher.attn[l].v.w, teacher_before.attn[l].v.w);
  }
  for (std::size_t l = 0; l < teacher.tower.size(); ++l)
    EXPECT_EQ(teacher.tower[l].wm.w, teacher_before.tower[l].wm.w);
  EXPECT_EQ(teacher.head.wm.w, teacher_before.head.wm.w);
}

TEST(DistillTrain, StudentAtSeventyPercentOfTeacher) {
  // "roughly 30% fewer parameters": teacher h=16 l_net=2 vs student sized for
  // ~0.7x the prunable weight count
  Model teacher = build_model(attn_spec(16, 2), 17);
  Model student = build_model(attn_spec(11, 2), 19);
  const double ratio = static_cast<double>(count_actual_params(student)) /
                       static_cast<double>(count_actual_params(teacher));
  EXPECT_NEAR(ratio, 0.7, 0.1);
}

TEST(DistillTrain, RejectsOversizedStudent) {
  Dataset ds = distill_dataset(63);
  Model teacher = build_model(attn_spec(10, 1), 23);
  Model student = build_model(attn_spec(16, 2), 29);
  DistillConfig cfg;
  cfg.lambda_kd = 1.0;
  cfg.epochs = 1;
  EXPECT_THROW(distill_train(teacher, student, ds, cfg), ConfigError);
}

}  // namespace
