#include "lightrec/matrix.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "lightrec/rng.hpp"

using namespace lightrec;

namespace {

// Independent oracle: plain i-j-k triple loop.
Matrix2D matmul_naive(const Matrix2D& a, const Matrix2D& b) {
  Matrix2D c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(k, j);
      c(i, j) = acc;
    }
  return c;
}

double max_abs_diff(const Matrix2D& a, const Matrix2D& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data[i] - b.data[i]));
  return d;
}

TEST(Matmul, IdentityCase) {
  Matrix2D eye{{1, 0}, {0, 1}};
  Matrix2D b{{3, 4}, {5, 6}};
  Matrix2D c = matmul(eye, b);
  EXPECT_EQ(c, b);
}

TEST(Matmul, HandComputation) {
  Matrix2D a{{1, 2}};
  Matrix2D b{{3}, {4}};
  Matrix2D c = matmul(a, b);
  ASSERT_EQ(c.rows, 1u);
  ASSERT_EQ(c.cols, 1u);
  EXPECT_DOUBLE_EQ(c(0, 0), 11.0);
}

TEST(Matmul, MatchesBruteForceOracle) {
  Rng rng(7);
  Matrix2D a = Matrix2D::random_normal(5, 7, 0.0, 1.0, rng);
  Matrix2D b = Matrix2D::random_normal(7, 3, 0.0, 1.0, rng);
  EXPECT_LE(max_abs_diff(matmul(a, b), matmul_naive(a, b)), 1e-12);
}

TEST(Matmul, ShapeMismatchThrows) {
  Matrix2D a(2, 3), b(2, 3);
  EXPECT_THROW(matmul(a, b), ShapeError);
}

TEST(Matmul, AssociativityOnRandomTriples) {
  Rng rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix2D a = Matrix2D::random_normal(4, 6, 0.0, 1.0, rng);
    Matrix2D b = Matrix2D::random_normal(6, 5, 0.0, 1.0, rng);
    Matrix2D c = Matrix2D::random_normal(5, 3, 0.0, 1.0, rng);
    Matrix2D left = matmul(matmul(a, b), c);
    Matrix2D right = matmul(a, matmul(b, c));
    double scale = 0.0;
    for (double v : left.data) scale = std::max(scale, std::abs(v));
    EXPECT_LE(max_abs_diff(left, right), 1e-9 * std::max(1.0, scale));
  }
}

TEST(SoftmaxRows, Symmetry) {
  Matrix2D x{{0, 0}};
  Matrix2D s = softmax_rows(x);
  EXPECT_DOUBLE_EQ(s(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(s(0, 1), 0.5);
}

TEST(SoftmaxRows, StabilizedAtLargeMagnitude) {
  Matrix2D x{{1000, 1000}};
  Matrix2D s = softmax_rows(x);
  EXPECT_TRUE(all_finite(s));
  EXPECT_DOUBLE_EQ(s(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(s(0, 1), 0.5);
}

TEST(SoftmaxRows, DirectScalarEvaluation) {
  Matrix2D x{{std::log(1.0), std::log(3.0)}};
  Matrix2D s = softmax_rows(x);
  EXPECT_NEAR(s(0, 0), 0.25, 1e-12);
  EXPECT_NEAR(s(0, 1), 0.75, 1e-12);
}

TEST(SoftmaxRows, RowsSumToOneAtExtremes) {
  Rng rng(3);
  Matrix2D x(20, 9);
  for (auto& v : x.data) v = rng.uniform(-1e6, 1e6);
  Matrix2D s = softmax_rows(x);
  ASSERT_TRUE(all_finite(s));
  for (std::size_t i = 0; i < s.rows; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < s.cols; ++j) {
      EXPECT_GE(s(i, j), 0.0);
      sum += s(i, j);
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(KlDivergence, IdenticalDistributionsAreZero) {
  Matrix2D p{{0.2, 0.3, 0.5}, {0.1, 0.1, 0.8}};
  EXPECT_NEAR(kl_divergence_rows(p, p), 0.0, 1e-15);
}

TEST(KlDivergence, DirectScalarEvaluation) {
  Matrix2D p{{0.5, 0.5}};
  Matrix2D q{{0.25, 0.75}};
  // 0.5*ln2 - 0.5*ln1.5
  EXPECT_NEAR(kl_divergence_rows(p, q), 0.1438, 1e-3);
  EXPECT_NEAR(kl_divergence_rows(p, q), 0.5 * std::log(2.0) - 0.5 * std::log(1.5), 1e-12);
}

TEST(KlDivergence, ZeroProbabilityTermSkipped) {
  Matrix2D p{{1, 0}};
  Matrix2D q{{1, 0}};
  EXPECT_DOUBLE_EQ(kl_divergence_rows(p, q), 0.0);
}

TEST(KlDivergence, ShapeAndDomainErrors) {
  Matrix2D p{{0.5, 0.5}};
  Matrix2D q{{0.2, 0.3, 0.5}};
  EXPECT_THROW(kl_divergence_rows(p, q), ShapeError);
  Matrix2D bad{{0.9, 0.3}};
  EXPECT_THROW(kl_divergence_rows(bad, p), DomainError);
}

TEST(KlDivergence, NonNegativeAndZeroIffEqual) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix2D p(3, 5), q(3, 5);
    for (std::size_t i = 0; i < 3; ++i) {
      double ps = 0.0, qs = 0.0;
      for (std::size_t j = 0; j < 5; ++j) {
        p(i, j) = rng.uniform(1e-3, 1.0);
        q(i, j) = rng.uniform(1e-3, 1.0);
        ps += p(i, j);
        qs += q(i, j);
      }
      for (std::size_t j = 0; j < 5; ++j) {
        p(i, j) /= ps;
        q(i, j) /= qs;
      }
    }
    EXPECT_GE(kl_divergence_rows(p, q), -1e-12);
    EXPECT_GE(kl_divergence_rows(p, p), 0.0);
    EXPECT_NEAR(kl_divergence_rows(p, p), 0.0, 1e-12);
  }
}

}  // namespace
