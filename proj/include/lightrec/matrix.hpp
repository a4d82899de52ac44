#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "lightrec/errors.hpp"
#include "lightrec/rng.hpp"

namespace lightrec {

// Dense row-major matrix of doubles. The universal value type for weights,
// activations and attention maps.
struct Matrix2D {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix2D() = default;
  Matrix2D(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  Matrix2D(std::initializer_list<std::initializer_list<double>> init) {
    rows = init.size();
    cols = rows ? init.begin()->size() : 0;
    data.reserve(rows * cols);
    for (const auto& row : init) {
      if (row.size() != cols) throw ShapeError("ragged initializer");
      data.insert(data.end(), row.begin(), row.end());
    }
  }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix2D& o) const { return rows == o.rows && cols == o.cols; }

  bool operator==(const Matrix2D& o) const {
    return rows == o.rows && cols == o.cols && data == o.data;
  }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  static Matrix2D zeros(std::size_t r, std::size_t c) { return Matrix2D(r, c); }

  static Matrix2D random_uniform(std::size_t r, std::size_t c, double lo, double hi, Rng& rng) {
    Matrix2D m(r, c);
    for (auto& v : m.data) v = rng.uniform(lo, hi);
    return m;
  }

  static Matrix2D random_normal(std::size_t r, std::size_t c, double mean, double sd, Rng& rng) {
    Matrix2D m(r, c);
    for (auto& v : m.data) v = rng.normal(mean, sd);
    return m;
  }
};

inline bool all_finite(const Matrix2D& m) {
  for (double v : m.data)
    if (!std::isfinite(v)) return false;
  return true;
}

inline std::string shape_str(const Matrix2D& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

// C = A * B. Accumulates in the k-outer order so the inner loop streams rows.
inline Matrix2D matmul(const Matrix2D& a, const Matrix2D& b) {
  if (a.cols != b.rows)
    throw ShapeError("matmul " + shape_str(a) + " * " + shape_str(b));
  Matrix2D c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

inline Matrix2D transpose(const Matrix2D& m) {
  Matrix2D t(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
  return t;
}

inline Matrix2D hadamard(const Matrix2D& a, const Matrix2D& b) {
  if (!a.same_shape(b))
    throw ShapeError("hadamard " + shape_str(a) + " vs " + shape_str(b));
  Matrix2D c(a.rows, a.cols);
  for (std::size_t i = 0; i < a.size(); ++i) c.data[i] = a.data[i] * b.data[i];
  return c;
}

inline void add_inplace(Matrix2D& a, const Matrix2D& b) {
  if (!a.same_shape(b))
    throw ShapeError("add " + shape_str(a) + " vs " + shape_str(b));
  for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
}

inline void scale_inplace(Matrix2D& a, double s) {
  for (auto& v : a.data) v *= s;
}

// Row-wise softmax, stabilized by max subtraction.
inline Matrix2D softmax_rows(const Matrix2D& x) {
  Matrix2D out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* in = x.row(i);
    double* o = out.row(i);
    double mx = in[0];
    for (std::size_t j = 1; j < x.cols; ++j) mx = std::max(mx, in[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (std::size_t j = 0; j < x.cols; ++j) o[j] /= sum;
  }
  return out;
}

inline constexpr double kKlEps = 1e-12;

// Mean over rows of KL(p_row || q_row), natural log. Rows of p and q must be
// probability distributions; terms with p_i = 0 contribute 0 and q is floored
// at kKlEps.
inline double kl_divergence_rows(const Matrix2D& p, const Matrix2D& q,
                                 double row_sum_tol = 1e-6) {
  if (!p.same_shape(q))
    throw ShapeError("kl_divergence_rows " + shape_str(p) + " vs " + shape_str(q));
  if (p.rows == 0) throw DomainError("kl_divergence_rows: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < p.rows; ++i) {
    double ps = 0.0, qs = 0.0, row_kl = 0.0;
    for (std::size_t j = 0; j < p.cols; ++j) {
      const double pv = p(i, j);
      const double qv = q(i, j);
      if (pv < 0.0 || qv < 0.0) throw DomainError("kl_divergence_rows: negative probability");
      ps += pv;
      qs += qv;
      if (pv > 0.0) row_kl += pv * std::log(pv / std::max(qv, kKlEps));
    }
    if (std::abs(ps - 1.0) > row_sum_tol || std::abs(qs - 1.0) > row_sum_tol)
      throw DomainError("kl_divergence_rows: row " + std::to_string(i) + " not normalized");
    total += row_kl;
  }
  return total / static_cast<double>(p.rows);
}

}  // namespace lightrec
