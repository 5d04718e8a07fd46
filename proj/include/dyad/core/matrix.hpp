#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dyad/core/common.hpp"

namespace dyad {

// Dense row-major matrix of doubles. Houses every weight, activation and
// gradient array in the toolkit.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix row_vector(std::vector<double> v) {
    Matrix m;
    m.rows_ = 1;
    m.cols_ = v.size();
    m.data_ = std::move(v);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row(std::size_t r) { return data_.data() + r * cols_; }
  const double* row(std::size_t r) const { return data_.data() + r * cols_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  std::string shape_str() const {
    return "(" + std::to_string(rows_) + "," + std::to_string(cols_) + ")";
  }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

inline Matrix identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(),
          "matmul: inner dimensions differ " + a.shape_str() + " x " + b.shape_str());
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = arow[k];
      const double* brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

// C = A * B^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(),
          "matmul_nt: inner dimensions differ " + a.shape_str() + " x " + b.shape_str() + "^T");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* brow = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
      c(i, j) = acc;
    }
  }
  return c;
}

// C = A^T * B
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(),
          "matmul_tn: inner dimensions differ " + a.shape_str() + "^T x " + b.shape_str());
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* arow = a.row(k);
    const double* brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      double* crow = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

inline void add_inplace(Matrix& a, const Matrix& b) {
  require(a.same_shape(b), "add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

inline void scale_inplace(Matrix& a, double s) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] *= s;
}

// Adds a 1 x n bias row to every row of a.
inline void add_row_broadcast(Matrix& a, const Matrix& bias) {
  require(bias.rows() == 1 && bias.cols() == a.cols(),
          "bias: shape mismatch " + bias.shape_str() + " for " + a.shape_str());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* row = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) row[j] += bias[j];
  }
}

// 1 x n column sums (gradient of a broadcast bias).
inline Matrix col_sums(const Matrix& a) {
  Matrix s(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* row = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) s[j] += row[j];
  }
  return s;
}

}  // namespace dyad
