/*
 * Copyright 2026 The sccvfl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SCCVFL_MATRIX_HPP_
#define SCCVFL_MATRIX_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "sccvfl/error.hpp"

namespace sccvfl {

// Dense row-major double matrix.  All training math in this library is done
// at 64-bit precision; the shapes involved are small enough that naive loops
// (with an ikj inner order for matmul) are sufficient.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, fill) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return Matrix();
    Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (int i = 0; i < m.rows_; ++i) {
      check(static_cast<int>(rows[i].size()) == m.cols_, Error::Kind::kShape, "ragged row list");
      for (int j = 0; j < m.cols_; ++j) m(i, j) = rows[i][j];
    }
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return a_.size(); }
  bool empty() const { return a_.empty(); }

  double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }

  double* data() { return a_.data(); }
  const double* data() const { return a_.data(); }
  double* row(int i) { return a_.data() + static_cast<std::size_t>(i) * cols_; }
  const double* row(int i) const { return a_.data() + static_cast<std::size_t>(i) * cols_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  Matrix& operator+=(const Matrix& o) {
    check(same_shape(o), Error::Kind::kShape, "matrix += shape mismatch");
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
    return *this;
  }

  Matrix& operator-=(const Matrix& o) {
    check(same_shape(o), Error::Kind::kShape, "matrix -= shape mismatch");
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
    return *this;
  }

  Matrix& operator*=(double c) {
    for (double& v : a_) v *= c;
    return *this;
  }

  // Rows selected by index, in order.
  Matrix take_rows(const std::vector<int>& idx) const {
    Matrix out(static_cast<int>(idx.size()), cols_);
    for (int i = 0; i < out.rows_; ++i)
      for (int j = 0; j < cols_; ++j) out(i, j) = (*this)(idx[i], j);
    return out;
  }

  // Columns selected by index, in order.
  Matrix take_cols(const std::vector<int>& idx) const {
    Matrix out(rows_, static_cast<int>(idx.size()));
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < out.cols_; ++j) out(i, j) = (*this)(i, idx[j]);
    return out;
  }

  void put_cols(const std::vector<int>& idx, const Matrix& src) {
    check(src.rows() == rows_ && src.cols() == static_cast<int>(idx.size()), Error::Kind::kShape,
          "put_cols shape mismatch");
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < src.cols(); ++j) (*this)(i, idx[j]) = src(i, j);
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> a_;
};

// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  check(a.cols() == b.rows(), Error::Kind::kShape,
        "matmul inner dimension mismatch: " + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()));
  Matrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b.row(k);
      for (int j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

// C = A^T * B
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  check(a.rows() == b.rows(), Error::Kind::kShape, "matmul_tn dimension mismatch");
  Matrix c(a.cols(), b.cols());
  for (int k = 0; k < a.rows(); ++k) {
    const double* ak = a.row(k);
    const double* bk = b.row(k);
    for (int i = 0; i < a.cols(); ++i) {
      const double aki = ak[i];
      if (aki == 0.0) continue;
      double* ci = c.row(i);
      for (int j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

// C = A * B^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  check(a.cols() == b.cols(), Error::Kind::kShape, "matmul_nt dimension mismatch");
  Matrix c(a.rows(), b.rows());
  for (int i = 0; i < a.rows(); ++i) {
    const double* ai = a.row(i);
    for (int j = 0; j < b.rows(); ++j) {
      const double* bj = b.row(j);
      double s = 0.0;
      for (int k = 0; k < a.cols(); ++k) s += ai[k] * bj[k];
      c(i, j) = s;
    }
  }
  return c;
}

inline Matrix hconcat(const std::vector<Matrix>& parts) {
  check(!parts.empty(), Error::Kind::kShape, "hconcat of nothing");
  int rows = parts[0].rows(), cols = 0;
  for (const Matrix& p : parts) {
    check(p.rows() == rows, Error::Kind::kShape, "hconcat row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  int at = 0;
  for (const Matrix& p : parts) {
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < p.cols(); ++j) out(i, at + j) = p(i, j);
    at += p.cols();
  }
  return out;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  check(a.same_shape(b), Error::Kind::kShape, "max_abs_diff shape mismatch");
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    double d = a.data()[k] - b.data()[k];
    if (d < 0) d = -d;
    if (d > m) m = d;
  }
  return m;
}

inline double squared_distance(const double* x, const double* y, int d) {
  double s = 0.0;
  for (int k = 0; k < d; ++k) {
    const double t = x[k] - y[k];
    s += t * t;
  }
  return s;
}

}  // namespace sccvfl

#endif  // SCCVFL_MATRIX_HPP_
