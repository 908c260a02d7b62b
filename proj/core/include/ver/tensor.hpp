// Copyright 2026 The ver-engine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense row-major matrices and the handful of kernels (with hand-written
// adjoints) that the adaptor graph is built from. All kernels are explicitly
// instantiated for float (training/inference) and double (verification).

#ifndef VER_TENSOR_HPP_
#define VER_TENSOR_HPP_

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "ver/errors.hpp"

namespace ver {

template <typename T>
using Vector = std::vector<T>;

template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                           " != " + std::to_string(rows_) + "x" +
                           std::to_string(cols_));
    }
  }
  Matrix(std::initializer_list<std::initializer_list<T>> rows);

  // Same as the data constructor, but rejects NaN/Inf.
  static Matrix checked(std::size_t rows, std::size_t cols, std::vector<T> data);
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool same_shape(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  bool operator==(const Matrix& o) const = default;

  template <typename U>
  Matrix<U> cast() const {
    return Matrix<U>(rows_, cols_, std::vector<U>(data_.begin(), data_.end()));
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

template <typename T>
Matrix<T>::Matrix(std::initializer_list<std::initializer_list<T>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

template <typename T>
Matrix<T> Matrix<T>::checked(std::size_t rows, std::size_t cols, std::vector<T> data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw DegenerateInputError("non-finite value at flat index " + std::to_string(i));
    }
  }
  return Matrix(rows, cols, std::move(data));
}

template <typename T>
Matrix<T> Matrix<T>::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
  return m;
}

// Value/gradient pair used for backprop bookkeeping.
template <typename T>
struct GradPair {
  explicit GradPair(Matrix<T> v)
      : value(std::move(v)), grad(value.rows(), value.cols()) {}
  Matrix<T> value;
  Matrix<T> grad;
};

template <typename T>
bool all_finite(const Matrix<T>& m);
template <typename T>
bool all_finite(std::span<const T> v);

// Sequential per-cell reduction in k order: bit-identical to the naive
// triple loop and independent of thread count.
template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b);
template <typename T>
Matrix<T> transpose(const Matrix<T>& m);
// dst += src, shapes must match.
template <typename T>
void add_inplace(Matrix<T>& dst, const Matrix<T>& src);
template <typename T>
void scale_inplace(Matrix<T>& m, T s);
// Adds a 1 x cols bias to every row.
template <typename T>
void add_row_bias(Matrix<T>& m, const Matrix<T>& bias);
// Column sums as a 1 x cols matrix (bias gradient).
template <typename T>
Matrix<T> column_sums(const Matrix<T>& m);

// Row softmax with max subtraction. Columns at index >= valid_cols receive an
// additive -inf logit and therefore exactly zero probability.
template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& m);
template <typename T>
Matrix<T> masked_softmax_rows(const Matrix<T>& m, std::size_t valid_cols);
// Given y = softmax(x) and dL/dy, returns dL/dx.
template <typename T>
Matrix<T> softmax_rows_backward(const Matrix<T>& y, const Matrix<T>& dy);

template <typename T>
struct LayerNormCache {
  Matrix<T> normalized;  // pre-affine x_hat
  Vector<T> inv_std;
};

template <typename T>
Matrix<T> layer_norm(const Matrix<T>& m, const Matrix<T>& gamma,
                     const Matrix<T>& beta, T eps);
template <typename T>
Matrix<T> layer_norm(const Matrix<T>& m, const Matrix<T>& gamma,
                     const Matrix<T>& beta, T eps, LayerNormCache<T>& cache);
// Accumulates into d_gamma/d_beta and returns dL/dm.
template <typename T>
Matrix<T> layer_norm_backward(const LayerNormCache<T>& cache,
                              const Matrix<T>& gamma, const Matrix<T>& dy,
                              Matrix<T>& d_gamma, Matrix<T>& d_beta);

// tanh-approximated GELU.
template <typename T>
Matrix<T> gelu(const Matrix<T>& m);
template <typename T>
Matrix<T> gelu_backward(const Matrix<T>& x, const Matrix<T>& dy);

template <typename T>
Vector<T> mean_pool(const Matrix<T>& m);
template <typename T>
Matrix<T> mean_pool_backward(std::span<const T> dv, std::size_t rows);

template <typename T>
T dot(std::span<const T> a, std::span<const T> b);
template <typename T>
T l2_norm(std::span<const T> v);
template <typename T>
T cosine_sim(std::span<const T> a, std::span<const T> b);
// Throws DegenerateInputError on a zero vector.
template <typename T>
Vector<T> l2_normalize(std::span<const T> v);
// Adjoint of v -> v/|v| evaluated at the unnormalized input.
template <typename T>
Vector<T> l2_normalize_backward(std::span<const T> input, std::span<const T> dy);

}  // namespace ver

#endif  // VER_TENSOR_HPP_
