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

#include "ver/tensor.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

namespace ver {
namespace {

std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

template <typename T>
void require_same_shape(const Matrix<T>& a, const Matrix<T>& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape " + shape_str(a.rows(), a.cols()) +
                         " vs " + shape_str(b.rows(), b.cols()));
  }
}

template <typename T>
void require_row_vector(const Matrix<T>& v, std::size_t cols, const char* what) {
  if (v.rows() != 1 || v.cols() != cols) {
    throw DimensionError(std::string(what) + " must be 1x" + std::to_string(cols) +
                         ", got " + shape_str(v.rows(), v.cols()));
  }
}

}  // namespace

template <typename T>
bool all_finite(const Matrix<T>& m) {
  return all_finite<T>(m.values());
}

template <typename T>
bool all_finite(std::span<const T> v) {
  return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
}

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + shape_str(a.rows(), a.cols()) + " x " +
                         shape_str(b.rows(), b.cols()));
  }
  const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
  Matrix<T> c(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    T* out = c.data() + i * m;
    const T* arow = a.data() + i * inner;
    for (std::size_t k = 0; k < inner; ++k) {
      const T aik = arow[k];
      const T* brow = b.data() + k * m;
      for (std::size_t j = 0; j < m; ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

template <typename T>
Matrix<T> transpose(const Matrix<T>& m) {
  Matrix<T> t(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
  return t;
}

template <typename T>
void add_inplace(Matrix<T>& dst, const Matrix<T>& src) {
  require_same_shape(dst, src, "add_inplace");
  T* d = dst.data();
  const T* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

template <typename T>
void scale_inplace(Matrix<T>& m, T s) {
  for (T& x : m.values()) x *= s;
}

template <typename T>
void add_row_bias(Matrix<T>& m, const Matrix<T>& bias) {
  require_row_vector(bias, m.cols(), "bias");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] += bias(0, c);
  }
}

template <typename T>
Matrix<T> column_sums(const Matrix<T>& m) {
  Matrix<T> s(1, m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) s(0, c) += row[c];
  }
  return s;
}

template <typename T>
Matrix<T> masked_softmax_rows(const Matrix<T>& m, std::size_t valid_cols) {
  if (valid_cols == 0 || valid_cols > m.cols()) {
    throw DimensionError("softmax: valid column count " + std::to_string(valid_cols) +
                         " outside [1, " + std::to_string(m.cols()) + "]");
  }
  Matrix<T> out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto in = m.row(r);
    auto o = out.row(r);
    T mx = in[0];
    for (std::size_t c = 1; c < valid_cols; ++c) mx = std::max(mx, in[c]);
    T sum = 0;
    for (std::size_t c = 0; c < valid_cols; ++c) {
      o[c] = std::exp(in[c] - mx);
      sum += o[c];
    }
    const T inv = T(1) / sum;
    for (std::size_t c = 0; c < valid_cols; ++c) o[c] *= inv;
  }
  return out;
}

template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& m) {
  if (m.cols() == 0) return m;
  return masked_softmax_rows(m, m.cols());
}

template <typename T>
Matrix<T> softmax_rows_backward(const Matrix<T>& y, const Matrix<T>& dy) {
  require_same_shape(y, dy, "softmax_backward");
  Matrix<T> dx(y.rows(), y.cols());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto yr = y.row(r);
    auto dyr = dy.row(r);
    T inner = 0;
    for (std::size_t c = 0; c < y.cols(); ++c) inner += yr[c] * dyr[c];
    auto dxr = dx.row(r);
    for (std::size_t c = 0; c < y.cols(); ++c) dxr[c] = yr[c] * (dyr[c] - inner);
  }
  return dx;
}

template <typename T>
Matrix<T> layer_norm(const Matrix<T>& m, const Matrix<T>& gamma,
                     const Matrix<T>& beta, T eps, LayerNormCache<T>& cache) {
  require_row_vector(gamma, m.cols(), "layer_norm gamma");
  require_row_vector(beta, m.cols(), "layer_norm beta");
  if (!(eps > 0)) throw ConfigError("layer_norm eps must be positive");
  const std::size_t n = m.cols();
  cache.normalized = Matrix<T>(m.rows(), n);
  cache.inv_std.assign(m.rows(), T(0));
  Matrix<T> out(m.rows(), n);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto x = m.row(r);
    T mean = 0;
    for (T v : x) mean += v;
    mean /= T(n);
    T var = 0;
    for (T v : x) var += (v - mean) * (v - mean);
    var /= T(n);
    const T inv_std = T(1) / std::sqrt(var + eps);
    cache.inv_std[r] = inv_std;
    auto xh = cache.normalized.row(r);
    auto o = out.row(r);
    for (std::size_t c = 0; c < n; ++c) {
      xh[c] = (x[c] - mean) * inv_std;
      o[c] = gamma(0, c) * xh[c] + beta(0, c);
    }
  }
  return out;
}

template <typename T>
Matrix<T> layer_norm(const Matrix<T>& m, const Matrix<T>& gamma,
                     const Matrix<T>& beta, T eps) {
  LayerNormCache<T> cache;
  return layer_norm(m, gamma, beta, eps, cache);
}

template <typename T>
Matrix<T> layer_norm_backward(const LayerNormCache<T>& cache,
                              const Matrix<T>& gamma, const Matrix<T>& dy,
                              Matrix<T>& d_gamma, Matrix<T>& d_beta) {
  require_same_shape(cache.normalized, dy, "layer_norm_backward");
  const std::size_t n = dy.cols();
  Matrix<T> dx(dy.rows(), n);
  std::vector<T> dxh(n);
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    auto xh = cache.normalized.row(r);
    auto g = dy.row(r);
    T mean_dxh = 0, mean_dxh_xh = 0;
    for (std::size_t c = 0; c < n; ++c) {
      d_gamma(0, c) += g[c] * xh[c];
      d_beta(0, c) += g[c];
      dxh[c] = g[c] * gamma(0, c);
      mean_dxh += dxh[c];
      mean_dxh_xh += dxh[c] * xh[c];
    }
    mean_dxh /= T(n);
    mean_dxh_xh /= T(n);
    auto o = dx.row(r);
    for (std::size_t c = 0; c < n; ++c) {
      o[c] = cache.inv_std[r] * (dxh[c] - mean_dxh - xh[c] * mean_dxh_xh);
    }
  }
  return dx;
}

namespace {
template <typename T>
constexpr T kGeluC = T(0.7978845608028654);  // sqrt(2/pi)
template <typename T>
constexpr T kGeluA = T(0.044715);
}  // namespace

template <typename T>
Matrix<T> gelu(const Matrix<T>& m) {
  Matrix<T> out(m.rows(), m.cols());
  const T* x = m.data();
  T* o = out.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const T u = kGeluC<T> * (x[i] + kGeluA<T> * x[i] * x[i] * x[i]);
    o[i] = T(0.5) * x[i] * (T(1) + std::tanh(u));
  }
  return out;
}

template <typename T>
Matrix<T> gelu_backward(const Matrix<T>& m, const Matrix<T>& dy) {
  require_same_shape(m, dy, "gelu_backward");
  Matrix<T> dx(m.rows(), m.cols());
  const T* x = m.data();
  const T* g = dy.data();
  T* o = dx.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const T u = kGeluC<T> * (x[i] + kGeluA<T> * x[i] * x[i] * x[i]);
    const T t = std::tanh(u);
    const T du = kGeluC<T> * (T(1) + T(3) * kGeluA<T> * x[i] * x[i]);
    o[i] = g[i] * (T(0.5) * (T(1) + t) + T(0.5) * x[i] * (T(1) - t * t) * du);
  }
  return dx;
}

template <typename T>
Vector<T> mean_pool(const Matrix<T>& m) {
  if (m.rows() == 0) throw DimensionError("mean_pool: empty input");
  Vector<T> v(m.cols(), T(0));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) v[c] += row[c];
  }
  const T inv = T(1) / T(m.rows());
  for (T& x : v) x *= inv;
  return v;
}

template <typename T>
Matrix<T> mean_pool_backward(std::span<const T> dv, std::size_t rows) {
  if (rows == 0) throw DimensionError("mean_pool_backward: zero rows");
  Matrix<T> dm(rows, dv.size());
  const T inv = T(1) / T(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = dm.row(r);
    for (std::size_t c = 0; c < dv.size(); ++c) row[c] = dv[c] * inv;
  }
  return dm;
}

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot: length " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  T s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
T l2_norm(std::span<const T> v) {
  return std::sqrt(dot<T>(v, v));
}

template <typename T>
T cosine_sim(std::span<const T> a, std::span<const T> b) {
  const T na = l2_norm<T>(a), nb = l2_norm<T>(b);
  if (na == T(0) || nb == T(0)) throw DegenerateInputError("cosine_sim: zero vector");
  const T c = dot<T>(a, b) / (na * nb);
  return std::clamp(c, T(-1), T(1));
}

template <typename T>
Vector<T> l2_normalize(std::span<const T> v) {
  const T n = l2_norm<T>(v);
  if (!(n > T(0)) || !std::isfinite(n)) {
    throw DegenerateInputError("l2_normalize: zero or non-finite vector");
  }
  Vector<T> out(v.begin(), v.end());
  for (T& x : out) x /= n;
  return out;
}

template <typename T>
Vector<T> l2_normalize_backward(std::span<const T> input, std::span<const T> dy) {
  const T n = l2_norm<T>(input);
  if (!(n > T(0))) throw DegenerateInputError("l2_normalize_backward: zero vector");
  T proj = 0;
  for (std::size_t i = 0; i < input.size(); ++i) proj += input[i] * dy[i];
  proj /= n * n;
  Vector<T> dx(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) dx[i] = (dy[i] - input[i] * proj) / n;
  return dx;
}

#define VER_INSTANTIATE_TENSOR(T)                                                     \
  template bool all_finite<T>(const Matrix<T>&);                                      \
  template bool all_finite<T>(std::span<const T>);                                    \
  template Matrix<T> matmul<T>(const Matrix<T>&, const Matrix<T>&);                   \
  template Matrix<T> transpose<T>(const Matrix<T>&);                                  \
  template void add_inplace<T>(Matrix<T>&, const Matrix<T>&);                         \
  template void scale_inplace<T>(Matrix<T>&, T);                                      \
  template void add_row_bias<T>(Matrix<T>&, const Matrix<T>&);                        \
  template Matrix<T> column_sums<T>(const Matrix<T>&);                                \
  template Matrix<T> softmax_rows<T>(const Matrix<T>&);                               \
  template Matrix<T> masked_softmax_rows<T>(const Matrix<T>&, std::size_t);           \
  template Matrix<T> softmax_rows_backward<T>(const Matrix<T>&, const Matrix<T>&);    \
  template Matrix<T> layer_norm<T>(const Matrix<T>&, const Matrix<T>&,                \
                                   const Matrix<T>&, T);                              \
  template Matrix<T> layer_norm<T>(const Matrix<T>&, const Matrix<T>&,                \
                                   const Matrix<T>&, T, LayerNormCache<T>&);          \
  template Matrix<T> layer_norm_backward<T>(const LayerNormCache<T>&,                 \
                                            const Matrix<T>&, const Matrix<T>&,       \
                                            Matrix<T>&, Matrix<T>&);                  \
  template Matrix<T> gelu<T>(const Matrix<T>&);                                       \
  template Matrix<T> gelu_backward<T>(const Matrix<T>&, const Matrix<T>&);            \
  template Vector<T> mean_pool<T>(const Matrix<T>&);                                  \
  template Matrix<T> mean_pool_backward<T>(std::span<const T>, std::size_t);          \
  template T dot<T>(std::span<const T>, std::span<const T>);                          \
  template T l2_norm<T>(std::span<const T>);                                          \
  template T cosine_sim<T>(std::span<const T>, std::span<const T>);                   \
  template Vector<T> l2_normalize<T>(std::span<const T>);                             \
  template Vector<T> l2_normalize_backward<T>(std::span<const T>, std::span<const T>);

VER_INSTANTIATE_TENSOR(float)
VER_INSTANTIATE_TENSOR(double)

#undef VER_INSTANTIATE_TENSOR

}  // namespace ver
