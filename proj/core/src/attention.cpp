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

#include "ver/attention.hpp"

#include <cmath>
#include <string>

namespace ver {
namespace {

template <typename T>
void check_square(const Matrix<T>& w, std::size_t d, const char* name) {
  if (w.rows() != d || w.cols() != d) {
    throw DimensionError(std::string("attention weight ") + name + " must be " +
                         std::to_string(d) + "x" + std::to_string(d));
  }
}

}  // namespace

template <typename T>
Matrix<T> mha_forward(const Matrix<T>& q_in, const Matrix<T>& k_in,
                      const Matrix<T>& v_in, const AttentionParams<T>& params,
                      std::size_t heads, std::size_t key_valid_len,
                      MhaCache<T>* cache) {
  const std::size_t d = q_in.cols();
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("attention: dim " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (k_in.cols() != d || v_in.cols() != d || k_in.rows() != v_in.rows()) {
    throw DimensionError("attention: key/value shape mismatch");
  }
  check_square(params.wq, d, "wq");
  check_square(params.wk, d, "wk");
  check_square(params.wv, d, "wv");
  check_square(params.wo, d, "wo");
  const std::size_t n_q = q_in.rows(), n_kv = k_in.rows(), dh = d / heads;
  const T scale = T(1) / std::sqrt(T(dh));

  Matrix<T> q = matmul(q_in, params.wq);
  Matrix<T> k = matmul(k_in, params.wk);
  Matrix<T> v = matmul(v_in, params.wv);
  Matrix<T> context(n_q, d);
  std::vector<Matrix<T>> probs;
  probs.reserve(heads);

  Matrix<T> scores(n_q, n_kv);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    for (std::size_t i = 0; i < n_q; ++i) {
      for (std::size_t j = 0; j < n_kv; ++j) {
        T s = 0;
        for (std::size_t c = 0; c < dh; ++c) s += q(i, off + c) * k(j, off + c);
        scores(i, j) = s * scale;
      }
    }
    Matrix<T> p = masked_softmax_rows(scores, key_valid_len);
    for (std::size_t i = 0; i < n_q; ++i) {
      for (std::size_t j = 0; j < key_valid_len; ++j) {
        const T pij = p(i, j);
        for (std::size_t c = 0; c < dh; ++c) context(i, off + c) += pij * v(j, off + c);
      }
    }
    probs.push_back(std::move(p));
  }
  Matrix<T> out = matmul(context, params.wo);

  if (cache) {
    cache->q_in = q_in;
    cache->k_in = k_in;
    cache->v_in = v_in;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->context = std::move(context);
    cache->heads = heads;
    cache->key_valid_len = key_valid_len;
  }
  return out;
}

template <typename T>
void mha_backward(const MhaCache<T>& cache, const AttentionParams<T>& params,
                  const Matrix<T>& d_out, AttentionParams<T>& grads,
                  Matrix<T>& d_q_in, Matrix<T>& d_k_in, Matrix<T>& d_v_in) {
  const std::size_t heads = cache.heads;
  if (heads == 0 || cache.probs.size() != heads ||
      !d_out.same_shape(cache.context) || !d_q_in.same_shape(cache.q_in) ||
      !d_k_in.same_shape(cache.k_in) || !d_v_in.same_shape(cache.v_in) ||
      !params.wo.same_shape(grads.wo)) {
    throw InternalError("mha_backward: cache does not match this forward pass");
  }
  const std::size_t n_q = cache.q.rows(), n_kv = cache.k.rows();
  const std::size_t d = cache.q.cols(), dh = d / heads;
  const T scale = T(1) / std::sqrt(T(dh));

  add_inplace(grads.wo, matmul(transpose(cache.context), d_out));
  const Matrix<T> d_ctx = matmul(d_out, transpose(params.wo));

  Matrix<T> dq(n_q, d), dk(n_kv, d), dv(n_kv, d);
  Matrix<T> dp(n_q, n_kv);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    const Matrix<T>& p = cache.probs[h];
    for (std::size_t i = 0; i < n_q; ++i) {
      for (std::size_t j = 0; j < n_kv; ++j) {
        T s = 0;
        for (std::size_t c = 0; c < dh; ++c) s += d_ctx(i, off + c) * cache.v(j, off + c);
        dp(i, j) = s;
        const T pij = p(i, j);
        for (std::size_t c = 0; c < dh; ++c) dv(j, off + c) += pij * d_ctx(i, off + c);
      }
    }
    const Matrix<T> ds = softmax_rows_backward(p, dp);
    for (std::size_t i = 0; i < n_q; ++i) {
      for (std::size_t j = 0; j < n_kv; ++j) {
        const T g = ds(i, j) * scale;
        if (g == T(0)) continue;
        for (std::size_t c = 0; c < dh; ++c) {
          dq(i, off + c) += g * cache.k(j, off + c);
          dk(j, off + c) += g * cache.q(i, off + c);
        }
      }
    }
  }

  add_inplace(grads.wq, matmul(transpose(cache.q_in), dq));
  add_inplace(grads.wk, matmul(transpose(cache.k_in), dk));
  add_inplace(grads.wv, matmul(transpose(cache.v_in), dv));
  add_inplace(d_q_in, matmul(dq, transpose(params.wq)));
  add_inplace(d_k_in, matmul(dk, transpose(params.wk)));
  add_inplace(d_v_in, matmul(dv, transpose(params.wv)));
}

template Matrix<float> mha_forward<float>(const Matrix<float>&, const Matrix<float>&,
                                          const Matrix<float>&,
                                          const AttentionParams<float>&, std::size_t,
                                          std::size_t, MhaCache<float>*);
template Matrix<double> mha_forward<double>(const Matrix<double>&, const Matrix<double>&,
                                            const Matrix<double>&,
                                            const AttentionParams<double>&, std::size_t,
                                            std::size_t, MhaCache<double>*);
template void mha_backward<float>(const MhaCache<float>&, const AttentionParams<float>&,
                                  const Matrix<float>&, AttentionParams<float>&,
                                  Matrix<float>&, Matrix<float>&, Matrix<float>&);
template void mha_backward<double>(const MhaCache<double>&, const AttentionParams<double>&,
                                   const Matrix<double>&, AttentionParams<double>&,
                                   Matrix<double>&, Matrix<double>&, Matrix<double>&);

}  // namespace ver
