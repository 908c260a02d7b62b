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

#ifndef VER_ATTENTION_HPP_
#define VER_ATTENTION_HPP_

#include <cstddef>
#include <vector>

#include "ver/tensor.hpp"

namespace ver {

// Bias-free projections, each D x D.
template <typename T>
struct AttentionParams {
  Matrix<T> wq, wk, wv, wo;
};

template <typename T>
struct MhaCache {
  Matrix<T> q_in, k_in, v_in;
  Matrix<T> q, k, v;              // projected inputs
  std::vector<Matrix<T>> probs;   // per head, N_q x N_kv
  Matrix<T> context;              // concatenated head outputs, N_q x D
  std::size_t heads = 0;
  std::size_t key_valid_len = 0;
};

// Scaled dot-product multi-head attention with scale 1/sqrt(D/heads). Keys at
// index >= key_valid_len are masked out. Fills `cache` when non-null.
template <typename T>
Matrix<T> mha_forward(const Matrix<T>& q_in, const Matrix<T>& k_in,
                      const Matrix<T>& v_in, const AttentionParams<T>& params,
                      std::size_t heads, std::size_t key_valid_len,
                      MhaCache<T>* cache = nullptr);

// Accumulates parameter gradients into `grads` and input gradients into
// d_q_in / d_k_in / d_v_in (which must already have the input shapes).
template <typename T>
void mha_backward(const MhaCache<T>& cache, const AttentionParams<T>& params,
                  const Matrix<T>& d_out, AttentionParams<T>& grads,
                  Matrix<T>& d_q_in, Matrix<T>& d_k_in, Matrix<T>& d_v_in);

}  // namespace ver

#endif  // VER_ATTENTION_HPP_
