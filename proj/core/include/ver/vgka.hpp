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

// Vision-guided knowledge adaptor. Frozen description token embeddings are
// projected into the visual space, then a stack of pre-norm cross-attention
// blocks lets the patch features of an entity image pick out the tokens that
// matter. The block outputs are mean-pooled over patch rows and L2-normalized
// into a single entity embedding.
//
//   T   = tokens * w_proj
//   X_0 = patches
//   X_l = X_{l-1} + MHA(LN1(X_{l-1}), T, T)      (padded tokens masked)
//   X_l = X_l + W2 * gelu(W1 * LN2(X_l) + b1) + b2
//   v   = normalize(mean_rows(X_L))

#ifndef VER_VGKA_HPP_
#define VER_VGKA_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ver/attention.hpp"
#include "ver/tensor.hpp"

namespace ver {

// kFull is the adaptor proper. kImageOnly zeroes the description so only the
// patch path survives; kTextOnly skips attention and returns the normalized
// mean of the projected valid tokens. The latter two exist for ablations.
enum class AdaptorMode : std::uint32_t { kFull = 0, kImageOnly = 1, kTextOnly = 2 };

std::string to_string(AdaptorMode mode);
AdaptorMode adaptor_mode_from_string(const std::string& name);

struct AdaptorConfig {
  std::size_t dim = 64;        // D, shared embedding space
  std::size_t text_dim = 96;   // D_t, frozen text-encoder width
  std::size_t layers = 2;
  std::size_t heads = 16;
  std::size_t ffn_dim = 0;     // 0 means 4 * dim
  std::size_t max_tokens = 256;
  double ln_eps = 1e-5;
  AdaptorMode mode = AdaptorMode::kFull;

  std::size_t effective_ffn_dim() const { return ffn_dim ? ffn_dim : 4 * dim; }
  // Closed-form trainable parameter count.
  std::size_t parameter_count() const;
  // Throws ConfigError on inconsistent dims.
  void validate() const;
  bool operator==(const AdaptorConfig&) const = default;
};

template <typename T>
struct BlockParams {
  Matrix<T> ln1_gamma, ln1_beta;
  AttentionParams<T> attn;
  Matrix<T> ln2_gamma, ln2_beta;
  Matrix<T> ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

template <typename T>
struct AdaptorParams {
  AdaptorConfig config;
  Matrix<T> w_proj;
  std::vector<BlockParams<T>> blocks;

  // Visits every tensor in the declared (checkpoint) order.
  template <typename F>
  void visit(F&& f) {
    f(std::string("w_proj"), w_proj);
    for (std::size_t l = 0; l < blocks.size(); ++l) {
      auto& b = blocks[l];
      const std::string p = "block" + std::to_string(l) + ".";
      f(p + "ln1_gamma", b.ln1_gamma);
      f(p + "ln1_beta", b.ln1_beta);
      f(p + "attn.wq", b.attn.wq);
      f(p + "attn.wk", b.attn.wk);
      f(p + "attn.wv", b.attn.wv);
      f(p + "attn.wo", b.attn.wo);
      f(p + "ln2_gamma", b.ln2_gamma);
      f(p + "ln2_beta", b.ln2_beta);
      f(p + "ffn_w1", b.ffn_w1);
      f(p + "ffn_b1", b.ffn_b1);
      f(p + "ffn_w2", b.ffn_w2);
      f(p + "ffn_b2", b.ffn_b2);
    }
  }
  template <typename F>
  void visit(F&& f) const {
    const_cast<AdaptorParams*>(this)->visit(
        [&](const std::string& name, Matrix<T>& m) { f(name, static_cast<const Matrix<T>&>(m)); });
  }

  std::size_t parameter_count() const;
  // Same layout, all zeros (gradient and optimizer-moment buffers).
  AdaptorParams zeros_like() const;
  void add(const AdaptorParams& other);
  void scale(T s);
  bool operator==(const AdaptorParams& o) const;

  template <typename U>
  AdaptorParams<U> cast() const;
};

template <typename T>
template <typename U>
AdaptorParams<U> AdaptorParams<T>::cast() const {
  AdaptorParams<U> out;
  out.config = config;
  out.w_proj = w_proj.template cast<U>();
  for (const auto& b : blocks) {
    BlockParams<U> c;
    c.ln1_gamma = b.ln1_gamma.template cast<U>();
    c.ln1_beta = b.ln1_beta.template cast<U>();
    c.attn = {b.attn.wq.template cast<U>(), b.attn.wk.template cast<U>(),
              b.attn.wv.template cast<U>(), b.attn.wo.template cast<U>()};
    c.ln2_gamma = b.ln2_gamma.template cast<U>();
    c.ln2_beta = b.ln2_beta.template cast<U>();
    c.ffn_w1 = b.ffn_w1.template cast<U>();
    c.ffn_b1 = b.ffn_b1.template cast<U>();
    c.ffn_w2 = b.ffn_w2.template cast<U>();
    c.ffn_b2 = b.ffn_b2.template cast<U>();
    out.blocks.push_back(std::move(c));
  }
  return out;
}

// Description tokens of one entity: N_t_raw x D_t rows, of which only the
// first valid_len are real; the rest is padding.
template <typename T>
struct TokenEmbeddings {
  Matrix<T> tokens;
  std::size_t valid_len = 0;

  template <typename U>
  TokenEmbeddings<U> cast() const {
    return {tokens.template cast<U>(), valid_len};
  }
};

// Gradients w.r.t. the adaptor inputs, filled only when requested.
template <typename T>
struct AdaptorInputGrads {
  Matrix<T> patches;
  Matrix<T> tokens;
};

template <typename T>
struct BlockCache {
  Matrix<T> input;
  LayerNormCache<T> ln1;
  MhaCache<T> attn;
  Matrix<T> mid;  // input + attention
  LayerNormCache<T> ln2;
  Matrix<T> ln2_out;
  Matrix<T> ffn_pre;  // before GELU
  Matrix<T> ffn_act;
};

template <typename T>
struct AdaptorCache {
  AdaptorMode mode = AdaptorMode::kFull;
  Matrix<T> tokens;     // raw inputs as fed (zeroed in image-only mode)
  std::size_t valid_len = 0;
  Matrix<T> projected;  // T_t
  std::vector<BlockCache<T>> blocks;
  std::size_t pooled_rows = 0;
  Vector<T> pooled;  // before normalization
};

template <typename T>
AdaptorParams<T> init_params(const AdaptorConfig& config, std::uint64_t seed);

template <typename T>
Matrix<T> project_tokens(const TokenEmbeddings<T>& text, const AdaptorParams<T>& params);

// Unit-norm entity embedding for one (image, description) pair.
template <typename T>
Vector<T> adaptor_forward(const Matrix<T>& patches, const TokenEmbeddings<T>& text,
                          const AdaptorParams<T>& params, AdaptorCache<T>* cache = nullptr);

// Accumulates dL/dparams into `grads` given dL/d(embedding).
template <typename T>
void adaptor_backward(const AdaptorCache<T>& cache, const AdaptorParams<T>& params,
                      std::span<const T> d_embedding, AdaptorParams<T>& grads,
                      AdaptorInputGrads<T>* input_grads = nullptr);

// Frozen query path: the pooled visual feature, L2-normalized.
template <typename T>
Vector<T> embed_query(std::span<const T> pooled_query_feature);

}  // namespace ver

#endif  // VER_VGKA_HPP_
