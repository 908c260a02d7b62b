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

#include "ver/vgka.hpp"

#include <cmath>
#include <random>

namespace ver {

std::string to_string(AdaptorMode mode) {
  switch (mode) {
    case AdaptorMode::kFull:
      return "full";
    case AdaptorMode::kImageOnly:
      return "image_only";
    case AdaptorMode::kTextOnly:
      return "text_only";
  }
  return "unknown";
}

AdaptorMode adaptor_mode_from_string(const std::string& name) {
  if (name == "full") return AdaptorMode::kFull;
  if (name == "image_only") return AdaptorMode::kImageOnly;
  if (name == "text_only") return AdaptorMode::kTextOnly;
  throw ConfigError("unknown adaptor mode '" + name + "'");
}

std::size_t AdaptorConfig::parameter_count() const {
  const std::size_t d = dim, f = effective_ffn_dim();
  const std::size_t per_block = 4 * d * d       // attention projections
                                + 2 * d * f     // FFN weights
                                + f + d         // FFN biases
                                + 4 * d;        // two layer-norm affine pairs
  return text_dim * d + layers * per_block;
}

void AdaptorConfig::validate() const {
  if (dim == 0 || text_dim == 0) throw ConfigError("adaptor dims must be >= 1");
  if (layers == 0) throw ConfigError("adaptor needs at least one layer");
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("dim " + std::to_string(dim) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (max_tokens == 0) throw ConfigError("max_tokens must be >= 1");
  if (!(ln_eps > 0)) throw ConfigError("ln_eps must be positive");
}

template <typename T>
std::size_t AdaptorParams<T>::parameter_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Matrix<T>& m) { n += m.size(); });
  return n;
}

template <typename T>
AdaptorParams<T> AdaptorParams<T>::zeros_like() const {
  AdaptorParams<T> z = *this;
  z.visit([](const std::string&, Matrix<T>& m) { m.fill(T(0)); });
  return z;
}

template <typename T>
void AdaptorParams<T>::add(const AdaptorParams& other) {
  std::vector<const Matrix<T>*> src;
  other.visit([&](const std::string&, const Matrix<T>& m) { src.push_back(&m); });
  std::size_t i = 0;
  visit([&](const std::string& name, Matrix<T>& m) {
    if (i >= src.size()) throw DimensionError("parameter layout mismatch at " + name);
    add_inplace(m, *src[i++]);
  });
  if (i != src.size()) throw DimensionError("parameter layout mismatch");
}

template <typename T>
void AdaptorParams<T>::scale(T s) {
  visit([&](const std::string&, Matrix<T>& m) { scale_inplace(m, s); });
}

template <typename T>
bool AdaptorParams<T>::operator==(const AdaptorParams& o) const {
  if (!(config == o.config) || blocks.size() != o.blocks.size()) return false;
  std::vector<const Matrix<T>*> a, b;
  visit([&](const std::string&, const Matrix<T>& m) { a.push_back(&m); });
  o.visit([&](const std::string&, const Matrix<T>& m) { b.push_back(&m); });
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(*a[i] == *b[i])) return false;
  return true;
}

template <typename T>
AdaptorParams<T> init_params(const AdaptorConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  auto xavier = [&](std::size_t fan_in, std::size_t fan_out) {
    const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix<T> m(fan_in, fan_out);
    for (T& x : m.values()) x = static_cast<T>(u(rng));
    return m;
  };
  const std::size_t d = config.dim, f = config.effective_ffn_dim();
  AdaptorParams<T> p;
  p.config = config;
  p.config.ffn_dim = f;
  p.w_proj = xavier(config.text_dim, d);
  for (std::size_t l = 0; l < config.layers; ++l) {
    BlockParams<T> b;
    b.ln1_gamma = Matrix<T>(1, d, T(1));
    b.ln1_beta = Matrix<T>(1, d);
    b.attn.wq = xavier(d, d);
    b.attn.wk = xavier(d, d);
    b.attn.wv = xavier(d, d);
    b.attn.wo = xavier(d, d);
    b.ln2_gamma = Matrix<T>(1, d, T(1));
    b.ln2_beta = Matrix<T>(1, d);
    b.ffn_w1 = xavier(d, f);
    b.ffn_b1 = Matrix<T>(1, f);
    b.ffn_w2 = xavier(f, d);
    b.ffn_b2 = Matrix<T>(1, d);
    p.blocks.push_back(std::move(b));
  }
  return p;
}

template <typename T>
Matrix<T> project_tokens(const TokenEmbeddings<T>& text, const AdaptorParams<T>& params) {
  if (text.tokens.cols() != params.w_proj.rows()) {
    throw ConfigError("token width " + std::to_string(text.tokens.cols()) +
                      " != adaptor text_dim " + std::to_string(params.w_proj.rows()));
  }
  return matmul(text.tokens, params.w_proj);
}

namespace {

template <typename T>
void check_inputs(const Matrix<T>& patches, const TokenEmbeddings<T>& text,
                  const AdaptorParams<T>& params) {
  const AdaptorConfig& c = params.config;
  if (patches.rows() == 0) throw DimensionError("adaptor: no patch rows");
  if (patches.cols() != c.dim) {
    throw ConfigError("patch width " + std::to_string(patches.cols()) +
                      " != adaptor dim " + std::to_string(c.dim));
  }
  if (text.valid_len == 0) throw DegenerateInputError("adaptor: description is all padding");
  if (text.valid_len > text.tokens.rows()) {
    throw DimensionError("adaptor: valid_len exceeds token rows");
  }
  if (params.blocks.size() != c.layers) throw InternalError("adaptor: block count != layers");
}

}  // namespace

template <typename T>
Vector<T> adaptor_forward(const Matrix<T>& patches, const TokenEmbeddings<T>& text,
                          const AdaptorParams<T>& params, AdaptorCache<T>* cache) {
  check_inputs(patches, text, params);
  const AdaptorConfig& cfg = params.config;
  const T eps = static_cast<T>(cfg.ln_eps);

  Matrix<T> tokens = cfg.mode == AdaptorMode::kImageOnly
                         ? Matrix<T>(text.tokens.rows(), text.tokens.cols())
                         : text.tokens;
  Matrix<T> projected = project_tokens(TokenEmbeddings<T>{tokens, text.valid_len}, params);

  Vector<T> pooled;
  std::size_t pooled_rows = 0;
  std::vector<BlockCache<T>> block_caches;

  if (cfg.mode == AdaptorMode::kTextOnly) {
    pooled.assign(cfg.dim, T(0));
    for (std::size_t r = 0; r < text.valid_len; ++r) {
      auto row = projected.row(r);
      for (std::size_t c = 0; c < cfg.dim; ++c) pooled[c] += row[c];
    }
    for (T& x : pooled) x /= T(text.valid_len);
    pooled_rows = text.valid_len;
  } else {
    Matrix<T> x = patches;
    for (const auto& b : params.blocks) {
      BlockCache<T> bc;
      Matrix<T> q = layer_norm(x, b.ln1_gamma, b.ln1_beta, eps, bc.ln1);
      Matrix<T> attn = mha_forward(q, projected, projected, b.attn, cfg.heads,
                                   text.valid_len, cache ? &bc.attn : nullptr);
      Matrix<T> mid = x;
      add_inplace(mid, attn);
      Matrix<T> h = layer_norm(mid, b.ln2_gamma, b.ln2_beta, eps, bc.ln2);
      Matrix<T> pre = matmul(h, b.ffn_w1);
      add_row_bias(pre, b.ffn_b1);
      Matrix<T> act = gelu(pre);
      Matrix<T> out = matmul(act, b.ffn_w2);
      add_row_bias(out, b.ffn_b2);
      add_inplace(out, mid);
      if (cache) {
        bc.input = std::move(x);
        bc.mid = std::move(mid);
        bc.ln2_out = std::move(h);
        bc.ffn_pre = std::move(pre);
        bc.ffn_act = std::move(act);
        block_caches.push_back(std::move(bc));
      }
      x = std::move(out);
    }
    pooled = mean_pool(x);
    pooled_rows = x.rows();
  }

  Vector<T> embedding = l2_normalize<T>(pooled);
  if (cache) {
    cache->mode = cfg.mode;
    cache->tokens = std::move(tokens);
    cache->valid_len = text.valid_len;
    cache->projected = std::move(projected);
    cache->blocks = std::move(block_caches);
    cache->pooled_rows = pooled_rows;
    cache->pooled = std::move(pooled);
  }
  return embedding;
}

template <typename T>
void adaptor_backward(const AdaptorCache<T>& cache, const AdaptorParams<T>& params,
                      std::span<const T> d_embedding, AdaptorParams<T>& grads,
                      AdaptorInputGrads<T>* input_grads) {
  const AdaptorConfig& cfg = params.config;
  if (cache.mode != cfg.mode || cache.pooled.size() != d_embedding.size() ||
      grads.blocks.size() != params.blocks.size() ||
      (cfg.mode != AdaptorMode::kTextOnly && cache.blocks.size() != params.blocks.size())) {
    throw InternalError("adaptor_backward: cache does not match this forward pass");
  }
  const Vector<T> d_pooled = l2_normalize_backward<T>(cache.pooled, d_embedding);
  Matrix<T> d_projected(cache.projected.rows(), cache.projected.cols());

  if (cfg.mode == AdaptorMode::kTextOnly) {
    const T inv = T(1) / T(cache.valid_len);
    for (std::size_t r = 0; r < cache.valid_len; ++r)
      for (std::size_t c = 0; c < cfg.dim; ++c) d_projected(r, c) = d_pooled[c] * inv;
    if (input_grads) input_grads->patches = Matrix<T>();
  } else {
    Matrix<T> dx = mean_pool_backward<T>(d_pooled, cache.pooled_rows);
    for (std::size_t l = params.blocks.size(); l-- > 0;) {
      const BlockParams<T>& b = params.blocks[l];
      BlockParams<T>& g = grads.blocks[l];
      const BlockCache<T>& bc = cache.blocks[l];

      // out = mid + W2 gelu(W1 LN2(mid) + b1) + b2
      Matrix<T> d_mid = dx;
      add_inplace(g.ffn_b2, column_sums(dx));
      add_inplace(g.ffn_w2, matmul(transpose(bc.ffn_act), dx));
      Matrix<T> d_act = matmul(dx, transpose(b.ffn_w2));
      Matrix<T> d_pre = gelu_backward(bc.ffn_pre, d_act);
      add_inplace(g.ffn_b1, column_sums(d_pre));
      add_inplace(g.ffn_w1, matmul(transpose(bc.ln2_out), d_pre));
      Matrix<T> d_h = matmul(d_pre, transpose(b.ffn_w1));
      add_inplace(d_mid, layer_norm_backward(bc.ln2, b.ln2_gamma, d_h, g.ln2_gamma, g.ln2_beta));

      // mid = input + MHA(LN1(input), T, T)
      Matrix<T> d_input = d_mid;
      Matrix<T> d_q(bc.input.rows(), bc.input.cols());
      Matrix<T> d_k(d_projected.rows(), d_projected.cols());
      Matrix<T> d_v(d_projected.rows(), d_projected.cols());
      mha_backward(bc.attn, b.attn, d_mid, g.attn, d_q, d_k, d_v);
      add_inplace(d_projected, d_k);
      add_inplace(d_projected, d_v);
      add_inplace(d_input, layer_norm_backward(bc.ln1, b.ln1_gamma, d_q, g.ln1_gamma, g.ln1_beta));
      dx = std::move(d_input);
    }
    if (input_grads) input_grads->patches = std::move(dx);
  }

  add_inplace(grads.w_proj, matmul(transpose(cache.tokens), d_projected));
  if (input_grads) {
    input_grads->tokens = cfg.mode == AdaptorMode::kImageOnly
                              ? Matrix<T>(cache.tokens.rows(), cache.tokens.cols())
                              : matmul(d_projected, transpose(params.w_proj));
  }
}

template <typename T>
Vector<T> embed_query(std::span<const T> pooled_query_feature) {
  return l2_normalize<T>(pooled_query_feature);
}

#define VER_INSTANTIATE_VGKA(T)                                                         \
  template struct AdaptorParams<T>;                                                     \
  template AdaptorParams<T> init_params<T>(const AdaptorConfig&, std::uint64_t);        \
  template Matrix<T> project_tokens<T>(const TokenEmbeddings<T>&, const AdaptorParams<T>&); \
  template Vector<T> adaptor_forward<T>(const Matrix<T>&, const TokenEmbeddings<T>&,    \
                                        const AdaptorParams<T>&, AdaptorCache<T>*);     \
  template void adaptor_backward<T>(const AdaptorCache<T>&, const AdaptorParams<T>&,    \
                                    std::span<const T>, AdaptorParams<T>&,              \
                                    AdaptorInputGrads<T>*);                             \
  template Vector<T> embed_query<T>(std::span<const T>);

VER_INSTANTIATE_VGKA(float)
VER_INSTANTIATE_VGKA(double)

#undef VER_INSTANTIATE_VGKA

}  // namespace ver
