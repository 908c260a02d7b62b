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

#include "ver/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <numeric>
#include <random>

namespace ver {
namespace {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double normal() { return normal_(rng_); }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_);
  }
  // Entries N(0, scale^2 / n) so the vector has expected norm ~scale.
  std::vector<double> gaussian(std::size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    const double s = scale / std::sqrt(double(n));
    for (double& x : v) x = s * normal();
    return v;
  }
  std::vector<double> unit(std::size_t n) {
    std::vector<double> v = gaussian(n);
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
  }
  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::vector<double> normalized(std::vector<double> v) {
  double norm = 0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

Vector<float> to_float(const std::vector<double>& v) { return Vector<float>(v.begin(), v.end()); }

// noisy unit copy of `code`
std::vector<double> jitter(Gen& g, const std::vector<double>& code, double noise) {
  std::vector<double> v = code;
  if (noise > 0) {
    const auto n = g.gaussian(code.size(), noise);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += n[i];
  }
  return normalized(std::move(v));
}

}  // namespace

void SynthSpec::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("synth spec: " + m); };
  if (n_entities < 2) fail("n_entities must be >= 2");
  if (n_seen > n_entities) fail("n_seen exceeds n_entities");
  if (dim == 0 || text_dim == 0 || patches == 0 || tokens == 0) fail("all dims must be >= 1");
  if (code_rank > dim) fail("code_rank exceeds dim");
  if (images_per_entity == 0) fail("images_per_entity must be >= 1");
  if (marker_types < 2) fail("marker_types must be >= 2");
  const std::size_t min_valid = std::max<std::size_t>(1, (3 * tokens) / 4);
  if (effective_informative() > min_valid) {
    fail("informative_tokens exceeds the shortest description (" + std::to_string(min_valid) +
         ")");
  }
  if (query_noise < 0 || image_noise < 0 || patch_noise < 0 || distractor_scale < 0 ||
      pair_separation < 0) {
    fail("noise and scale parameters must be >= 0");
  }
  if (confusable_pairs && n_entities % 2 != 0) fail("confusable pairs need an even n_entities");
}

std::string SynthSpec::to_json() const {
  nlohmann::json j;
  j["n_entities"] = n_entities;
  j["n_seen"] = n_seen;
  j["train_queries_per_entity"] = train_queries_per_entity;
  j["eval_queries_per_entity"] = eval_queries_per_entity;
  j["dim"] = dim;
  j["text_dim"] = text_dim;
  j["patches"] = patches;
  j["tokens"] = tokens;
  j["images_per_entity"] = images_per_entity;
  j["marker_types"] = marker_types;
  j["informative_tokens"] = informative_tokens;
  j["code_rank"] = code_rank;
  j["query_noise"] = query_noise;
  j["image_noise"] = image_noise;
  j["patch_noise"] = patch_noise;
  j["distractor_scale"] = distractor_scale;
  j["confusable_pairs"] = confusable_pairs;
  j["pair_separation"] = pair_separation;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

SynthSpec SynthSpec::from_json(const std::string& text) {
  SynthSpec s;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synth spec: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("synth spec: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "n_entities") s.n_entities = value;
      else if (key == "n_seen") s.n_seen = value;
      else if (key == "train_queries_per_entity") s.train_queries_per_entity = value;
      else if (key == "eval_queries_per_entity") s.eval_queries_per_entity = value;
      else if (key == "dim") s.dim = value;
      else if (key == "text_dim") s.text_dim = value;
      else if (key == "patches") s.patches = value;
      else if (key == "tokens") s.tokens = value;
      else if (key == "images_per_entity") s.images_per_entity = value;
      else if (key == "marker_types") s.marker_types = value;
      else if (key == "informative_tokens") s.informative_tokens = value;
      else if (key == "code_rank") s.code_rank = value;
      else if (key == "query_noise") s.query_noise = value;
      else if (key == "image_noise") s.image_noise = value;
      else if (key == "patch_noise") s.patch_noise = value;
      else if (key == "distractor_scale") s.distractor_scale = value;
      else if (key == "confusable_pairs") s.confusable_pairs = value;
      else if (key == "pair_separation") s.pair_separation = value;
      else if (key == "seed") s.seed = value;
      else throw ConfigError("synth spec: unknown key \"" + key + "\"");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("synth spec: bad value for \"" + key + "\": " + e.what());
    }
  }
  s.validate();
  return s;
}

std::string synth_entity_id(std::size_t e) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "E%05zu", e);
  return buf;
}

SyntheticKb gen_synthetic_kb(const SynthSpec& spec) {
  spec.validate();
  Gen g(spec.seed);
  const std::size_t D = spec.dim, Dt = spec.text_dim, Np = spec.patches, Nt = spec.tokens;
  const std::size_t K = spec.effective_informative();
  const std::size_t min_valid = std::max<std::size_t>(1, (3 * Nt) / 4);

  SyntheticKb kb;
  kb.spec = spec;
  kb.dims = {std::uint32_t(D), std::uint32_t(Dt), std::uint32_t(Nt)};

  // Fixed lift R^D -> R^D_t, scaled so |c L| ~ 1 for unit c.
  std::vector<double> lift(D * Dt);
  for (double& x : lift) x = g.normal() / std::sqrt(double(Dt));
  auto lifted = [&](const std::vector<double>& c, double scale, std::span<float> out) {
    for (std::size_t t = 0; t < Dt; ++t) {
      double s = 0;
      for (std::size_t d = 0; d < D; ++d) s += c[d] * lift[d * Dt + t];
      out[t] += float(scale * s);
    }
  };
  std::vector<std::vector<double>> marker(spec.marker_types);
  for (auto& f : marker) f = g.gaussian(Dt);
  // Patch rows of type k share the unit direction s[k] and add row content
  // that is centered over rows, so mean pooling keeps only s[k].
  std::vector<std::vector<double>> signature(spec.marker_types);
  for (auto& sig : signature) {
    const auto dir = g.unit(D);
    sig = g.gaussian(Np * D, std::sqrt(double(Np)));
    for (std::size_t d = 0; d < D; ++d) {
      double mean = 0;
      for (std::size_t r = 0; r < Np; ++r) mean += sig[r * D + d];
      mean /= double(Np);
      for (std::size_t r = 0; r < Np; ++r) sig[r * D + d] += dir[d] - mean;
    }
  }

  // Codes and distractors span a random code_rank-dimensional subspace.
  const std::size_t rank = spec.effective_code_rank();
  std::vector<double> basis(D * rank);
  for (double& x : basis) x = g.normal();
  auto draw_code = [&]() {
    const auto z = g.gaussian(rank);
    std::vector<double> c(D, 0.0);
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t r = 0; r < rank; ++r) c[d] += basis[d * rank + r] * z[r];
    return normalized(std::move(c));
  };

  const std::size_t n = spec.n_entities;
  kb.codes = Matrix<float>(n, D);
  std::vector<std::vector<double>> codes(n);
  for (std::size_t e = 0; e < n; ++e) {
    if (spec.confusable_pairs) {
      if (e % 2 == 1) continue;
      const auto base = draw_code();
      for (std::size_t m = 0; m < 2; ++m) {
        auto u = draw_code();
        std::vector<double> c(D);
        for (std::size_t d = 0; d < D; ++d) c[d] = base[d] + spec.pair_separation * u[d];
        codes[e + m] = normalized(std::move(c));
      }
    } else {
      codes[e] = draw_code();
    }
  }
  for (std::size_t e = 0; e < n; ++e)
    for (std::size_t d = 0; d < D; ++d) kb.codes(e, d) = float(codes[e][d]);

  // Visual layout (marker type, token positions, patches, pooled vectors)
  // is drawn once per entity, or once per pair in confusable mode.
  struct Layout {
    std::size_t marker;
    std::size_t valid_len;
    std::vector<bool> informative;
    std::vector<Matrix<float>> images;
    std::vector<Vector<float>> pooled;
  };
  auto draw_layout = [&](const std::vector<double>& anchor) {
    Layout l;
    l.marker = g.index(spec.marker_types);
    l.valid_len = min_valid + g.index(Nt - min_valid + 1);
    std::vector<std::size_t> pos(l.valid_len);
    std::iota(pos.begin(), pos.end(), 0);
    std::shuffle(pos.begin(), pos.end(), g.rng());
    l.informative.assign(Nt, false);
    for (std::size_t i = 0; i < K; ++i) l.informative[pos[i]] = true;
    for (std::size_t im = 0; im < spec.images_per_entity; ++im) {
      Matrix<float> p(Np, D);
      const auto noise = g.gaussian(Np * D, spec.patch_noise * std::sqrt(double(Np)));
      for (std::size_t i = 0; i < Np * D; ++i)
        p.values()[i] = float(signature[l.marker][i] + noise[i]);
      l.images.push_back(std::move(p));
      l.pooled.push_back(to_float(jitter(g, anchor, spec.image_noise)));
    }
    return l;
  };

  Layout shared;
  kb.markers.resize(n);
  for (std::size_t e = 0; e < n; ++e) {
    if (!spec.confusable_pairs) {
      shared = draw_layout(codes[e]);
    } else if (e % 2 == 0) {
      // Pooled vectors follow the pair mean, identical for both members.
      std::vector<double> mid(D);
      for (std::size_t d = 0; d < D; ++d) mid[d] = codes[e][d] + codes[e + 1][d];
      shared = draw_layout(normalized(std::move(mid)));
    }
    FeatureBundle b;
    b.entity_id = synth_entity_id(e);
    b.description.tokens = Matrix<float>(Nt, Dt);
    b.description.valid_len = shared.valid_len;
    for (std::size_t t = 0; t < shared.valid_len; ++t) {
      auto row = b.description.tokens.row(t);
      std::size_t mk = shared.marker;
      if (shared.informative[t]) {
        lifted(codes[e], 1.0, row);
      } else {
        lifted(draw_code(), spec.distractor_scale, row);
        mk = (shared.marker + 1 + g.index(spec.marker_types - 1)) % spec.marker_types;
      }
      for (std::size_t d = 0; d < Dt; ++d) row[d] += float(marker[mk][d]);
    }
    b.images = shared.images;
    b.pooled = shared.pooled;
    kb.markers[e] = shared.marker;
    kb.bundles.push_back(std::move(b));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), g.rng());
  kb.seen.assign(order.begin(), order.begin() + std::ptrdiff_t(spec.n_seen));
  std::sort(kb.seen.begin(), kb.seen.end());
  std::vector<bool> is_seen(n, false);
  for (std::size_t e : kb.seen) is_seen[e] = true;

  char buf[64];
  for (std::size_t e : kb.seen) {
    for (std::size_t q = 0; q < spec.train_queries_per_entity; ++q) {
      std::snprintf(buf, sizeof buf, "train-%s-%03zu", synth_entity_id(e).c_str(), q);
      kb.train.push_back({buf, to_float(jitter(g, codes[e], spec.query_noise)),
                          synth_entity_id(e), Split::kSeen});
    }
  }
  for (std::size_t e = 0; e < n; ++e) {
    for (std::size_t q = 0; q < spec.eval_queries_per_entity; ++q) {
      std::snprintf(buf, sizeof buf, "eval-%s-%03zu", synth_entity_id(e).c_str(), q);
      kb.eval.push_back({buf, to_float(jitter(g, codes[e], spec.query_noise)),
                         synth_entity_id(e), is_seen[e] ? Split::kSeen : Split::kUnseen});
    }
  }
  return kb;
}

}  // namespace ver
