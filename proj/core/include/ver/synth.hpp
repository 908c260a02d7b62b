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

// Synthetic knowledge base with a planted compositional signal.
//
// Every entity e has a unit code c_e in R^D, drawn from a fixed random
// subspace of dimension code_rank, and a marker type k_e. Its
// description holds `informative_tokens` rows of the form c_e * L + f[k_e]
// (L a fixed random lift R^D -> R^D_t, f[k] a marker vector per type) among
// distractor rows s * d * L + f[k'] with d a fresh random code and k' != k_e. Patch
// features of every image of e carry the visual signature of k_e, so patches
// tell the adaptor which tokens to read. Queries and pooled image vectors are
// noisy copies of c_e. A linear read-out of the marked tokens recovers c_e for
// any entity, seen in training or not.
//
// In confusable-pairs mode entities come in pairs that share patches, marker
// type, informative positions and pooled image vectors, and differ only in
// their codes (and hence in their descriptions).

#ifndef VER_SYNTH_HPP_
#define VER_SYNTH_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ver/kb_store.hpp"

namespace ver {

struct SynthSpec {
  std::size_t n_entities = 256;
  std::size_t n_seen = 64;
  std::size_t train_queries_per_entity = 20;
  std::size_t eval_queries_per_entity = 2;
  std::size_t dim = 64;
  std::size_t text_dim = 96;
  std::size_t patches = 16;
  std::size_t tokens = 32;
  std::size_t images_per_entity = 2;
  std::size_t marker_types = 4;
  std::size_t informative_tokens = 0;  // 0 means tokens / 4
  std::size_t code_rank = 16;          // 0 means dim
  double query_noise = 0.3;
  double image_noise = 0.3;
  double patch_noise = 0.3;
  double distractor_scale = 2.0;
  bool confusable_pairs = false;
  double pair_separation = 0.6;
  std::uint64_t seed = 7;

  std::size_t effective_informative() const {
    return informative_tokens ? informative_tokens : std::max<std::size_t>(1, tokens / 4);
  }
  std::size_t effective_code_rank() const { return code_rank ? code_rank : dim; }
  // Throws ConfigError on infeasible settings.
  void validate() const;
  std::string to_json() const;
  // Unknown keys are rejected.
  static SynthSpec from_json(const std::string& text);
};

struct SyntheticKb {
  SynthSpec spec;
  StoreDims dims;
  std::vector<FeatureBundle> bundles;
  std::vector<std::size_t> markers;  // marker type per entity
  Matrix<float> codes;               // n_entities x D
  std::vector<std::size_t> seen;     // entity indices used for training
  QuerySet train;
  QuerySet eval;
};

std::string synth_entity_id(std::size_t e);

// Deterministic given spec.seed.
SyntheticKb gen_synthetic_kb(const SynthSpec& spec);

}  // namespace ver

#endif  // VER_SYNTH_HPP_
