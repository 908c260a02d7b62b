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

// Retrieval metrics, the silhouette diagnostic and the ablation harness.

#ifndef VER_EVAL_HPP_
#define VER_EVAL_HPP_

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ver/retrieval.hpp"
#include "ver/synth.hpp"
#include "ver/trainer.hpp"

namespace ver {

// 2su / (s + u); 0 when both are 0. Negative inputs throw ConfigError.
double harmonic_mean(double seen, double unseen);

struct EvalReport {
  std::size_t n_seen = 0;
  std::size_t n_unseen = 0;
  std::optional<double> top1_seen;  // absent when the split is empty
  std::optional<double> top1_unseen;
  double top1_overall = 0;
  std::optional<double> hm;  // absent unless both splits are present
  std::vector<std::pair<std::size_t, double>> recall;  // (K, recall@K)
  std::vector<std::string> flags;

  std::string to_json() const;
};

inline const std::vector<std::size_t> kDefaultRecallKs = {1, 5, 10, 20};

// Throws NotFoundError if a ground-truth entity is not in the index.
EvalReport eval_retrieval(const EntityIndex& index, const QuerySet& queries,
                          const std::vector<std::size_t>& ks = kDefaultRecallKs,
                          std::size_t threads = 1);

// Mean silhouette under cosine distance. Samples alone in their cluster
// score 0. Throws ConfigError with fewer than two distinct labels.
double silhouette_score(const Matrix<float>& embeddings, std::span<const std::size_t> labels);

// Points for the eval-set silhouette: every query vector plus every index row
// of an entity that some query targets, labeled by entity ordinal. Throws
// NotFoundError for an unknown ground truth.
std::pair<Matrix<float>, std::vector<std::size_t>> eval_points_with_labels(
    const EntityIndex& index, const QuerySet& queries);

struct AblationConfig {
  std::string name;
  AdaptorMode mode = AdaptorMode::kFull;
  bool cluster = true;
  bool synthetic = true;
};

// image-only, text-only, vanilla, cluster-only, synthetic-only, full.
std::vector<AblationConfig> default_ablation_configs();

struct AblationRow {
  AblationConfig config;
  EvalReport report;
  double silhouette = 0;
  double final_loss = 0;
  std::size_t steps = 0;
};

struct AblationSettings {
  AdaptorConfig adaptor;
  TrainConfig train;
};

// Trains each config from the same initialization on kb.train, embeds every
// entity and evaluates on kb.eval.
std::vector<AblationRow> ablation_run(const SyntheticKb& kb, const AblationSettings& settings,
                                      const std::vector<AblationConfig>& configs);

std::string format_ablation_table(const std::vector<AblationRow>& rows);
std::string ablation_to_json(const std::vector<AblationRow>& rows);

}  // namespace ver

#endif  // VER_EVAL_HPP_
