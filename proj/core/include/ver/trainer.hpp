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

// Contrastive training of the adaptor: query -> entity InfoNCE over in-batch
// negatives, with synthetic hard negatives substituted per query.

#ifndef VER_TRAINER_HPP_
#define VER_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ver/batch_synth.hpp"
#include "ver/kb_store.hpp"
#include "ver/optimizer.hpp"
#include "ver/vgka.hpp"

namespace ver {

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t n_sync = 8;
  double lr = 1e-4;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  bool cluster_batches = true;
  bool detach_synthetics = false;
  bool learn_temperature = true;
  double init_temperature = 0.07;
  double min_temperature = 0.01;
  std::size_t threads = 1;
  // Held-out evaluation cadence in steps; 0 disables it. When enabled the
  // best-scoring parameters are restored at the end (early stopping).
  std::size_t eval_every = 0;
  // Stop after this many evaluations without improvement; 0 never stops.
  std::size_t patience = 0;

  void validate() const;
};

// One query/entity pair. The entity index refers to TrainingCorpus::entities.
struct TrainSample {
  Vector<float> query;  // unit norm
  std::size_t entity = 0;
};

template <typename T>
struct EntityFeatures {
  std::string id;
  Matrix<T> primary_patches;
  TokenEmbeddings<T> text;
};

template <typename T>
struct TrainingCorpus {
  std::vector<EntityFeatures<T>> entities;
  std::vector<TrainSample> samples;
};

// Corpus entities are the distinct ground-truth entities of `queries`, in
// first-appearance order, with descriptions truncated to max_tokens. Throws
// NotFoundError for an id missing from the store.
TrainingCorpus<float> build_training_corpus(const FeatureStore& store, const QuerySet& queries,
                                            std::size_t max_tokens);
TrainingCorpus<float> build_training_corpus(const std::vector<FeatureBundle>& bundles,
                                            const QuerySet& queries, std::size_t max_tokens);

// Resolved minibatch: pointers into a corpus plus the synthetic donors.
template <typename T>
struct TrainBatch {
  std::vector<Vector<T>> queries;
  std::vector<const EntityFeatures<T>*> entities;
  std::vector<std::size_t> entity_ids;  // for false-negative masking
  std::vector<std::vector<std::size_t>> donors;

  std::size_t size() const { return queries.size(); }
};

template <typename T>
struct InfoNceResult {
  T loss = 0;
  Matrix<T> d_queries;  // B x D
  Matrix<T> d_pool;     // rows x D
  T d_temperature = 0;
};

// queries: B x D; pool: candidate entity embeddings; positive[i] and
// negatives[i] index into the pool. Mean over queries of
// -log softmax(sims / tau)[positive].
template <typename T>
InfoNceResult<T> infonce_loss(const Matrix<T>& queries, const Matrix<T>& pool,
                              std::span<const std::size_t> positive,
                              const std::vector<std::vector<std::size_t>>& negatives, T tau);

struct StepStats {
  std::uint64_t step = 0;
  double loss = 0;
  double loss_without_substitution = 0;
  double lr = 0;
  double temperature = 0;
  std::size_t replaced = 0;
  std::size_t negative_slots = 0;
  double replacement_rate = 0;
  double intra_batch_similarity = 0;
  std::size_t batch_size = 0;
};

template <typename T>
struct StepResult {
  T loss = 0;
  T loss_without_substitution = 0;
  AdaptorParams<T> grads;
  T d_log_scale = 0;
  std::vector<HardNegativeSelection> selections;
  std::size_t replaced = 0;
  std::size_t negative_slots = 0;
};

// Forwards positives and synthetics, selects hard negatives (or reuses
// `frozen` selections), and returns the loss with its gradients w.r.t. the
// adaptor parameters and the log logit-scale (tau = exp(-log_scale)).
template <typename T>
StepResult<T> step_gradients(const TrainBatch<T>& batch, const AdaptorParams<T>& params,
                             T log_scale, const TrainConfig& config,
                             const std::vector<HardNegativeSelection>* frozen = nullptr);

template <typename T>
struct TrainState {
  AdaptorParams<T> params;
  T log_scale = 0;
  AdamState<T> optimizer;

  static TrainState initial(const AdaptorConfig& adaptor, const TrainConfig& config);
};

// One optimizer step at the given learning rate. Throws NumericalError with a
// description of the batch if the loss is not finite.
template <typename T>
StepStats train_step(const TrainBatch<T>& batch, TrainState<T>& state, const TrainConfig& config,
                     double lr);

// Batches for every epoch, each a list of sample indices. A round hands each
// training entity one of its unused samples; rounds are packed either by
// query-space clusters or uniformly at random, so a batch never holds two
// samples of the same entity.
std::vector<std::vector<std::vector<std::size_t>>> plan_epochs(
    const std::vector<TrainSample>& samples, std::size_t n_entities, const TrainConfig& config);

template <typename T>
TrainBatch<T> make_batch(const TrainingCorpus<T>& corpus, std::span<const std::size_t> members,
                         std::size_t n_sync, std::uint64_t seed);

struct EvalPoint {
  std::uint64_t step = 0;
  double metric = 0;
};

struct TrainReport {
  std::vector<StepStats> steps;
  std::vector<EvalPoint> evals;
  std::optional<std::uint64_t> best_step;
  std::size_t skipped_samples = 0;
  bool stopped_early = false;
};

struct TrainCallbacks {
  std::function<void(const StepStats&)> on_step;
  // Higher is better.
  std::function<double(const AdaptorParams<float>&)> validate;
};

TrainReport train(const TrainingCorpus<float>& corpus, TrainState<float>& state,
                  const TrainConfig& config, const TrainCallbacks& callbacks = {});

}  // namespace ver

#endif  // VER_TRAINER_HPP_
