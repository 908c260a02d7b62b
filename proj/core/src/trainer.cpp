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

#include "ver/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "ver/parallel.hpp"
#include "ver/seed.hpp"

namespace ver {
namespace {

// Gradient accumulation happens in fixed groups of passes so the reduction
// order, and hence the result, does not depend on the thread count.
constexpr std::size_t kPassesPerGroup = 8;

template <typename T>
struct Pass {
  const Matrix<T>* patches;
  const TokenEmbeddings<T>* text;
  bool synthetic;
};

template <typename T>
bool row_is_zero(const Matrix<T>& m, std::size_t r) {
  for (T x : m.row(r))
    if (x != T(0)) return false;
  return true;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (n_sync > batch_size - 1) {
    throw ConfigError("n_sync=" + std::to_string(n_sync) + " exceeds batch_size - 1 = " +
                      std::to_string(batch_size - 1));
  }
  if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("lr must be > 0");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (!(init_temperature > 0) || !(min_temperature > 0)) {
    throw ConfigError("temperatures must be > 0");
  }
  if (init_temperature < min_temperature) {
    throw ConfigError("init_temperature below min_temperature");
  }
  if (threads == 0) throw ConfigError("threads must be >= 1");
}

namespace {

TrainingCorpus<float> corpus_from(const std::function<std::optional<FeatureBundle>(
                                      const std::string&)>& lookup,
                                  const QuerySet& queries, std::size_t max_tokens) {
  TrainingCorpus<float> corpus;
  std::unordered_map<std::string, std::size_t> ordinal;
  for (const auto& q : queries) {
    auto it = ordinal.find(q.entity_id);
    if (it == ordinal.end()) {
      std::optional<FeatureBundle> b = lookup(q.entity_id);
      if (!b) {
        throw NotFoundError("query " + q.query_id + ": entity " + q.entity_id +
                            " is not in the knowledge base");
      }
      EntityFeatures<float> f;
      f.id = b->entity_id;
      f.primary_patches = std::move(b->images.at(0));
      f.text = truncate_tokens(b->description, max_tokens);
      if (f.text.valid_len == 0) {
        throw DegenerateInputError("training entity " + f.id + " has an empty description");
      }
      it = ordinal.emplace(q.entity_id, corpus.entities.size()).first;
      corpus.entities.push_back(std::move(f));
    }
    TrainSample s;
    s.entity = it->second;
    s.query = embed_query<float>(q.vector);
    corpus.samples.push_back(std::move(s));
  }
  return corpus;
}

}  // namespace

TrainingCorpus<float> build_training_corpus(const FeatureStore& store, const QuerySet& queries,
                                            std::size_t max_tokens) {
  return corpus_from(
      [&](const std::string& id) -> std::optional<FeatureBundle> {
        if (!store.index_of(id)) return std::nullopt;
        return store.read_entity(id);
      },
      queries, max_tokens);
}

TrainingCorpus<float> build_training_corpus(const std::vector<FeatureBundle>& bundles,
                                            const QuerySet& queries, std::size_t max_tokens) {
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < bundles.size(); ++i) by_id.emplace(bundles[i].entity_id, i);
  return corpus_from(
      [&](const std::string& id) -> std::optional<FeatureBundle> {
        const auto it = by_id.find(id);
        if (it == by_id.end()) return std::nullopt;
        return bundles[it->second];
      },
      queries, max_tokens);
}

template <typename T>
InfoNceResult<T> infonce_loss(const Matrix<T>& queries, const Matrix<T>& pool,
                              std::span<const std::size_t> positive,
                              const std::vector<std::vector<std::size_t>>& negatives, T tau) {
  if (!(tau > T(0))) throw ConfigError("infonce: temperature must be > 0");
  const std::size_t b = queries.rows();
  if (b == 0) throw DimensionError("infonce: empty batch");
  if (positive.size() != b || negatives.size() != b) {
    throw DimensionError("infonce: positive/negative lists must have one entry per query");
  }
  if (queries.cols() != pool.cols()) throw DimensionError("infonce: query/pool width mismatch");
  InfoNceResult<T> out;
  out.d_queries = Matrix<T>(b, queries.cols());
  out.d_pool = Matrix<T>(pool.rows(), pool.cols());
  const T inv_b = T(1) / T(b);
  std::vector<std::size_t> cand;
  std::vector<T> sims, z;
  for (std::size_t i = 0; i < b; ++i) {
    cand.assign(1, positive[i]);
    cand.insert(cand.end(), negatives[i].begin(), negatives[i].end());
    sims.resize(cand.size());
    z.resize(cand.size());
    T zmax = -std::numeric_limits<T>::infinity();
    for (std::size_t c = 0; c < cand.size(); ++c) {
      if (cand[c] >= pool.rows()) throw DimensionError("infonce: pool index out of range");
      sims[c] = dot<T>(queries.row(i), pool.row(cand[c]));
      z[c] = sims[c] / tau;
      zmax = std::max(zmax, z[c]);
    }
    T denom = 0;
    for (T v : z) denom += std::exp(v - zmax);
    const T lse = zmax + std::log(denom);
    out.loss += (lse - z[0]) * inv_b;
    for (std::size_t c = 0; c < cand.size(); ++c) {
      const T p = std::exp(z[c] - lse);
      const T dz = (p - (c == 0 ? T(1) : T(0))) * inv_b;
      const T ds = dz / tau;
      out.d_temperature -= dz * sims[c] / (tau * tau);
      auto q = queries.row(i);
      auto v = pool.row(cand[c]);
      auto dq = out.d_queries.row(i);
      auto dv = out.d_pool.row(cand[c]);
      for (std::size_t d = 0; d < q.size(); ++d) {
        dq[d] += ds * v[d];
        dv[d] += ds * q[d];
      }
    }
  }
  return out;
}

template <typename T>
StepResult<T> step_gradients(const TrainBatch<T>& batch, const AdaptorParams<T>& params,
                             T log_scale, const TrainConfig& config,
                             const std::vector<HardNegativeSelection>* frozen) {
  const std::size_t b = batch.size();
  if (b < 2) throw ConfigError("train step: batch needs at least 2 samples");
  if (batch.entities.size() != b || batch.entity_ids.size() != b ||
      (!batch.donors.empty() && batch.donors.size() != b)) {
    throw DimensionError("train step: inconsistent batch fields");
  }
  const std::size_t dim = params.config.dim;

  std::vector<Pass<T>> passes;
  for (std::size_t i = 0; i < b; ++i)
    passes.push_back({&batch.entities[i]->primary_patches, &batch.entities[i]->text, false});
  std::vector<std::vector<std::size_t>> synth_rows(b);
  for (std::size_t i = 0; i < b && !batch.donors.empty(); ++i) {
    for (std::size_t d : batch.donors[i]) {
      if (d >= b || d == i) throw DimensionError("train step: invalid donor index");
      synth_rows[i].push_back(passes.size());
      passes.push_back({&batch.entities[i]->primary_patches, &batch.entities[d]->text, true});
    }
  }

  const std::size_t n = passes.size();
  Matrix<T> pool(n, dim);
  std::vector<AdaptorCache<T>> caches(n);
  parallel_for(n, config.threads, [&](std::size_t p) {
    const Vector<T> v = adaptor_forward(*passes[p].patches, *passes[p].text, params, &caches[p]);
    std::copy(v.begin(), v.end(), pool.row(p).begin());
  });

  Matrix<T> queries(b, dim);
  for (std::size_t i = 0; i < b; ++i) {
    if (batch.queries[i].size() != dim) throw DimensionError("train step: query width != D");
    std::copy(batch.queries[i].begin(), batch.queries[i].end(), queries.row(i).begin());
  }

  StepResult<T> out;
  std::vector<std::size_t> positive(b);
  std::iota(positive.begin(), positive.end(), 0);
  std::vector<std::vector<std::size_t>> originals(b), negatives(b);
  out.selections.resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j)
      if (j != i && batch.entity_ids[j] != batch.entity_ids[i]) originals[i].push_back(j);
    if (frozen) {
      out.selections[i] = frozen->at(i);
    } else {
      std::vector<double> os, ss;
      for (std::size_t j : originals[i]) os.push_back(double(dot<T>(queries.row(i), pool.row(j))));
      for (std::size_t r : synth_rows[i]) ss.push_back(double(dot<T>(queries.row(i), pool.row(r))));
      out.selections[i] = select_hard_negatives(os, ss);
    }
    const auto& sel = out.selections[i];
    if (sel.slots.size() != originals[i].size()) {
      throw InternalError("train step: selection does not match the negative set");
    }
    for (const auto& slot : sel.slots) {
      negatives[i].push_back(slot.synthetic ? synth_rows[i].at(*slot.synthetic)
                                            : originals[i][slot.original]);
    }
    out.replaced += sel.replaced;
    out.negative_slots += sel.slots.size();
  }

  const T tau = std::exp(-log_scale);
  const InfoNceResult<T> loss = infonce_loss<T>(queries, pool, positive, negatives, tau);
  out.loss = loss.loss;
  out.loss_without_substitution = infonce_loss<T>(queries, pool, positive, originals, tau).loss;
  out.d_log_scale = loss.d_temperature * -tau;

  std::vector<std::size_t> active;
  for (std::size_t p = 0; p < n; ++p) {
    if (passes[p].synthetic && config.detach_synthetics) continue;
    if (row_is_zero(loss.d_pool, p)) continue;
    active.push_back(p);
  }
  const std::size_t groups = (active.size() + kPassesPerGroup - 1) / kPassesPerGroup;
  std::vector<AdaptorParams<T>> partial(groups);
  parallel_for(groups, config.threads, [&](std::size_t g) {
    partial[g] = params.zeros_like();
    const std::size_t end = std::min(active.size(), (g + 1) * kPassesPerGroup);
    for (std::size_t a = g * kPassesPerGroup; a < end; ++a) {
      const std::size_t p = active[a];
      adaptor_backward<T>(caches[p], params, loss.d_pool.row(p), partial[g]);
    }
  });
  out.grads = params.zeros_like();
  for (const auto& g : partial) out.grads.add(g);
  return out;
}

template <typename T>
TrainState<T> TrainState<T>::initial(const AdaptorConfig& adaptor, const TrainConfig& config) {
  TrainState s;
  s.params = init_params<T>(adaptor, config.seed);
  s.log_scale = static_cast<T>(std::log(1.0 / config.init_temperature));
  s.optimizer = AdamState<T>::for_params(s.params);
  return s;
}

template <typename T>
StepStats train_step(const TrainBatch<T>& batch, TrainState<T>& state, const TrainConfig& config,
                     double lr) {
  StepResult<T> r = step_gradients(batch, state.params, state.log_scale, config);
  if (!std::isfinite(double(r.loss))) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << state.optimizer.step + 1 << " (tau="
        << std::exp(-double(state.log_scale)) << "); batch entities:";
    for (const auto* e : batch.entities) msg << ' ' << e->id;
    throw NumericalError(msg.str());
  }
  if (!config.learn_temperature) r.d_log_scale = T(0);
  adam_update(state.params, r.grads, state.log_scale, r.d_log_scale, state.optimizer, lr);
  const T max_log_scale = static_cast<T>(std::log(1.0 / config.min_temperature));
  state.log_scale = std::min(state.log_scale, max_log_scale);

  StepStats s;
  s.step = state.optimizer.step;
  s.loss = double(r.loss);
  s.loss_without_substitution = double(r.loss_without_substitution);
  s.lr = lr;
  s.temperature = std::exp(-double(state.log_scale));
  s.replaced = r.replaced;
  s.negative_slots = r.negative_slots;
  s.replacement_rate = r.negative_slots ? double(r.replaced) / double(r.negative_slots) : 0.0;
  s.batch_size = batch.size();
  double sim = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t j = i + 1; j < batch.size(); ++j) {
      sim += double(dot<T>(batch.queries[i], batch.queries[j]));
      ++pairs;
    }
  }
  s.intra_batch_similarity = pairs ? sim / double(pairs) : 1.0;
  return s;
}

std::vector<std::vector<std::vector<std::size_t>>> plan_epochs(
    const std::vector<TrainSample>& samples, std::size_t n_entities, const TrainConfig& config) {
  config.validate();
  std::vector<std::vector<std::size_t>> by_entity(n_entities);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    if (samples[s].entity >= n_entities) throw DimensionError("plan: sample entity out of range");
    by_entity[samples[s].entity].push_back(s);
  }
  std::vector<std::size_t> trained;
  for (std::size_t e = 0; e < n_entities; ++e)
    if (!by_entity[e].empty()) trained.push_back(e);
  if (trained.size() < 2) throw DegenerateInputError("training needs at least 2 entities");

  // Cluster points: one unit vector per trained entity, the mean of its queries.
  const std::size_t dim = samples[by_entity[trained[0]][0]].query.size();
  Matrix<float> points(trained.size(), dim);
  for (std::size_t t = 0; t < trained.size(); ++t) {
    std::vector<double> acc(dim, 0.0);
    for (std::size_t s : by_entity[trained[t]]) {
      if (samples[s].query.size() != dim) throw DimensionError("plan: ragged query widths");
      for (std::size_t d = 0; d < dim; ++d) acc[d] += samples[s].query[d];
    }
    double norm = 0;
    for (double x : acc) norm += x * x;
    norm = std::sqrt(norm);
    for (std::size_t d = 0; d < dim; ++d)
      points(t, d) = static_cast<float>(norm > 0 ? acc[d] / norm : 0.0);
  }

  std::vector<std::vector<std::vector<std::size_t>>> epochs;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(config.seed, {0xe70c, epoch}));
    std::vector<std::vector<std::size_t>> order = by_entity;
    std::size_t rounds = 0;
    for (auto& o : order) {
      std::shuffle(o.begin(), o.end(), rng);
      rounds = std::max(rounds, o.size());
    }
    ClusterPlan plan;
    if (config.cluster_batches) {
      const std::size_t k = (trained.size() + config.batch_size - 1) / config.batch_size;
      KMeansOptions opts;
      opts.threads = config.threads;
      plan = kmeans_cluster(points, k, derive_seed(config.seed, {0xc105, epoch}), opts);
    } else {
      plan.centroids = Matrix<float>(1, dim);
      plan.assignments.assign(trained.size(), 0);
    }

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t r = 0; r < rounds; ++r) {
      std::vector<std::size_t> active;  // positions in `trained`
      for (std::size_t t = 0; t < trained.size(); ++t)
        if (order[trained[t]].size() > r) active.push_back(t);
      if (active.size() < 2) continue;
      ClusterPlan sub;
      sub.centroids = plan.centroids;
      for (std::size_t t : active) sub.assignments.push_back(plan.assignments[t]);
      for (const auto& group :
           build_batches(sub, config.batch_size, derive_seed(config.seed, {0xba7c, epoch, r}))) {
        std::vector<std::size_t> batch;
        for (std::size_t x : group) batch.push_back(order[trained[active[x]]][r]);
        batches.push_back(std::move(batch));
      }
    }
    epochs.push_back(std::move(batches));
  }
  return epochs;
}

template <typename T>
TrainBatch<T> make_batch(const TrainingCorpus<T>& corpus, std::span<const std::size_t> members,
                         std::size_t n_sync, std::uint64_t seed) {
  TrainBatch<T> batch;
  for (std::size_t s : members) {
    const TrainSample& sample = corpus.samples.at(s);
    batch.queries.emplace_back(sample.query.begin(), sample.query.end());
    batch.entities.push_back(&corpus.entities.at(sample.entity));
    batch.entity_ids.push_back(sample.entity);
  }
  const std::size_t b = members.size();
  if (n_sync > 0 && b >= 2) {
    batch.donors = assign_synthetics(b, std::min(n_sync, b - 1), seed, batch.entity_ids);
  }
  return batch;
}

TrainReport train(const TrainingCorpus<float>& corpus, TrainState<float>& state,
                  const TrainConfig& config, const TrainCallbacks& callbacks) {
  config.validate();
  const auto epochs = plan_epochs(corpus.samples, corpus.entities.size(), config);
  std::uint64_t total = 0;
  std::size_t planned = 0;
  for (const auto& e : epochs) {
    total += e.size();
    for (const auto& b : e) planned += b.size();
  }
  TrainReport report;
  report.skipped_samples = corpus.samples.size() * config.epochs - planned;

  const bool evaluating = config.eval_every > 0 && callbacks.validate;
  std::optional<TrainState<float>> best;
  double best_metric = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  auto evaluate = [&](std::uint64_t step) {
    const double metric = callbacks.validate(state.params);
    report.evals.push_back({step, metric});
    if (metric > best_metric) {
      best_metric = metric;
      best = state;
      report.best_step = step;
      since_best = 0;
    } else {
      ++since_best;
    }
  };

  std::uint64_t step = 0;
  for (const auto& batches : epochs) {
    for (const auto& members : batches) {
      const TrainBatch<float> batch =
          make_batch(corpus, members, config.n_sync, derive_seed(config.seed, {0x5e1f, step}));
      const StepStats stats = train_step(batch, state, config, cosine_lr(step, total, config.lr));
      ++step;
      report.steps.push_back(stats);
      if (callbacks.on_step) callbacks.on_step(stats);
      if (evaluating && (step % config.eval_every == 0 || step == total)) {
        evaluate(step);
        if (config.patience > 0 && since_best >= config.patience) {
          report.stopped_early = true;
          break;
        }
      }
    }
    if (report.stopped_early) break;
  }
  if (evaluating && report.evals.empty()) evaluate(step);
  if (best) state = std::move(*best);
  return report;
}

#define VER_INSTANTIATE(T)                                                                   \
  template InfoNceResult<T> infonce_loss<T>(const Matrix<T>&, const Matrix<T>&,              \
                                            std::span<const std::size_t>,                    \
                                            const std::vector<std::vector<std::size_t>>&, T); \
  template StepResult<T> step_gradients<T>(const TrainBatch<T>&, const AdaptorParams<T>&, T, \
                                           const TrainConfig&,                               \
                                           const std::vector<HardNegativeSelection>*);       \
  template struct TrainState<T>;                                                             \
  template StepStats train_step<T>(const TrainBatch<T>&, TrainState<T>&, const TrainConfig&, \
                                   double);                                                  \
  template TrainBatch<T> make_batch<T>(const TrainingCorpus<T>&,                             \
                                       std::span<const std::size_t>, std::size_t,            \
                                       std::uint64_t);

VER_INSTANTIATE(float)
VER_INSTANTIATE(double)
#undef VER_INSTANTIATE

}  // namespace ver
