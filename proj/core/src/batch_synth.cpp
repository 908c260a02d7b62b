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

#include "ver/batch_synth.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>
#include <random>

#include "ver/parallel.hpp"

namespace ver {
namespace {

double sq_dist(std::span<const float> a, std::span<const float> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    s += d * d;
  }
  return s;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// k-means++: first centre uniform, the rest sampled proportionally to the
// squared distance to the nearest chosen centre.
std::vector<std::size_t> seed_centres(const Matrix<float>& points, std::size_t k,
                                      std::mt19937_64& rng) {
  const std::size_t n = points.rows();
  std::vector<std::size_t> centres;
  std::vector<bool> chosen(n, false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  auto take = [&](std::size_t c) {
    centres.push_back(c);
    chosen[c] = true;
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], sq_dist(points.row(i), points.row(c)));
  };
  take(uniform_index(rng, n));
  while (centres.size() < k) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (!chosen[i]) total += d2[i];
    if (total > 0) {
      double r = std::uniform_real_distribution<double>(0, total)(rng);
      std::size_t pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || d2[i] <= 0) continue;
        pick = i;
        r -= d2[i];
        if (r < 0) break;
      }
      take(pick);
    } else {
      // Remaining points coincide with chosen centres.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) free.push_back(i);
      take(free[uniform_index(rng, free.size())]);
    }
  }
  return centres;
}

void assign_points(const Matrix<float>& points, const Matrix<float>& centroids,
                   std::vector<std::size_t>& assignment, std::vector<double>& dist,
                   std::size_t threads) {
  parallel_for(points.rows(), threads, [&](std::size_t i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
      const double d = sq_dist(points.row(i), centroids.row(c));
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    assignment[i] = arg;
    dist[i] = best;
  });
}

}  // namespace

ClusterPlan kmeans_cluster(const Matrix<float>& points, std::size_t k, std::uint64_t seed,
                           const KMeansOptions& options) {
  const std::size_t n = points.rows(), d = points.cols();
  if (k == 0) throw ConfigError("kmeans: k must be >= 1");
  if (k > n) {
    throw ConfigError("kmeans: k=" + std::to_string(k) + " exceeds point count " +
                      std::to_string(n));
  }
  std::mt19937_64 rng(seed);
  ClusterPlan plan;
  plan.centroids = Matrix<float>(k, d);
  const auto centres = seed_centres(points, k, rng);
  for (std::size_t c = 0; c < k; ++c)
    std::copy_n(points.row(centres[c]).begin(), d, plan.centroids.row(c).begin());

  plan.assignments.assign(n, 0);
  std::vector<double> dist(n, 0);
  std::vector<double> sums(k * d);
  std::vector<std::size_t> counts(k);
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    assign_points(points, plan.centroids, plan.assignments, dist, options.threads);
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = plan.assignments[i];
      ++counts[c];
      auto row = points.row(i);
      for (std::size_t j = 0; j < d; ++j) sums[c * d + j] += row[j];
    }
    // Empty clusters take the point farthest from its centroid.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (dist[i] > dist[far]) far = i;
      const std::size_t old = plan.assignments[far];
      auto row = points.row(far);
      for (std::size_t j = 0; j < d; ++j) {
        sums[old * d + j] -= row[j];
        sums[c * d + j] = row[j];
      }
      --counts[old];
      counts[c] = 1;
      plan.assignments[far] = c;
      dist[far] = 0;
    }
    double max_shift = 0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      double shift = 0;
      auto cent = plan.centroids.row(c);
      for (std::size_t j = 0; j < d; ++j) {
        const float updated = static_cast<float>(sums[c * d + j] / double(counts[c]));
        const double delta = double(updated) - double(cent[j]);
        shift += delta * delta;
        cent[j] = updated;
      }
      max_shift = std::max(max_shift, std::sqrt(shift));
    }
    plan.iterations = it + 1;
    if (max_shift < options.tolerance) break;
  }
  assign_points(points, plan.centroids, plan.assignments, dist, options.threads);
  plan.inertia = std::accumulate(dist.begin(), dist.end(), 0.0);
  return plan;
}

std::vector<std::vector<std::size_t>> build_batches(const ClusterPlan& plan,
                                                    std::size_t batch_size,
                                                    std::uint64_t seed) {
  if (batch_size < 2) throw ConfigError("build_batches: batch size must be >= 2");
  const std::size_t k = plan.k();
  std::mt19937_64 rng(seed);
  std::vector<std::deque<std::size_t>> members(k);
  for (std::size_t i = 0; i < plan.assignments.size(); ++i) {
    const std::size_t c = plan.assignments[i];
    if (c >= k) throw InternalError("build_batches: assignment out of range");
    members[c].push_back(i);
  }
  for (auto& m : members) std::shuffle(m.begin(), m.end(), rng);
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  auto nearest_nonempty = [&](std::size_t from) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c == from || members[c].empty()) continue;
      const double d = sq_dist(plan.centroids.row(from), plan.centroids.row(c));
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    return best;
  };

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t c : order) {
    auto& m = members[c];
    while (m.size() >= batch_size) {
      batches.emplace_back(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(batch_size));
      m.erase(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(batch_size));
    }
    if (m.empty()) continue;
    std::vector<std::size_t> batch(m.begin(), m.end());
    m.clear();
    while (batch.size() < batch_size) {
      const auto donor = nearest_nonempty(c);
      if (!donor) break;
      auto& dm = members[*donor];
      while (batch.size() < batch_size && !dm.empty()) {
        batch.push_back(dm.front());
        dm.pop_front();
      }
    }
    batches.push_back(std::move(batch));
  }
  if (batches.size() > 1 && batches.back().size() < 2) {
    auto last = std::move(batches.back());
    batches.pop_back();
    batches.back().insert(batches.back().end(), last.begin(), last.end());
  }
  return batches;
}

std::vector<std::vector<std::size_t>> assign_synthetics(std::size_t batch_size,
                                                        std::size_t n_sync,
                                                        std::uint64_t seed,
                                                        std::span<const std::size_t> entities) {
  if (batch_size >= 1 && n_sync > batch_size - 1) {
    throw ConfigError("assign_synthetics: n_sync=" + std::to_string(n_sync) +
                      " exceeds batch size - 1 = " + std::to_string(batch_size - 1));
  }
  if (!entities.empty() && entities.size() != batch_size) {
    throw DimensionError("assign_synthetics: entity list length != batch size");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> donors(batch_size);
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < batch_size; ++i) {
    pool.clear();
    for (std::size_t j = 0; j < batch_size; ++j) {
      if (j == i) continue;
      if (!entities.empty() && entities[j] == entities[i]) continue;
      pool.push_back(j);
    }
    const std::size_t take = std::min(n_sync, pool.size());
    // Partial Fisher-Yates.
    for (std::size_t s = 0; s < take; ++s) {
      const std::size_t r =
          s + std::uniform_int_distribution<std::size_t>(0, pool.size() - 1 - s)(rng);
      std::swap(pool[s], pool[r]);
    }
    donors[i].assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return donors;
}

HardNegativeSelection select_hard_negatives(std::span<const double> original_similarities,
                                            std::span<const double> synthetic_similarities) {
  HardNegativeSelection sel;
  const std::size_t n_orig = original_similarities.size();
  const std::size_t n_syn = synthetic_similarities.size();
  sel.slots.resize(n_orig);
  for (std::size_t i = 0; i < n_orig; ++i) {
    sel.slots[i].original = i;
    sel.slots[i].original_similarity = original_similarities[i];
    sel.slots[i].similarity = original_similarities[i];
  }
  std::vector<std::size_t> easy(n_orig), hard(n_syn);
  std::iota(easy.begin(), easy.end(), 0);
  std::iota(hard.begin(), hard.end(), 0);
  std::stable_sort(easy.begin(), easy.end(), [&](std::size_t a, std::size_t b) {
    return original_similarities[a] < original_similarities[b];
  });
  std::stable_sort(hard.begin(), hard.end(), [&](std::size_t a, std::size_t b) {
    return synthetic_similarities[a] > synthetic_similarities[b];
  });
  std::size_t used = 0;
  for (std::size_t e = 0; e < n_orig && used < n_syn; ++e) {
    const std::size_t slot = easy[e];
    const std::size_t syn = hard[used];
    if (!(synthetic_similarities[syn] > original_similarities[slot])) break;
    sel.slots[slot].synthetic = syn;
    sel.slots[slot].similarity = synthetic_similarities[syn];
    ++used;
  }
  sel.replaced = used;
  sel.unused_synthetics.assign(hard.begin() + static_cast<std::ptrdiff_t>(used), hard.end());
  std::sort(sel.unused_synthetics.begin(), sel.unused_synthetics.end());
  return sel;
}

template <typename T>
HardNegativeSelection select_hard_negatives(
    std::span<const T> query, const std::vector<std::pair<std::size_t, Vector<T>>>& originals,
    const std::vector<Vector<T>>& synthetics) {
  std::vector<double> o, s;
  o.reserve(originals.size());
  s.reserve(synthetics.size());
  for (const auto& [idx, v] : originals) o.push_back(double(dot<T>(query, v)));
  for (const auto& v : synthetics) s.push_back(double(dot<T>(query, v)));
  return select_hard_negatives(o, s);
}

double mean_pairwise_similarity(const Matrix<float>& rows, std::span<const std::size_t> members) {
  if (members.size() < 2) return 1.0;
  double total = 0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < members.size(); ++a) {
    for (std::size_t b = a + 1; b < members.size(); ++b) {
      total += double(cosine_sim<float>(rows.row(members[a]), rows.row(members[b])));
      ++pairs;
    }
  }
  return total / double(pairs);
}

template HardNegativeSelection select_hard_negatives<float>(
    std::span<const float>, const std::vector<std::pair<std::size_t, Vector<float>>>&,
    const std::vector<Vector<float>>&);
template HardNegativeSelection select_hard_negatives<double>(
    std::span<const double>, const std::vector<std::pair<std::size_t, Vector<double>>>&,
    const std::vector<Vector<double>>&);

}  // namespace ver
