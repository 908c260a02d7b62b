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

// Visually clustered minibatches and hard negative synthesis.
//
// A batch is built from queries whose visual features are close, so in-batch
// negatives already look alike. Each sample then gets a few synthetic
// entities: its own primary image paired with the description of another
// entity in the batch. A synthetic replaces an in-batch negative whenever it
// is strictly more similar to the query.

#ifndef VER_BATCH_SYNTH_HPP_
#define VER_BATCH_SYNTH_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ver/tensor.hpp"

namespace ver {

struct KMeansOptions {
  std::size_t max_iterations = 50;
  double tolerance = 1e-4;  // stop once every centroid moves less than this
  std::size_t threads = 1;
};

struct ClusterPlan {
  std::vector<std::size_t> assignments;  // point -> cluster
  Matrix<float> centroids;               // k x D
  double inertia = 0;                    // sum of squared distances
  std::size_t iterations = 0;

  std::size_t k() const { return centroids.rows(); }
};

// Lloyd's algorithm with k-means++ seeding under squared Euclidean distance
// (equivalent to cosine distance for unit rows). Deterministic given seed.
ClusterPlan kmeans_cluster(const Matrix<float>& points, std::size_t k, std::uint64_t seed,
                           const KMeansOptions& options = {});

// Packs clusters into batches of `batch_size` items. Clusters are visited in
// shuffled order; a cluster larger than the batch is split, and a trailing
// partial batch is topped up from the cluster with the nearest centroid. A
// final batch of a single item is merged into the previous one. Every item
// appears exactly once.
std::vector<std::vector<std::size_t>> build_batches(const ClusterPlan& plan,
                                                    std::size_t batch_size,
                                                    std::uint64_t seed);

// For each of the `batch_size` samples, n_sync distinct donor indices drawn
// uniformly without replacement from the rest of the batch. When `entities`
// is given, donors sharing the sample's entity are excluded (their synthetic
// would equal the positive); such a sample may then get fewer donors.
std::vector<std::vector<std::size_t>> assign_synthetics(
    std::size_t batch_size, std::size_t n_sync, std::uint64_t seed,
    std::span<const std::size_t> entities = {});

struct NegativeSlot {
  std::size_t original = 0;  // index into the original negatives
  std::optional<std::size_t> synthetic;  // set when replaced
  double original_similarity = 0;
  double similarity = 0;  // final similarity of the slot
};

struct HardNegativeSelection {
  std::vector<NegativeSlot> slots;  // same order and count as the originals
  std::size_t replaced = 0;
  std::vector<std::size_t> unused_synthetics;
};

// Greedy matching: originals ascending by similarity, synthetics descending;
// the easiest remaining original is replaced by the hardest remaining
// synthetic iff the synthetic is strictly more similar. Each synthetic is
// used at most once.
HardNegativeSelection select_hard_negatives(std::span<const double> original_similarities,
                                            std::span<const double> synthetic_similarities);

template <typename T>
HardNegativeSelection select_hard_negatives(
    std::span<const T> query, const std::vector<std::pair<std::size_t, Vector<T>>>& originals,
    const std::vector<Vector<T>>& synthetics);

// Mean pairwise cosine similarity between the given rows.
double mean_pairwise_similarity(const Matrix<float>& rows, std::span<const std::size_t> members);

}  // namespace ver

#endif  // VER_BATCH_SYNTH_HPP_
