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

// Precomputed entity embeddings and search over them. An entity scores the
// maximum cosine over its image rows; results are ranked by that score with
// ties going to the lexicographically smaller entity id.
//
// WCIX layout (little-endian), each section followed by its own u32 CRC:
//
//   header      "WCIX" u32 version u32 D u64 rows u64 n_entities
//               u32 kind(0 exact, 1 ivf) u32 n_lists u32 n_probe
//   entities    n_entities x (u32 len, utf-8 id)
//   row map     rows x (u32 entity ordinal, u32 image id)
//   matrix      rows x D f32
//   quantizer   (ivf only) n_lists x D f32 centroids,
//               (n_lists + 1) u64 list offsets, rows x u32 row ids

#ifndef VER_RETRIEVAL_HPP_
#define VER_RETRIEVAL_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ver/kb_store.hpp"
#include "ver/vgka.hpp"

namespace ver {

inline constexpr std::uint32_t kIndexVersion = 1;

enum class IndexKind : std::uint32_t { kExact = 0, kIvf = 1 };

struct IvfQuantizer {
  Matrix<float> centroids;                 // n_lists x D
  std::vector<std::uint64_t> list_offsets;  // n_lists + 1, into list_rows
  std::vector<std::uint32_t> list_rows;
  std::uint32_t n_probe = 1;

  std::size_t n_lists() const { return centroids.rows(); }
  bool operator==(const IvfQuantizer&) const = default;
};

class EntityIndex {
 public:
  explicit EntityIndex(std::size_t dim = 0) : dim_(dim) {}

  // Rows must be unit norm within 1e-5.
  void add(const std::string& entity_id, std::uint32_t image_id, std::span<const float> row);
  // Appends every row of `other` (same dim); drops any quantizer.
  void append(const EntityIndex& other);

  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return row_entity_.size(); }
  std::size_t entity_count() const { return entity_ids_.size(); }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }
  std::uint32_t row_entity(std::size_t r) const { return row_entity_[r]; }
  std::uint32_t row_image(std::size_t r) const { return row_image_[r]; }
  const std::string& entity_id(std::size_t e) const { return entity_ids_[e]; }
  const std::vector<std::string>& entity_ids() const { return entity_ids_; }
  std::optional<std::size_t> entity_ordinal(const std::string& id) const;

  IndexKind kind() const { return ivf_ ? IndexKind::kIvf : IndexKind::kExact; }
  const std::optional<IvfQuantizer>& ivf() const { return ivf_; }
  void set_ivf(std::optional<IvfQuantizer> q) { ivf_ = std::move(q); }

  bool operator==(const EntityIndex& o) const {
    return dim_ == o.dim_ && data_ == o.data_ && row_entity_ == o.row_entity_ &&
           row_image_ == o.row_image_ && entity_ids_ == o.entity_ids_ && ivf_ == o.ivf_;
  }

 private:
  std::size_t dim_;
  std::vector<float> data_;
  std::vector<std::uint32_t> row_entity_;
  std::vector<std::uint32_t> row_image_;
  std::vector<std::string> entity_ids_;
  std::unordered_map<std::string, std::uint32_t> by_id_;
  std::optional<IvfQuantizer> ivf_;
};

struct Hit {
  std::string entity_id;
  float score = 0;
  std::uint32_t image_id = 0;
};

struct RetrievalResult {
  std::vector<Hit> hits;
  std::uint64_t latency_ns = 0;
  std::size_t rows_scanned = 0;

  std::string to_json() const;
};

struct QueryOptions {
  std::size_t k = 10;
  // Overrides the index's stored n_probe when set.
  std::optional<std::size_t> n_probe;
  // Scan an IVF index exhaustively instead of probing.
  bool force_exact = false;
  std::size_t threads = 1;
};

// The query is L2-normalized first. k is clamped to the number of entities
// reached by the scan.
RetrievalResult query(const EntityIndex& index, std::span<const float> h,
                      const QueryOptions& options = {});

// Row similarity used by every scan path.
float row_dot(std::span<const float> a, std::span<const float> b);

// k-means coarse quantizer over the index rows.
void build_ivf(EntityIndex& index, std::size_t n_lists, std::uint64_t seed,
               std::size_t n_probe, std::size_t threads = 1);

void save_index(const std::string& path, const EntityIndex& index);
EntityIndex load_index(const std::string& path);
ValidationReport validate_index(const std::string& path);

struct EmbedOptions {
  std::size_t threads = 1;
  bool all_images = true;  // false embeds the primary image only
  std::size_t begin = 0;   // first store record to embed
  std::optional<std::size_t> end;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

struct EmbedReport {
  EntityIndex index;
  std::vector<std::string> skipped;  // degenerate entities (no description)
  std::size_t embedded = 0;
};

// One row per (entity, image). Output is identical for any thread count.
EmbedReport embed_kb(const FeatureStore& store, const AdaptorParams<float>& params,
                     const EmbedOptions& options = {});

EmbedReport embed_bundles(const std::vector<FeatureBundle>& bundles,
                          const AdaptorParams<float>& params, const EmbedOptions& options = {});

// Baseline index over the stored pooled image vectors.
EntityIndex index_from_pooled(const FeatureStore& store, bool all_images = true);

struct LatencyStats {
  std::size_t count = 0;
  double p50_ns = 0;
  double p95_ns = 0;
  double mean_ns = 0;
  double queries_per_second = 0;
  double rows_per_second = 0;
  std::size_t threads = 1;

  std::string to_json() const;
};

// Runs every query `reps` times. With `options.threads` > 1 that many
// workers issue single-threaded queries concurrently, so the throughput
// figure measures inter-query scaling.
LatencyStats bench_query(const EntityIndex& index, const std::vector<Vector<float>>& queries,
                         std::size_t reps, const QueryOptions& options = {});

}  // namespace ver

#endif  // VER_RETRIEVAL_HPP_
