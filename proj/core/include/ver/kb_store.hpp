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

// WCFT feature store: precomputed frozen-encoder features for every entity.
//
// Layout (little-endian):
//
//   header  "WCFT" u32 version u32 D u32 D_t u32 N_t_max u64 entity_count
//           u32 crc(header)
//   record  u64 payload_len | payload | u32 crc(payload_len bytes + payload)
//   payload u32 id_len, id (utf-8)
//           u32 token_rows u32 valid_len f32 tokens[token_rows * D_t]
//           u32 n_images, then per image:
//             u32 n_patches f32 patches[n_patches * D] f32 pooled[D]
//
// Image 0 is the primary image. A JSON sidecar <store>.manifest.json lists
// each record's byte offset, length and CRC.

#ifndef VER_KB_STORE_HPP_
#define VER_KB_STORE_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ver/binary_io.hpp"
#include "ver/vgka.hpp"

namespace ver {

inline constexpr std::uint32_t kStoreVersion = 1;

struct StoreDims {
  std::uint32_t dim = 0;
  std::uint32_t text_dim = 0;
  std::uint32_t max_tokens = 0;
  bool operator==(const StoreDims&) const = default;
};

struct FeatureBundle {
  std::string entity_id;
  TokenEmbeddings<float> description;
  std::vector<Matrix<float>> images;  // N_p x D patch features per image
  std::vector<Vector<float>> pooled;  // one unit vector per image

  bool operator==(const FeatureBundle& o) const {
    return entity_id == o.entity_id && description.tokens == o.description.tokens &&
           description.valid_len == o.description.valid_len && images == o.images &&
           pooled == o.pooled;
  }
};

struct RecordInfo {
  std::string entity_id;
  std::uint64_t offset = 0;  // start of the length field
  std::uint64_t length = 0;  // whole record, framing included
  std::uint32_t crc = 0;
  bool operator==(const RecordInfo&) const = default;
};

struct StoreManifest {
  std::uint32_t version = kStoreVersion;
  StoreDims dims;
  std::vector<RecordInfo> records;

  std::string to_json() const;
  static StoreManifest from_json(const std::string& text);
  bool operator==(const StoreManifest&) const = default;
};

// A directory argument resolves to <dir>/store.wcft.
std::string resolve_store_path(const std::string& path);
std::string manifest_path(const std::string& store_path);

// Throws IngestionError on dimension inconsistency or duplicate ids.
StoreManifest write_store(const std::string& path, const StoreDims& dims,
                          const std::vector<FeatureBundle>& bundles);

// Memory-mapped reader. All const methods are safe from concurrent threads.
class FeatureStore {
 public:
  static FeatureStore open(const std::string& path);

  const StoreDims& dims() const { return manifest_.dims; }
  std::size_t size() const { return manifest_.records.size(); }
  const StoreManifest& manifest() const { return manifest_; }
  const std::string& entity_id(std::size_t i) const { return manifest_.records.at(i).entity_id; }
  std::optional<std::size_t> index_of(const std::string& entity_id) const;

  // Throws NotFoundError for an unknown id; ChecksumError/FormatError on a
  // damaged record.
  FeatureBundle read_entity(const std::string& entity_id) const;
  FeatureBundle read_at(std::size_t i) const;

 private:
  FeatureStore(MappedFile file, StoreManifest manifest);

  MappedFile file_;
  StoreManifest manifest_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

struct Finding {
  std::string record;  // entity id, "#<index>" or "header"
  std::uint64_t offset = 0;
  std::string message;
};

struct ValidationReport {
  std::string path;
  std::string format;
  std::size_t records_checked = 0;
  std::vector<Finding> findings;

  bool ok() const { return findings.empty(); }
  std::string to_json() const;
};

// Never throws on malformed content; every problem becomes a finding.
ValidationReport validate_store(const std::string& path);

// Keeps the first min(valid_len, n_t_max) real rows (and padding up to n_t_max).
TokenEmbeddings<float> truncate_tokens(const TokenEmbeddings<float>& t, std::size_t n_t_max);

enum class Split { kSeen, kUnseen };
std::string to_string(Split split);
Split split_from_string(const std::string& name);

struct QueryRecord {
  std::string query_id;
  Vector<float> vector;
  std::string entity_id;
  Split split = Split::kSeen;
  bool operator==(const QueryRecord&) const = default;
};

using QuerySet = std::vector<QueryRecord>;

// JSON lines: {"query_id", "entity_id", "split", "vector": base64 f32 LE}.
void write_query_set(const std::string& path, const QuerySet& queries);
QuerySet read_query_set(const std::string& path);
std::string query_record_to_json(const QueryRecord& q);
QueryRecord query_record_from_json(const std::string& line);

}  // namespace ver

#endif  // VER_KB_STORE_HPP_
