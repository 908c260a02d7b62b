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

// WKCK checkpoint layout (all little-endian):
//
//   "WKCK" u32 version u32 dtype_bytes(4|8)
//   u32 dim u32 text_dim u32 layers u32 heads u32 ffn_dim u32 max_tokens
//   f64 ln_eps u32 mode u32 has_optimizer u64 parameter_count
//   u32 crc(header)
//   parameter tensors in AdaptorParams::visit order, raw values
//   f64 log_scale
//   [if has_optimizer: first moments, second moments, f64 scale_m,
//    f64 scale_v, u64 step]
//   u32 crc(body)
//
// A JSON sidecar (<path>.json) records dims, seed and training metadata.

#ifndef VER_CHECKPOINT_HPP_
#define VER_CHECKPOINT_HPP_

#include <cstdint>
#include <optional>
#include <string>

#include "ver/optimizer.hpp"
#include "ver/vgka.hpp"

namespace ver {

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
struct Checkpoint {
  AdaptorParams<T> params;
  T log_scale = 0;
  std::optional<AdamState<T>> optimizer;
};

template <typename T>
void save_checkpoint(const std::string& path, const Checkpoint<T>& ckpt);

// Converts to T if the file was written at the other precision. Throws
// FormatError on bad magic, unknown version, truncation or checksum failure.
template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path);

// `metadata_json` must be a serialized JSON object; it is embedded verbatim
// under "training".
void write_checkpoint_manifest(const std::string& path, const AdaptorConfig& config,
                               std::uint64_t seed, const std::string& metadata_json);

}  // namespace ver

#endif  // VER_CHECKPOINT_HPP_
