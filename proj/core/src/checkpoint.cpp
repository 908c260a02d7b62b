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

#include "ver/checkpoint.hpp"

#include <json.hpp>

#include "ver/binary_io.hpp"

namespace ver {
namespace {

template <typename T>
void put_params(ByteWriter& w, const AdaptorParams<T>& p) {
  p.visit([&](const std::string&, const Matrix<T>& m) { w.put_array<T>(m.values()); });
}

template <typename Stored, typename T>
void get_params(ByteReader& r, AdaptorParams<T>& p) {
  p.visit([&](const std::string&, Matrix<T>& m) {
    const auto raw = r.get_array<Stored>(m.size());
    std::copy(raw.begin(), raw.end(), m.values().begin());
  });
}

template <typename Stored, typename T>
void read_body(ByteReader& r, Checkpoint<T>& ckpt, bool has_optimizer) {
  get_params<Stored>(r, ckpt.params);
  ckpt.log_scale = static_cast<T>(r.get_f64());
  if (has_optimizer) {
    AdamState<T> s = AdamState<T>::for_params(ckpt.params);
    get_params<Stored>(r, s.m);
    get_params<Stored>(r, s.v);
    s.scale_m = static_cast<T>(r.get_f64());
    s.scale_v = static_cast<T>(r.get_f64());
    s.step = r.get_u64();
    ckpt.optimizer = std::move(s);
  }
}

}  // namespace

template <typename T>
void save_checkpoint(const std::string& path, const Checkpoint<T>& ckpt) {
  const AdaptorConfig& c = ckpt.params.config;
  ByteWriter w;
  w.put_magic("WKCK");
  w.put_u32(kCheckpointVersion);
  w.put_u32(sizeof(T));
  for (std::size_t v : {c.dim, c.text_dim, c.layers, c.heads, c.effective_ffn_dim(),
                        c.max_tokens}) {
    w.put_u32(static_cast<std::uint32_t>(v));
  }
  w.put_f64(c.ln_eps);
  w.put_u32(static_cast<std::uint32_t>(c.mode));
  w.put_u32(ckpt.optimizer ? 1 : 0);
  w.put_u64(ckpt.params.parameter_count());
  w.put_crc_since(0);
  const std::size_t body = w.size();
  put_params(w, ckpt.params);
  w.put_f64(static_cast<double>(ckpt.log_scale));
  if (ckpt.optimizer) {
    put_params(w, ckpt.optimizer->m);
    put_params(w, ckpt.optimizer->v);
    w.put_f64(static_cast<double>(ckpt.optimizer->scale_m));
    w.put_f64(static_cast<double>(ckpt.optimizer->scale_v));
    w.put_u64(ckpt.optimizer->step);
  }
  w.put_crc_since(body);
  write_file(path, w.bytes());
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  ByteReader r(bytes, "checkpoint " + path);
  r.expect_magic("WKCK");
  const std::uint32_t version = r.get_u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint " + path + ": unsupported version " + std::to_string(version) +
                      " (this build reads version " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t dtype = r.get_u32();
  if (dtype != 4 && dtype != 8) {
    throw FormatError("checkpoint " + path + ": bad dtype width " + std::to_string(dtype));
  }
  AdaptorConfig c;
  c.dim = r.get_u32();
  c.text_dim = r.get_u32();
  c.layers = r.get_u32();
  c.heads = r.get_u32();
  c.ffn_dim = r.get_u32();
  c.max_tokens = r.get_u32();
  c.ln_eps = r.get_f64();
  const std::uint32_t mode = r.get_u32();
  if (mode > 2) throw FormatError("checkpoint " + path + ": bad adaptor mode");
  c.mode = static_cast<AdaptorMode>(mode);
  const bool has_optimizer = r.get_u32() != 0;
  const std::uint64_t count = r.get_u64();
  r.check_crc_since(0, "header");
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError("checkpoint " + path + ": " + e.what());
  }
  if (count != c.parameter_count()) {
    throw FormatError("checkpoint " + path + ": parameter count does not match dims");
  }

  Checkpoint<T> ckpt;
  ckpt.params = init_params<T>(c, 0);
  const std::size_t body = r.offset();
  if (dtype == 4) {
    read_body<float>(r, ckpt, has_optimizer);
  } else {
    read_body<double>(r, ckpt, has_optimizer);
  }
  r.check_crc_since(body, "body");
  if (r.remaining() != 0) throw FormatError("checkpoint " + path + ": trailing bytes");
  return ckpt;
}

void write_checkpoint_manifest(const std::string& path, const AdaptorConfig& config,
                               std::uint64_t seed, const std::string& metadata_json) {
  nlohmann::json j;
  j["format"] = "WKCK";
  j["version"] = kCheckpointVersion;
  j["dims"] = {{"dim", config.dim},
               {"text_dim", config.text_dim},
               {"layers", config.layers},
               {"heads", config.heads},
               {"ffn_dim", config.effective_ffn_dim()},
               {"max_tokens", config.max_tokens},
               {"mode", to_string(config.mode)}};
  j["parameter_count"] = config.parameter_count();
  j["seed"] = seed;
  j["training"] = metadata_json.empty() ? nlohmann::json::object()
                                        : nlohmann::json::parse(metadata_json);
  write_text_file(path, j.dump(2) + "\n");
}

template void save_checkpoint<float>(const std::string&, const Checkpoint<float>&);
template void save_checkpoint<double>(const std::string&, const Checkpoint<double>&);
template Checkpoint<float> load_checkpoint<float>(const std::string&);
template Checkpoint<double> load_checkpoint<double>(const std::string&);

}  // namespace ver
