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

#include "ver/kb_store.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

namespace ver {
namespace {

// Sanity cap on any single dimension read from disk.
constexpr std::uint32_t kMaxDim = 1u << 16;

void check_dims(const StoreDims& d) {
  if (d.dim == 0 || d.text_dim == 0 || d.max_tokens == 0 || d.dim > kMaxDim ||
      d.text_dim > kMaxDim || d.max_tokens > kMaxDim) {
    throw FormatError("store dims out of range: D=" + std::to_string(d.dim) +
                      " D_t=" + std::to_string(d.text_dim) +
                      " N_t_max=" + std::to_string(d.max_tokens));
  }
}

std::vector<std::uint8_t> encode_payload(const FeatureBundle& b, const StoreDims& dims) {
  const auto& t = b.description;
  auto fail = [&](const std::string& why) {
    throw IngestionError("entity " + b.entity_id + ": " + why);
  };
  if (b.entity_id.empty()) throw IngestionError("empty entity id");
  if (t.tokens.rows() > 0 && t.tokens.cols() != dims.text_dim) fail("token width != D_t");
  if (t.tokens.rows() > dims.max_tokens) fail("more token rows than N_t_max");
  if (t.valid_len > t.tokens.rows()) fail("valid_len exceeds token rows");
  if (b.images.empty()) fail("no images");
  if (b.pooled.size() != b.images.size()) fail("pooled vector count != image count");
  ByteWriter w;
  w.put_string(b.entity_id);
  w.put_u32(static_cast<std::uint32_t>(t.tokens.rows()));
  w.put_u32(static_cast<std::uint32_t>(t.valid_len));
  w.put_array<float>(t.tokens.values());
  w.put_u32(static_cast<std::uint32_t>(b.images.size()));
  for (std::size_t i = 0; i < b.images.size(); ++i) {
    if (b.images[i].rows() == 0) fail("image " + std::to_string(i) + " has no patches");
    if (b.images[i].cols() != dims.dim) fail("patch width != D");
    if (b.pooled[i].size() != dims.dim) fail("pooled vector width != D");
    w.put_u32(static_cast<std::uint32_t>(b.images[i].rows()));
    w.put_array<float>(b.images[i].values());
    w.put_array<float>(std::span<const float>(b.pooled[i]));
  }
  return w.take();
}

FeatureBundle decode_payload(std::span<const std::uint8_t> payload, const StoreDims& dims,
                             const std::string& what) {
  ByteReader r(payload, what);
  FeatureBundle b;
  b.entity_id = r.get_string(4096);
  const std::uint32_t rows = r.get_u32();
  const std::uint32_t valid = r.get_u32();
  if (rows > dims.max_tokens) throw FormatError(what + ": token rows exceed N_t_max");
  if (valid > rows) throw FormatError(what + ": valid_len exceeds token rows");
  b.description.tokens =
      Matrix<float>(rows, dims.text_dim, r.get_array<float>(std::size_t(rows) * dims.text_dim));
  b.description.valid_len = valid;
  const std::uint32_t n_images = r.get_u32();
  if (n_images == 0) throw FormatError(what + ": entity has no images");
  for (std::uint32_t i = 0; i < n_images; ++i) {
    const std::uint32_t patches = r.get_u32();
    if (patches == 0 || patches > kMaxDim) {
      throw FormatError(what + ": bad patch count " + std::to_string(patches));
    }
    b.images.emplace_back(patches, dims.dim,
                          r.get_array<float>(std::size_t(patches) * dims.dim));
    b.pooled.push_back(r.get_array<float>(dims.dim));
  }
  if (r.remaining() != 0) throw FormatError(what + ": trailing bytes in record payload");
  return b;
}

struct Header {
  StoreDims dims;
  std::uint64_t count = 0;
};

Header read_header(ByteReader& r, const std::string& path) {
  r.expect_magic("WCFT");
  const std::uint32_t version = r.get_u32();
  if (version != kStoreVersion) {
    throw FormatError(path + ": unsupported WCFT version " + std::to_string(version));
  }
  Header h;
  h.dims.dim = r.get_u32();
  h.dims.text_dim = r.get_u32();
  h.dims.max_tokens = r.get_u32();
  h.count = r.get_u64();
  r.check_crc_since(0, "header");
  check_dims(h.dims);
  return h;
}

// Reads framing only; the payload is returned unparsed.
struct RawRecord {
  std::uint64_t offset;
  std::span<const std::uint8_t> payload;
  std::uint32_t stored_crc;
  std::uint64_t length;
};

RawRecord read_frame(ByteReader& r) {
  RawRecord rec;
  rec.offset = r.offset();
  const std::uint64_t len = r.get_u64();
  if (len > r.remaining()) {
    throw FormatError("record at offset " + std::to_string(rec.offset) + " claims " +
                      std::to_string(len) + " payload bytes, only " +
                      std::to_string(r.remaining()) + " remain");
  }
  rec.payload = r.get_bytes(len);
  rec.stored_crc = r.get_u32();
  rec.length = r.offset() - rec.offset;
  return rec;
}

// Best-effort id for diagnostics; falls back to the record index.
std::string peek_id(std::span<const std::uint8_t> payload, std::size_t index) {
  try {
    ByteReader r(payload);
    std::string id = r.get_string(4096);
    bool printable = !id.empty();
    for (unsigned char c : id) printable = printable && c >= 0x20 && c < 0x7f;
    if (printable) return id;
  } catch (const Error&) {
  }
  return "#" + std::to_string(index);
}

}  // namespace

std::string StoreManifest::to_json() const {
  nlohmann::json j;
  j["format"] = "WCFT";
  j["version"] = version;
  j["dim"] = dims.dim;
  j["text_dim"] = dims.text_dim;
  j["max_tokens"] = dims.max_tokens;
  j["entity_count"] = records.size();
  j["records"] = nlohmann::json::array();
  for (const auto& r : records) {
    j["records"].push_back(
        {{"entity_id", r.entity_id}, {"offset", r.offset}, {"length", r.length}, {"crc32", r.crc}});
  }
  return j.dump(1) + "\n";
}

StoreManifest StoreManifest::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "WCFT") throw FormatError("manifest: not a WCFT manifest");
    StoreManifest m;
    m.version = j.at("version");
    m.dims.dim = j.at("dim");
    m.dims.text_dim = j.at("text_dim");
    m.dims.max_tokens = j.at("max_tokens");
    for (const auto& r : j.at("records")) {
      m.records.push_back({r.at("entity_id"), r.at("offset"), r.at("length"), r.at("crc32")});
    }
    if (j.at("entity_count") != m.records.size()) {
      throw FormatError("manifest: entity_count does not match record list");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

std::string resolve_store_path(const std::string& path) {
  if (std::filesystem::is_directory(path)) {
    return (std::filesystem::path(path) / "store.wcft").string();
  }
  return path;
}

std::string manifest_path(const std::string& store_path) {
  return store_path + ".manifest.json";
}

StoreManifest write_store(const std::string& path, const StoreDims& dims,
                          const std::vector<FeatureBundle>& bundles) {
  try {
    check_dims(dims);
  } catch (const FormatError& e) {
    throw IngestionError(e.what());
  }
  std::set<std::string> seen;
  StoreManifest manifest;
  manifest.dims = dims;
  ByteWriter w;
  w.put_magic("WCFT");
  w.put_u32(kStoreVersion);
  w.put_u32(dims.dim);
  w.put_u32(dims.text_dim);
  w.put_u32(dims.max_tokens);
  w.put_u64(bundles.size());
  w.put_crc_since(0);
  for (const auto& b : bundles) {
    if (!seen.insert(b.entity_id).second) {
      throw IngestionError("duplicate entity id " + b.entity_id);
    }
    const auto payload = encode_payload(b, dims);
    RecordInfo info;
    info.entity_id = b.entity_id;
    info.offset = w.size();
    w.put_u64(payload.size());
    w.put_bytes(payload);
    const std::size_t crc_at = w.size();
    w.put_crc_since(info.offset);
    info.crc = crc32(std::span<const std::uint8_t>(w.bytes()).subspan(
        info.offset, crc_at - info.offset));
    info.length = w.size() - info.offset;
    manifest.records.push_back(std::move(info));
  }
  write_file(path, w.bytes());
  write_text_file(manifest_path(path), manifest.to_json());
  return manifest;
}

FeatureStore::FeatureStore(MappedFile file, StoreManifest manifest)
    : file_(std::move(file)), manifest_(std::move(manifest)) {
  for (std::size_t i = 0; i < manifest_.records.size(); ++i)
    by_id_.emplace(manifest_.records[i].entity_id, i);
}

FeatureStore FeatureStore::open(const std::string& path_in) {
  const std::string path = resolve_store_path(path_in);
  if (!std::filesystem::exists(path)) throw NotFoundError("store not found: " + path);
  MappedFile file(path);
  ByteReader r(file.bytes(), path);
  const Header h = read_header(r, path);
  StoreManifest m;
  m.dims = h.dims;
  std::set<std::string> ids;
  for (std::uint64_t i = 0; i < h.count; ++i) {
    const RawRecord rec = read_frame(r);
    RecordInfo info;
    info.entity_id = ByteReader(rec.payload, path).get_string(4096);
    info.offset = rec.offset;
    info.length = rec.length;
    info.crc = rec.stored_crc;
    if (!ids.insert(info.entity_id).second) {
      throw FormatError(path + ": duplicate entity id " + info.entity_id);
    }
    m.records.push_back(std::move(info));
  }
  if (r.remaining() != 0) {
    throw FormatError(path + ": " + std::to_string(r.remaining()) +
                      " trailing bytes after the last record");
  }
  return FeatureStore(std::move(file), std::move(m));
}

std::optional<std::size_t> FeatureStore::index_of(const std::string& entity_id) const {
  const auto it = by_id_.find(entity_id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

FeatureBundle FeatureStore::read_entity(const std::string& entity_id) const {
  const auto i = index_of(entity_id);
  if (!i) throw NotFoundError("entity not in store: " + entity_id);
  return read_at(*i);
}

FeatureBundle FeatureStore::read_at(std::size_t i) const {
  const RecordInfo& info = manifest_.records.at(i);
  const std::string what =
      file_.path() + " record " + info.entity_id + " @" + std::to_string(info.offset);
  ByteReader r(file_.bytes().subspan(info.offset, info.length), what);
  const std::uint64_t len = r.get_u64();
  const auto payload = r.get_bytes(len);
  r.check_crc_since(0, "record " + info.entity_id);
  return decode_payload(payload, manifest_.dims, what);
}

std::string ValidationReport::to_json() const {
  nlohmann::json j;
  j["path"] = path;
  j["format"] = format;
  j["ok"] = ok();
  j["records_checked"] = records_checked;
  j["findings"] = nlohmann::json::array();
  for (const auto& f : findings) {
    j["findings"].push_back({{"record", f.record}, {"offset", f.offset}, {"message", f.message}});
  }
  return j.dump();
}

ValidationReport validate_store(const std::string& path_in) {
  ValidationReport rep;
  rep.path = resolve_store_path(path_in);
  rep.format = "WCFT";
  auto add = [&](std::string record, std::uint64_t offset, std::string msg) {
    rep.findings.push_back({std::move(record), offset, std::move(msg)});
  };
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(rep.path);
  } catch (const Error& e) {
    add("header", 0, e.what());
    return rep;
  }
  ByteReader r(bytes, rep.path);
  Header h;
  try {
    h = read_header(r, rep.path);
  } catch (const Error& e) {
    add("header", 0, e.what());
    return rep;
  }

  std::vector<RecordInfo> found;
  std::set<std::string> ids;
  for (std::uint64_t i = 0; i < h.count; ++i) {
    RawRecord rec;
    try {
      rec = read_frame(r);
    } catch (const Error& e) {
      add("#" + std::to_string(i), r.offset(), e.what());
      return rep;
    }
    ++rep.records_checked;
    const std::string id = peek_id(rec.payload, i);
    const std::uint32_t actual =
        crc32(std::span<const std::uint8_t>(bytes).subspan(rec.offset, rec.length - 4));
    if (actual != rec.stored_crc) {
      add(id, rec.offset, "record checksum mismatch");
      continue;
    }
    found.push_back({id, rec.offset, rec.length, rec.stored_crc});
    FeatureBundle b;
    try {
      b = decode_payload(rec.payload, h.dims, "record");
    } catch (const Error& e) {
      add(id, rec.offset, e.what());
      continue;
    }
    if (!ids.insert(b.entity_id).second) add(id, rec.offset, "duplicate entity id");
    if (!all_finite(b.description.tokens)) add(id, rec.offset, "non-finite token embedding");
    for (std::size_t k = 0; k < b.images.size(); ++k) {
      if (!all_finite(b.images[k])) {
        add(id, rec.offset, "non-finite patch features in image " + std::to_string(k));
      }
      const auto& p = b.pooled[k];
      if (!all_finite<float>(p)) {
        add(id, rec.offset, "non-finite pooled vector in image " + std::to_string(k));
        continue;
      }
      double norm = 0;
      for (float x : p) norm += double(x) * double(x);
      norm = std::sqrt(norm);
      if (std::abs(norm - 1.0) > 1e-4) {
        add(id, rec.offset,
            "pooled vector of image " + std::to_string(k) + " has norm " + std::to_string(norm));
      }
    }
  }
  if (r.remaining() != 0) {
    add("trailer", r.offset(), std::to_string(r.remaining()) + " trailing bytes");
  }

  const std::string mpath = manifest_path(rep.path);
  if (std::filesystem::exists(mpath)) {
    try {
      const StoreManifest m = StoreManifest::from_json(read_text_file(mpath));
      if (!(m.dims == h.dims)) add("manifest", 0, "manifest dims differ from store header");
      if (m.records.size() != h.count) add("manifest", 0, "manifest record count differs");
      for (std::size_t i = 1; i < m.records.size(); ++i) {
        if (m.records[i].offset <= m.records[i - 1].offset) {
          add(m.records[i].entity_id, m.records[i].offset, "manifest offsets not increasing");
        }
      }
      for (const auto& f : found) {
        bool match = false;
        for (const auto& mr : m.records) {
          if (mr.offset == f.offset) {
            match = mr == f;
            break;
          }
        }
        if (!match) add(f.entity_id, f.offset, "record disagrees with manifest sidecar");
      }
    } catch (const Error& e) {
      add("manifest", 0, e.what());
    }
  }
  return rep;
}

TokenEmbeddings<float> truncate_tokens(const TokenEmbeddings<float>& t, std::size_t n_t_max) {
  const std::size_t rows = std::min(t.tokens.rows(), n_t_max);
  TokenEmbeddings<float> out;
  out.valid_len = std::min(t.valid_len, n_t_max);
  const auto values = t.tokens.values();
  out.tokens = Matrix<float>(
      rows, t.tokens.cols(),
      std::vector<float>(values.begin(), values.begin() + std::ptrdiff_t(rows * t.tokens.cols())));
  return out;
}

std::string to_string(Split split) { return split == Split::kSeen ? "seen" : "unseen"; }

Split split_from_string(const std::string& name) {
  if (name == "seen") return Split::kSeen;
  if (name == "unseen") return Split::kUnseen;
  throw FormatError("unknown split tag: " + name);
}

std::string query_record_to_json(const QueryRecord& q) {
  nlohmann::json j;
  j["query_id"] = q.query_id;
  j["entity_id"] = q.entity_id;
  j["split"] = to_string(q.split);
  j["vector"] = base64_encode(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(q.vector.data()), q.vector.size() * sizeof(float)));
  return j.dump();
}

QueryRecord query_record_from_json(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    QueryRecord q;
    q.query_id = j.at("query_id");
    q.entity_id = j.value("entity_id", "");
    q.split = split_from_string(j.value("split", "seen"));
    const auto raw = base64_decode(j.at("vector").get<std::string>());
    if (raw.size() % sizeof(float) != 0 || raw.empty()) {
      throw FormatError("query " + q.query_id + ": vector byte length " +
                        std::to_string(raw.size()) + " is not a positive multiple of 4");
    }
    q.vector.resize(raw.size() / sizeof(float));
    std::memcpy(q.vector.data(), raw.data(), raw.size());
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("query record: ") + e.what());
  }
}

void write_query_set(const std::string& path, const QuerySet& queries) {
  std::string text;
  for (const auto& q : queries) text += query_record_to_json(q) + "\n";
  write_text_file(path, text);
}

QuerySet read_query_set(const std::string& path) {
  if (!std::filesystem::exists(path)) throw NotFoundError("query set not found: " + path);
  std::istringstream in(read_text_file(path));
  QuerySet out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(query_record_from_json(line));
    } catch (const FormatError& e) {
      throw FormatError(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace ver
