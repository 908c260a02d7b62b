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

#include <gtest/gtest.h>

#include <filesystem>
#include <json.hpp>

#include "test_util.hpp"
#include "ver/binary_io.hpp"

namespace ver {
namespace {

using testing::Rng;
using testing::ScratchDir;

constexpr StoreDims kDims{6, 5, 7};

FeatureBundle random_bundle(Rng& rng, const std::string& id, std::size_t images = 2) {
  FeatureBundle b;
  b.entity_id = id;
  b.description.tokens = rng.matrix<float>(kDims.max_tokens, kDims.text_dim);
  b.description.valid_len = 3 + rng.index(5);
  for (std::size_t i = 0; i < images; ++i) {
    b.images.push_back(rng.matrix<float>(1 + rng.index(4), kDims.dim));
    b.pooled.push_back(rng.unit<float>(kDims.dim));
  }
  return b;
}

std::vector<FeatureBundle> random_bundles(Rng& rng, std::size_t n) {
  std::vector<FeatureBundle> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_bundle(rng, "ent-" + std::to_string(i), 1 + i % 3));
  return out;
}

TEST(Crc32, KnownVector) {
  const std::string s = "123456789";
  EXPECT_EQ(crc32({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}), 0xCBF43926u);
}

TEST(Base64, RoundTripAndKnownValue) {
  const std::string s = "hello";
  const std::vector<std::uint8_t> bytes(s.begin(), s.end());
  EXPECT_EQ(base64_encode(bytes), "aGVsbG8=");
  EXPECT_EQ(base64_decode("aGVsbG8="), bytes);
  Rng rng(61);
  for (std::size_t n = 0; n < 40; ++n) {
    std::vector<std::uint8_t> v(n);
    for (auto& b : v) b = std::uint8_t(rng.index(256));
    EXPECT_EQ(base64_decode(base64_encode(v)), v);
  }
  EXPECT_THROW(base64_decode("a$=="), FormatError);
}

TEST(Store, RoundTripIsExact) {
  ScratchDir dir("store");
  Rng rng(62);
  const auto bundles = random_bundles(rng, 9);
  const auto manifest = write_store(dir.file("kb.wcft"), kDims, bundles);
  const auto store = FeatureStore::open(dir.file("kb.wcft"));
  EXPECT_EQ(store.dims(), kDims);
  ASSERT_EQ(store.size(), bundles.size());
  EXPECT_EQ(store.manifest(), manifest);
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    EXPECT_EQ(store.entity_id(i), bundles[i].entity_id);
    EXPECT_EQ(store.read_at(i), bundles[i]);
    EXPECT_EQ(store.read_entity(bundles[i].entity_id), bundles[i]);
  }
  EXPECT_EQ(*store.index_of("ent-4"), 4u);
  EXPECT_FALSE(store.index_of("nope").has_value());
  EXPECT_THROW(store.read_entity("nope"), NotFoundError);
}

TEST(Store, RewriteIsBitIdentical) {
  ScratchDir dir("store");
  Rng rng(63);
  const auto bundles = random_bundles(rng, 5);
  write_store(dir.file("a.wcft"), kDims, bundles);
  const auto store = FeatureStore::open(dir.file("a.wcft"));
  std::vector<FeatureBundle> back;
  for (std::size_t i = 0; i < store.size(); ++i) back.push_back(store.read_at(i));
  write_store(dir.file("b.wcft"), kDims, back);
  EXPECT_EQ(read_file(dir.file("a.wcft")), read_file(dir.file("b.wcft")));
  EXPECT_EQ(read_file(manifest_path(dir.file("a.wcft"))).size(),
            read_file(manifest_path(dir.file("b.wcft"))).size());
}

TEST(Store, ManifestDescribesRecords) {
  ScratchDir dir("store");
  Rng rng(64);
  const auto manifest = write_store(dir.file("kb.wcft"), kDims, random_bundles(rng, 4));
  const auto bytes = read_file(dir.file("kb.wcft"));
  std::uint64_t end = 0;
  for (const auto& r : manifest.records) {
    EXPECT_GE(r.offset, end);
    end = r.offset + r.length;
  }
  EXPECT_EQ(end, bytes.size());
  EXPECT_EQ(StoreManifest::from_json(manifest.to_json()), manifest);
  EXPECT_EQ(StoreManifest::from_json(read_text_file(manifest_path(dir.file("kb.wcft")))), manifest);
}

TEST(Store, DirectoryResolvesToStoreFile) {
  ScratchDir dir("store");
  Rng rng(65);
  write_store(dir.file("store.wcft"), kDims, random_bundles(rng, 2));
  EXPECT_EQ(FeatureStore::open(dir.path().string()).size(), 2u);
  EXPECT_THROW(FeatureStore::open(dir.file("missing.wcft")), NotFoundError);
}

TEST(Store, IngestionErrors) {
  ScratchDir dir("store");
  Rng rng(66);
  auto bundles = random_bundles(rng, 3);
  bundles[2].entity_id = bundles[0].entity_id;
  EXPECT_THROW(write_store(dir.file("dup.wcft"), kDims, bundles), IngestionError);
  bundles = random_bundles(rng, 3);
  bundles[1].images[0] = rng.matrix<float>(2, kDims.dim + 1);
  EXPECT_THROW(write_store(dir.file("dim.wcft"), kDims, bundles), IngestionError);
  bundles = random_bundles(rng, 3);
  bundles[0].description.tokens = rng.matrix<float>(kDims.max_tokens + 1, kDims.text_dim);
  EXPECT_THROW(write_store(dir.file("tok.wcft"), kDims, bundles), IngestionError);
}

TEST(Store, ValidateCleanStore) {
  ScratchDir dir("store");
  Rng rng(67);
  write_store(dir.file("kb.wcft"), kDims, random_bundles(rng, 6));
  const auto rep = validate_store(dir.file("kb.wcft"));
  EXPECT_TRUE(rep.ok()) << rep.to_json();
  EXPECT_EQ(rep.records_checked, 6u);
  EXPECT_EQ(rep.format, "WCFT");
}

TEST(Store, ValidateLocatesEverySingleByteFlip) {
  ScratchDir dir("store");
  Rng rng(68);
  write_store(dir.file("kb.wcft"), kDims, random_bundles(rng, 6));
  const auto good = read_file(dir.file("kb.wcft"));
  const auto manifest = read_file(manifest_path(dir.file("kb.wcft")));
  for (int t = 0; t < 100; ++t) {
    auto bad = good;
    const std::size_t at = rng.index(bad.size());
    bad[at] ^= std::uint8_t(1 + rng.index(255));
    write_file(dir.file("bad.wcft"), bad);
    write_file(manifest_path(dir.file("bad.wcft")), manifest);
    const auto rep = validate_store(dir.file("bad.wcft"));
    ASSERT_FALSE(rep.ok()) << "flip at " << at << " not detected";
    EXPECT_FALSE(rep.findings[0].record.empty());
    EXPECT_FALSE(rep.findings[0].message.empty());
  }
}

TEST(Store, ValidateReportsTruncationAndBadMagic) {
  ScratchDir dir("store");
  Rng rng(69);
  write_store(dir.file("kb.wcft"), kDims, random_bundles(rng, 3));
  auto bytes = read_file(dir.file("kb.wcft"));
  auto cut = bytes;
  cut.resize(cut.size() - 5);
  write_file(dir.file("kb.wcft"), cut);
  EXPECT_FALSE(validate_store(dir.file("kb.wcft")).ok());
  bytes[0] = 'X';
  write_file(dir.file("kb.wcft"), bytes);
  const auto rep = validate_store(dir.file("kb.wcft"));
  ASSERT_FALSE(rep.ok());
  EXPECT_EQ(rep.findings[0].record, "header");
  EXPECT_THROW(FeatureStore::open(dir.file("kb.wcft")), FormatError);
  EXPECT_FALSE(validate_store(dir.file("absent.wcft")).ok());
}

TEST(Store, DamagedRecordThrowsChecksumOnRead) {
  ScratchDir dir("store");
  Rng rng(70);
  const auto manifest = write_store(dir.file("kb.wcft"), kDims, random_bundles(rng, 3));
  auto bytes = read_file(dir.file("kb.wcft"));
  bytes[manifest.records[1].offset + 20] ^= 0x40;
  write_file(dir.file("kb.wcft"), bytes);
  const auto store = FeatureStore::open(dir.file("kb.wcft"));
  EXPECT_NO_THROW(store.read_at(0));
  EXPECT_THROW(store.read_at(1), FormatError);
}

TEST(TruncateTokens, KeepsPrefixAndPadding) {
  Rng rng(71);
  TokenEmbeddings<float> t{rng.matrix<float>(10, 3), 8};
  const auto a = truncate_tokens(t, 5);
  EXPECT_EQ(a.valid_len, 5u);
  EXPECT_EQ(a.tokens.rows(), 5u);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(a.tokens(r, c), t.tokens(r, c));
  const auto b = truncate_tokens(t, 9);
  EXPECT_EQ(b.valid_len, 8u);
  EXPECT_EQ(b.tokens.rows(), 9u);
  const auto c = truncate_tokens(t, 256);
  EXPECT_EQ(c.valid_len, 8u);
  EXPECT_EQ(c.tokens.rows(), 10u);
}

TEST(QuerySet, JsonLinesRoundTrip) {
  ScratchDir dir("queries");
  Rng rng(72);
  QuerySet qs;
  for (int i = 0; i < 20; ++i) {
    qs.push_back({"q" + std::to_string(i), rng.unit<float>(7), "ent-" + std::to_string(i % 4),
                  i % 3 ? Split::kSeen : Split::kUnseen});
  }
  write_query_set(dir.file("q.jsonl"), qs);
  EXPECT_EQ(read_query_set(dir.file("q.jsonl")), qs);
  const auto j = nlohmann::json::parse(query_record_to_json(qs[0]));
  EXPECT_TRUE(j["vector"].is_string());
  EXPECT_EQ(j["split"], "unseen");
  EXPECT_EQ(query_record_from_json(query_record_to_json(qs[5])), qs[5]);
  EXPECT_THROW(query_record_from_json("{\"query_id\": 3}"), FormatError);
  EXPECT_THROW(split_from_string("train"), FormatError);
  EXPECT_THROW(read_query_set(dir.file("none.jsonl")), NotFoundError);
}

}  // namespace
}  // namespace ver
