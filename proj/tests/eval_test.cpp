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

#include "ver/eval.hpp"

#include <gtest/gtest.h>

#include <json.hpp>
#include <numeric>

#include "test_util.hpp"

namespace ver {
namespace {

using testing::Rng;

TEST(HarmonicMean, PublishedAnchors) {
  EXPECT_NEAR(harmonic_mean(36.8, 27.0), 31.1, 0.05);
  EXPECT_NEAR(harmonic_mean(61.5, 21.7), 32.1, 0.05);
}

TEST(HarmonicMean, Properties) {
  EXPECT_EQ(harmonic_mean(0, 0), 0.0);
  EXPECT_EQ(harmonic_mean(0.4, 0), 0.0);
  EXPECT_DOUBLE_EQ(harmonic_mean(0.3, 0.3), 0.3);
  Rng rng(91);
  for (int t = 0; t < 200; ++t) {
    const double a = rng.uniform(0, 1), b = rng.uniform(0, 1);
    const double h = harmonic_mean(a, b);
    EXPECT_DOUBLE_EQ(h, harmonic_mean(b, a));
    EXPECT_LE(h, (a + b) / 2 + 1e-15);
    EXPECT_GE(h, std::min(a, b) - 1e-15);
    EXPECT_NEAR(1 / h, (1 / a + 1 / b) / 2, 1e-9 / h);
  }
  EXPECT_THROW(harmonic_mean(-0.1, 0.2), ConfigError);
}

struct Fixture {
  EntityIndex index{6};
  QuerySet queries;
};

Fixture random_fixture(Rng& rng, std::size_t entities, std::size_t n_queries) {
  Fixture f;
  std::vector<Vector<float>> codes;
  for (std::size_t e = 0; e < entities; ++e) {
    codes.push_back(rng.unit<float>(6));
    f.index.add("ent" + std::to_string(e), 0, codes.back());
  }
  for (std::size_t i = 0; i < n_queries; ++i) {
    const std::size_t e = rng.index(entities);
    Vector<float> v = codes[e];
    for (float& x : v) x += float(0.5 * rng.normal());
    f.queries.push_back({"q" + std::to_string(i), v, "ent" + std::to_string(e),
                         i % 2 ? Split::kSeen : Split::kUnseen});
  }
  return f;
}

TEST(EvalRetrieval, MatchesCountingOracle) {
  Rng rng(92);
  const auto f = random_fixture(rng, 30, 200);
  const std::vector<std::size_t> ks = {1, 3, 10};
  const auto rep = eval_retrieval(f.index, f.queries, ks);
  // Count directly from full rankings.
  std::size_t seen = 0, seen_hit = 0, unseen_hit = 0;
  std::vector<std::size_t> within(ks.size(), 0);
  for (const auto& q : f.queries) {
    const auto r = query(f.index, q.vector, {.k = 30});
    std::size_t rank = 0;
    while (r.hits[rank].entity_id != q.entity_id) ++rank;
    if (q.split == Split::kSeen) {
      ++seen;
      seen_hit += rank == 0;
    } else {
      unseen_hit += rank == 0;
    }
    for (std::size_t i = 0; i < ks.size(); ++i) within[i] += rank < ks[i];
  }
  const std::size_t unseen = f.queries.size() - seen;
  EXPECT_EQ(rep.n_seen, seen);
  EXPECT_EQ(rep.n_unseen, unseen);
  EXPECT_DOUBLE_EQ(*rep.top1_seen, double(seen_hit) / seen);
  EXPECT_DOUBLE_EQ(*rep.top1_unseen, double(unseen_hit) / unseen);
  EXPECT_DOUBLE_EQ(rep.top1_overall, double(seen_hit + unseen_hit) / f.queries.size());
  EXPECT_DOUBLE_EQ(*rep.hm, harmonic_mean(*rep.top1_seen, *rep.top1_unseen));
  ASSERT_EQ(rep.recall.size(), 3u);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    EXPECT_EQ(rep.recall[i].first, ks[i]);
    EXPECT_DOUBLE_EQ(rep.recall[i].second, double(within[i]) / f.queries.size());
  }
  EXPECT_DOUBLE_EQ(rep.recall[0].second, rep.top1_overall);
  EXPECT_TRUE(rep.flags.empty());
}

TEST(EvalRetrieval, RecallMonotoneInK) {
  Rng rng(93);
  const auto f = random_fixture(rng, 50, 100);
  const auto rep = eval_retrieval(f.index, f.queries, {1, 2, 5, 10, 20, 50});
  for (std::size_t i = 1; i < rep.recall.size(); ++i)
    EXPECT_LE(rep.recall[i - 1].second, rep.recall[i].second);
  EXPECT_DOUBLE_EQ(rep.recall.back().second, 1.0);
}

TEST(EvalRetrieval, EmptySplitIsFlagged) {
  Rng rng(94);
  auto f = random_fixture(rng, 5, 10);
  for (auto& q : f.queries) q.split = Split::kSeen;
  const auto rep = eval_retrieval(f.index, f.queries, {1});
  EXPECT_FALSE(rep.top1_unseen.has_value());
  EXPECT_FALSE(rep.hm.has_value());
  EXPECT_EQ(rep.flags.size(), 2u);
  const auto j = nlohmann::json::parse(rep.to_json());
  EXPECT_TRUE(j.contains("top1_overall"));
}

TEST(EvalRetrieval, Errors) {
  Rng rng(95);
  auto f = random_fixture(rng, 5, 4);
  EXPECT_THROW(eval_retrieval(f.index, f.queries, {0}), ConfigError);
  f.queries[2].entity_id = "ghost";
  EXPECT_THROW(eval_retrieval(f.index, f.queries), NotFoundError);
}

// Direct O(n^2) silhouette with cosine distance.
double silhouette_oracle(const Matrix<float>& x, const std::vector<std::size_t>& labels) {
  const std::size_t n = x.rows();
  auto dist = [&](std::size_t i, std::size_t j) {
    double dot = 0, ni = 0, nj = 0;
    for (std::size_t d = 0; d < x.cols(); ++d) {
      dot += double(x(i, d)) * x(j, d);
      ni += double(x(i, d)) * x(i, d);
      nj += double(x(j, d)) * x(j, d);
    }
    return 1 - dot / std::sqrt(ni * nj);
  };
  const std::size_t n_labels = *std::max_element(labels.begin(), labels.end()) + 1;
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> sum(n_labels, 0);
    std::vector<std::size_t> cnt(n_labels, 0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum[labels[j]] += dist(i, j);
      ++cnt[labels[j]];
    }
    if (cnt[labels[i]] == 0) continue;
    const double a = sum[labels[i]] / cnt[labels[i]];
    double b = 1e300;
    for (std::size_t l = 0; l < n_labels; ++l)
      if (l != labels[i] && cnt[l]) b = std::min(b, sum[l] / cnt[l]);
    total += (b - a) / std::max(a, b);
  }
  return total / n;
}

TEST(Silhouette, HandComputedFourPoints) {
  // Two pairs on orthogonal axes: a = 0 within pairs, b = 1 across.
  Matrix<float> x{{1, 0}, {2, 0}, {0, 1}, {0, 3}};
  const std::vector<std::size_t> labels = {0, 0, 1, 1};
  EXPECT_NEAR(silhouette_score(x, labels), 1.0, 1e-6);
  // Mixed pairs: a = 1 and b = (0 + 1) / 2 for every point.
  const std::vector<std::size_t> swapped = {0, 1, 0, 1};
  EXPECT_NEAR(silhouette_score(x, swapped), -0.5, 1e-6);
}

TEST(Silhouette, MatchesDirectOracle) {
  Rng rng(96);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 10 + rng.index(40);
    const auto x = rng.matrix<float>(n, 5);
    std::vector<std::size_t> labels(n);
    for (auto& l : labels) l = rng.index(4);
    labels[0] = 0;
    labels[1] = 1;
    EXPECT_NEAR(silhouette_score(x, labels), silhouette_oracle(x, labels), 1e-6);
  }
}

TEST(Silhouette, RandomLabelsNearZeroAndRotationInvariant) {
  Rng rng(97);
  const auto x = rng.matrix<float>(400, 8);
  std::vector<std::size_t> labels(400);
  for (auto& l : labels) l = rng.index(5);
  EXPECT_NEAR(silhouette_score(x, labels), 0.0, 0.05);
  // Swap two coordinates and flip one sign: an orthogonal map.
  Matrix<float> y = x;
  for (std::size_t i = 0; i < 400; ++i) {
    std::swap(y(i, 0), y(i, 3));
    y(i, 5) = -y(i, 5);
  }
  EXPECT_NEAR(silhouette_score(x, labels), silhouette_score(y, labels), 1e-6);
}

TEST(Silhouette, SingleLabelThrows) {
  Matrix<float> x{{1, 0}, {0, 1}};
  const std::vector<std::size_t> labels = {3, 3};
  EXPECT_THROW(silhouette_score(x, labels), ConfigError);
}

TEST(EvalPoints, QueriesFirstThenTargetRows) {
  EntityIndex index(2);
  index.add("a", 0, std::vector<float>{1, 0});
  index.add("b", 0, std::vector<float>{0, 1});
  index.add("b", 1, std::vector<float>{0.6f, 0.8f});
  index.add("c", 0, std::vector<float>{-1, 0});
  const QuerySet qs = {{"q0", {2, 0}, "a", Split::kSeen}, {"q1", {0, 1}, "b", Split::kUnseen}};
  const auto [pts, labels] = eval_points_with_labels(index, qs);
  ASSERT_EQ(pts.rows(), 5u);
  EXPECT_EQ(labels, (std::vector<std::size_t>{0, 1, 0, 1, 1}));
  EXPECT_FLOAT_EQ(pts(0, 0), 2.0f);
  const QuerySet bad = {{"q", {1, 0}, "zz", Split::kSeen}};
  EXPECT_THROW(eval_points_with_labels(index, bad), NotFoundError);
}

TEST(Ablation, DefaultConfigsCoverTheTable) {
  const auto configs = default_ablation_configs();
  ASSERT_EQ(configs.size(), 6u);
  std::vector<std::string> names;
  for (const auto& c : configs) names.push_back(c.name);
  EXPECT_EQ(names.back(), "full");
  EXPECT_TRUE(configs.back().cluster && configs.back().synthetic);
}

TEST(Ablation, RunsAndFormatsTinyTable) {
  SynthSpec spec;
  spec.n_entities = 16;
  spec.n_seen = 8;
  spec.train_queries_per_entity = 4;
  spec.dim = 8;
  spec.text_dim = 6;
  spec.patches = 2;
  spec.tokens = 4;
  spec.code_rank = 4;
  const auto kb = gen_synthetic_kb(spec);
  AblationSettings s;
  s.adaptor.dim = 8;
  s.adaptor.text_dim = 6;
  s.adaptor.heads = 2;
  s.adaptor.layers = 1;
  s.train.batch_size = 4;
  s.train.n_sync = 2;
  s.train.epochs = 1;
  auto configs = default_ablation_configs();
  const auto rows = ablation_run(kb, s, {configs.front(), configs.back()});
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_GT(r.steps, 0u);
    EXPECT_TRUE(std::isfinite(r.final_loss));
    EXPECT_GE(r.silhouette, -1.0);
    EXPECT_LE(r.silhouette, 1.0);
  }
  const auto table = format_ablation_table(rows);
  EXPECT_NE(table.find("full"), std::string::npos);
  const auto j = nlohmann::json::parse(ablation_to_json(rows));
  EXPECT_EQ(j.size(), 2u);
}

}  // namespace
}  // namespace ver
