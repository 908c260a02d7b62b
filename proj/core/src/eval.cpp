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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <map>

#include "ver/parallel.hpp"

namespace ver {

double harmonic_mean(double seen, double unseen) {
  if (seen < 0 || unseen < 0) throw ConfigError("harmonic_mean: rates must be >= 0");
  if (seen + unseen == 0) return 0.0;
  return 2.0 * seen * unseen / (seen + unseen);
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["n_seen"] = n_seen;
  j["n_unseen"] = n_unseen;
  j["top1_seen"] = top1_seen ? nlohmann::json(*top1_seen) : nlohmann::json();
  j["top1_unseen"] = top1_unseen ? nlohmann::json(*top1_unseen) : nlohmann::json();
  j["top1_overall"] = top1_overall;
  j["hm"] = hm ? nlohmann::json(*hm) : nlohmann::json();
  nlohmann::json r = nlohmann::json::object();
  for (const auto& [k, v] : recall) r[std::to_string(k)] = v;
  j["recall"] = r;
  j["flags"] = flags;
  return j.dump();
}

EvalReport eval_retrieval(const EntityIndex& index, const QuerySet& queries,
                          const std::vector<std::size_t>& ks, std::size_t threads) {
  for (const auto& q : queries) {
    if (!index.entity_ordinal(q.entity_id)) {
      throw NotFoundError("query " + q.query_id + ": ground truth " + q.entity_id +
                          " is not in the index");
    }
  }
  std::size_t max_k = 1;
  for (std::size_t k : ks) {
    if (k == 0) throw ConfigError("recall K must be >= 1");
    max_k = std::max(max_k, k);
  }
  // Rank of the ground truth (0-based), or max_k when outside the top max_k.
  std::vector<std::size_t> rank(queries.size(), max_k);
  QueryOptions opts;
  opts.k = max_k;
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    const RetrievalResult r = query(index, queries[i].vector, opts);
    for (std::size_t h = 0; h < r.hits.size(); ++h) {
      if (r.hits[h].entity_id == queries[i].entity_id) {
        rank[i] = h;
        break;
      }
    }
  });

  EvalReport rep;
  std::size_t hit_seen = 0, hit_unseen = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const bool hit = rank[i] == 0;
    if (queries[i].split == Split::kSeen) {
      ++rep.n_seen;
      hit_seen += hit;
    } else {
      ++rep.n_unseen;
      hit_unseen += hit;
    }
  }
  if (rep.n_seen) rep.top1_seen = double(hit_seen) / double(rep.n_seen);
  else rep.flags.push_back("seen split empty");
  if (rep.n_unseen) rep.top1_unseen = double(hit_unseen) / double(rep.n_unseen);
  else rep.flags.push_back("unseen split empty");
  if (rep.top1_seen && rep.top1_unseen) {
    rep.hm = harmonic_mean(*rep.top1_seen, *rep.top1_unseen);
  } else {
    rep.flags.push_back("hm undefined");
  }
  const std::size_t n = queries.size();
  rep.top1_overall = n ? double(hit_seen + hit_unseen) / double(n) : 0.0;
  std::vector<std::size_t> sorted = ks;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (std::size_t k : sorted) {
    std::size_t c = 0;
    for (std::size_t r : rank) c += r < k;
    rep.recall.emplace_back(k, n ? double(c) / double(n) : 0.0);
  }
  return rep;
}

double silhouette_score(const Matrix<float>& emb, std::span<const std::size_t> labels) {
  const std::size_t n = emb.rows();
  if (labels.size() != n) throw DimensionError("silhouette: one label per row required");
  std::map<std::size_t, std::size_t> sizes;
  for (std::size_t l : labels) ++sizes[l];
  if (sizes.size() < 2) throw ConfigError("silhouette: need at least two distinct labels");
  std::vector<std::size_t> dense(n);
  std::map<std::size_t, std::size_t> id;
  for (const auto& [l, c] : sizes) id.emplace(l, id.size());
  for (std::size_t i = 0; i < n; ++i) dense[i] = id[labels[i]];
  std::vector<std::size_t> count(id.size());
  for (std::size_t i = 0; i < n; ++i) ++count[dense[i]];

  std::vector<double> norm(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (float x : emb.row(i)) s += double(x) * double(x);
    norm[i] = std::sqrt(s);
    if (norm[i] == 0) throw DegenerateInputError("silhouette: zero embedding");
  }
  double total = 0;
  std::vector<double> sum(id.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (count[dense[i]] == 1) continue;
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d = 0;
      auto a = emb.row(i), b = emb.row(j);
      for (std::size_t k = 0; k < a.size(); ++k) d += double(a[k]) * double(b[k]);
      sum[dense[j]] += 1.0 - d / (norm[i] * norm[j]);
    }
    const double a = sum[dense[i]] / double(count[dense[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sum.size(); ++c)
      if (c != dense[i]) b = std::min(b, sum[c] / double(count[c]));
    const double m = std::max(a, b);
    total += m > 0 ? (b - a) / m : 0.0;
  }
  return total / double(n);
}

std::pair<Matrix<float>, std::vector<std::size_t>> eval_points_with_labels(
    const EntityIndex& index, const QuerySet& queries) {
  std::vector<bool> wanted(index.entity_count(), false);
  std::vector<std::size_t> query_labels;
  for (const auto& q : queries) {
    const auto e = index.entity_ordinal(q.entity_id);
    if (!e) throw NotFoundError("silhouette: ground truth '" + q.entity_id + "' not in index");
    if (q.vector.size() != index.dim()) throw DimensionError("silhouette: query dim mismatch");
    wanted[*e] = true;
    query_labels.push_back(*e);
  }
  std::size_t n_rows = 0;
  for (std::size_t r = 0; r < index.rows(); ++r) n_rows += wanted[index.row_entity(r)];

  Matrix<float> m(queries.size() + n_rows, index.dim());
  std::vector<std::size_t> labels = query_labels;
  for (std::size_t i = 0; i < queries.size(); ++i)
    std::copy(queries[i].vector.begin(), queries[i].vector.end(), m.row(i).begin());
  std::size_t at = queries.size();
  for (std::size_t r = 0; r < index.rows(); ++r) {
    if (!wanted[index.row_entity(r)]) continue;
    std::copy_n(index.row(r).begin(), index.dim(), m.row(at++).begin());
    labels.push_back(index.row_entity(r));
  }
  return {std::move(m), std::move(labels)};
}

std::vector<AblationConfig> default_ablation_configs() {
  return {
      {"image-only", AdaptorMode::kImageOnly, true, true},
      {"text-only", AdaptorMode::kTextOnly, true, true},
      {"vanilla", AdaptorMode::kFull, false, false},
      {"cluster-only", AdaptorMode::kFull, true, false},
      {"synthetic-only", AdaptorMode::kFull, false, true},
      {"full", AdaptorMode::kFull, true, true},
  };
}

std::vector<AblationRow> ablation_run(const SyntheticKb& kb, const AblationSettings& settings,
                                      const std::vector<AblationConfig>& configs) {
  std::vector<AblationRow> rows;
  for (const auto& cfg : configs) {
    AdaptorConfig ac = settings.adaptor;
    ac.mode = cfg.mode;
    TrainConfig tc = settings.train;
    tc.cluster_batches = cfg.cluster;
    if (!cfg.synthetic) tc.n_sync = 0;
    const TrainingCorpus<float> corpus = build_training_corpus(kb.bundles, kb.train, ac.max_tokens);
    TrainState<float> state = TrainState<float>::initial(ac, tc);
    const TrainReport tr = train(corpus, state, tc);
    EmbedOptions eo;
    eo.threads = tc.threads;
    const EmbedReport emb = embed_bundles(kb.bundles, state.params, eo);

    AblationRow row;
    row.config = cfg;
    row.report = eval_retrieval(emb.index, kb.eval, kDefaultRecallKs, tc.threads);
    const auto [m, labels] = eval_points_with_labels(emb.index, kb.eval);
    row.silhouette = silhouette_score(m, labels);
    row.final_loss = tr.steps.empty() ? 0.0 : tr.steps.back().loss;
    row.steps = tr.steps.size();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  auto pct = [](const std::optional<double>& v) {
    char b[16];
    if (!v) return std::string("    -");
    std::snprintf(b, sizeof b, "%5.1f", 100.0 * *v);
    return std::string(b);
  };
  std::string out =
      "config           mode        cluster synth  seen unseen    HM   R@5  silhouette  loss\n";
  for (const auto& r : rows) {
    char line[256];
    double r5 = 0;
    for (const auto& [k, v] : r.report.recall)
      if (k == 5) r5 = v;
    std::snprintf(line, sizeof line, "%-16s %-11s %-7s %-5s %s  %s %s %5.1f  %10.4f  %.4f\n",
                  r.config.name.c_str(), to_string(r.config.mode).c_str(),
                  r.config.cluster ? "yes" : "no", r.config.synthetic ? "yes" : "no",
                  pct(r.report.top1_seen).c_str(), pct(r.report.top1_unseen).c_str(),
                  pct(r.report.hm).c_str(), 100.0 * r5, r.silhouette, r.final_loss);
    out += line;
  }
  return out;
}

std::string ablation_to_json(const std::vector<AblationRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    j.push_back({{"config", r.config.name},
                 {"mode", to_string(r.config.mode)},
                 {"cluster", r.config.cluster},
                 {"synthetic", r.config.synthetic},
                 {"report", nlohmann::json::parse(r.report.to_json())},
                 {"silhouette", r.silhouette},
                 {"final_loss", r.final_loss},
                 {"steps", r.steps}});
  }
  return j.dump();
}

}  // namespace ver
