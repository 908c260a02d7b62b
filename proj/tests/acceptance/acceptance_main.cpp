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

// Acceptance suite for the retrieval engine. Prints one PASS/FAIL line per
// criterion and exits non-zero if any criterion fails.

#include <sys/wait.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hard_negative_oracle.hpp"
#include "test_util.hpp"
#include "ver/batch_synth.hpp"
#include "ver/binary_io.hpp"
#include "ver/eval.hpp"
#include "ver/gradcheck.hpp"
#include "ver/kb_store.hpp"
#include "ver/parallel.hpp"
#include "ver/retrieval.hpp"
#include "ver/synth.hpp"
#include "ver/trainer.hpp"

namespace fs = std::filesystem;

namespace ver::acceptance {
namespace {

using testing::Rng;
using testing::ScratchDir;

// Pinned tolerances.
constexpr double kGradTolerance = 1e-4;
constexpr double kGradSeconds = 60;
constexpr double kLossTolerance = 1e-9;
constexpr double kHmTolerance = 0.05;
constexpr double kSeenTop1 = 0.85;
constexpr double kUnseenTop1 = 0.50;
constexpr double kUntrainedTop1 = 0.05;
constexpr double kRecoverySeconds = 600;
constexpr std::size_t kAblationWins = 4;
constexpr double kScoreTolerance = 1e-6;
constexpr double kIvfRecall = 0.95;
constexpr double kP50Ms = 100;
constexpr double kScaling = 3.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int precision = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << x;
  return s.str();
}

std::string sci(double x) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(2) << x;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Training settings used by the end-to-end criteria.
AdaptorConfig recovery_adaptor(const SynthSpec& spec) {
  AdaptorConfig c;
  c.dim = spec.dim;
  c.text_dim = spec.text_dim;
  c.heads = 4;
  c.layers = 2;
  return c;
}

TrainConfig recovery_train(std::uint64_t seed) {
  TrainConfig t;
  t.batch_size = 8;
  t.n_sync = 7;
  t.lr = 5e-3;
  t.epochs = 1;
  t.seed = seed;
  t.threads = default_thread_count();
  return t;
}

// ------------------------------------------------------------ criterion 1

Outcome gradient_suite() {
  GradcheckConfig c;  // B=3, D=8, D_t=12, N_p=2, N_t=4, 1 head, 2 layers
  c.tolerance = kGradTolerance;
  const auto t0 = std::chrono::steady_clock::now();
  const GradcheckReport r = run_gradcheck(c);
  const double secs = seconds_since(t0);
  const bool pass = r.passed && r.max_rel_error <= kGradTolerance && secs < kGradSeconds &&
                    r.checked > 0;
  return {pass, "max_rel_error=" + sci(r.max_rel_error) + " (worst " +
                    r.worst_tensor + "[" + std::to_string(r.worst_index) + "]), checked=" +
                    std::to_string(r.checked) + ", substitutions=" + std::to_string(r.replaced) +
                    ", " + fmt(secs, 2) + "s"};
}

// ------------------------------------------------------------ criterion 2

double direct_cross_entropy(const Matrix<double>& q, const Matrix<double>& pool,
                            const std::vector<std::size_t>& pos,
                            const std::vector<std::vector<std::size_t>>& neg, double tau) {
  double total = 0;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    auto logit = [&](std::size_t r) {
      double s = 0;
      for (std::size_t d = 0; d < q.cols(); ++d) s += q(i, d) * pool(r, d);
      return s / tau;
    };
    std::vector<double> z = {logit(pos[i])};
    for (std::size_t r : neg[i]) z.push_back(logit(r));
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0;
    for (double v : z) sum += std::exp(v - m);
    total += -(z[0] - m - std::log(sum));
  }
  return total / double(q.rows());
}

Outcome loss_oracle() {
  Rng rng(2);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t b = 2 + rng.index(15), d = 2 + rng.index(30);
    const auto q = rng.matrix<double>(b, d, 0.4);
    const auto pool = rng.matrix<double>(b + rng.index(8), d, 0.4);
    std::vector<std::size_t> pos(b);
    std::vector<std::vector<std::size_t>> neg(b);
    for (std::size_t i = 0; i < b; ++i) {
      pos[i] = rng.index(pool.rows());
      const std::size_t n = rng.index(pool.rows());
      for (std::size_t k = 0; k < n; ++k) neg[i].push_back(rng.index(pool.rows()));
    }
    const double tau = rng.uniform(0.01, 1.0);
    const double got = infonce_loss<double>(q, pool, pos, neg, tau).loss;
    worst = std::max(worst, std::abs(got - direct_cross_entropy(q, pool, pos, neg, tau)));
  }
  double worst_uniform = 0;
  for (std::size_t b : {2, 3, 8, 64, 128}) {
    const Matrix<double> q(b, 16, 0.25);
    const Matrix<double> pool(b, 16, 0.25);
    std::vector<std::size_t> pos(b);
    std::vector<std::vector<std::size_t>> neg(b);
    for (std::size_t i = 0; i < b; ++i) {
      pos[i] = i;
      for (std::size_t j = 0; j < b; ++j)
        if (j != i) neg[i].push_back(j);
    }
    const double got = infonce_loss<double>(q, pool, pos, neg, 0.07).loss;
    worst_uniform = std::max(worst_uniform, std::abs(got - std::log(double(b))));
  }
  return {worst <= kLossTolerance && worst_uniform <= kLossTolerance,
          "max |loss - direct CE| over 100 instances=" + sci(worst) +
              ", max |uniform - ln B|=" + sci(worst_uniform)};
}

// ------------------------------------------------------------ criterion 3

Outcome hard_negative_invariants() {
  Rng rng(3);
  std::size_t violations = 0, oracle_checked = 0, oracle_mismatch = 0, replaced_total = 0;
  double worst_loss_drop = 0;
  const std::size_t dim = 16;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t b = 2 + rng.index(11);
    const std::size_t n_sync = rng.index(std::min<std::size_t>(b - 1, 8) + 1);
    // One query's view of a batch: positive, B - 1 in-batch negatives and
    // n_sync synthetics, all unit vectors.
    Matrix<double> pool(1 + (b - 1) + n_sync, dim);
    for (std::size_t r = 0; r < pool.rows(); ++r) {
      const auto u = rng.unit<double>(dim);
      std::copy(u.begin(), u.end(), pool.row(r).begin());
    }
    Matrix<double> q(1, dim);
    {
      const auto u = rng.unit<double>(dim);
      std::copy(u.begin(), u.end(), q.row(0).begin());
    }
    auto sim = [&](std::size_t r) {
      double s = 0;
      for (std::size_t d = 0; d < dim; ++d) s += q(0, d) * pool(r, d);
      return s;
    };
    std::vector<double> orig(b - 1), syn(n_sync);
    for (std::size_t i = 0; i < b - 1; ++i) orig[i] = sim(1 + i);
    for (std::size_t s = 0; s < n_sync; ++s) syn[s] = sim(b + s);
    const HardNegativeSelection sel = select_hard_negatives(orig, syn);

    if (sel.slots.size() != b - 1) ++violations;
    std::set<std::size_t> used;
    std::vector<std::size_t> without, with;
    for (std::size_t i = 0; i < sel.slots.size(); ++i) {
      without.push_back(1 + i);
      const auto& slot = sel.slots[i];
      if (slot.synthetic) {
        if (!(syn[*slot.synthetic] > orig[i])) ++violations;
        if (!used.insert(*slot.synthetic).second) ++violations;
        with.push_back(b + *slot.synthetic);
      } else {
        with.push_back(1 + i);
      }
    }
    if (with.size() != without.size()) ++violations;
    replaced_total += sel.replaced;

    const std::vector<std::size_t> pos = {0};
    const double tau = rng.uniform(0.02, 0.5);
    const double l_with = infonce_loss<double>(q, pool, pos, {with}, tau).loss;
    const double l_without = infonce_loss<double>(q, pool, pos, {without}, tau).loss;
    worst_loss_drop = std::max(worst_loss_drop, l_without - l_with);
    if (l_with < l_without) ++violations;

    if (b <= 6 && n_sync <= 3) {
      ++oracle_checked;
      const auto best = testing::exhaustive_best_pattern(orig, syn);
      if (!testing::selection_matches_pattern(sel, orig, syn, best)) ++oracle_mismatch;
    }
  }

  // The same property through the training step on real batches.
  SynthSpec spec;
  spec.n_entities = 48;
  spec.n_seen = 24;
  spec.train_queries_per_entity = 2;
  spec.dim = 16;
  spec.text_dim = 12;
  spec.patches = 4;
  spec.tokens = 8;
  spec.code_rank = 8;
  const auto kb = gen_synthetic_kb(spec);
  const auto corpus = build_training_corpus(kb.bundles, kb.train, 8);
  AdaptorConfig ac;
  ac.dim = 16;
  ac.text_dim = 12;
  ac.heads = 2;
  ac.layers = 1;
  const auto params = init_params<float>(ac, 3);
  TrainConfig tc;
  tc.batch_size = 6;
  tc.n_sync = 3;
  std::size_t step_violations = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < 6; ++i) members.push_back((s * 7 + i * 8) % corpus.entities.size());
    const auto batch = make_batch(corpus, members, 3, s);
    const auto r = step_gradients(batch, params, std::log(1 / 0.07f), tc);
    if (r.loss < r.loss_without_substitution) ++step_violations;
  }

  const bool pass = violations == 0 && oracle_mismatch == 0 && step_violations == 0 &&
                    oracle_checked > 0;
  return {pass, "1000 instances: violations=" + std::to_string(violations) +
                    ", substitutions=" + std::to_string(replaced_total) +
                    ", max(loss_without - loss_with)=" + sci(worst_loss_drop) +
                    "; exhaustive oracle " + std::to_string(oracle_checked - oracle_mismatch) +
                    "/" + std::to_string(oracle_checked) + "; training-step violations " +
                    std::to_string(step_violations) + "/50"};
}

// ------------------------------------------------------------ criterion 4

Outcome metric_anchors() {
  const double a = harmonic_mean(36.8, 27.0), b = harmonic_mean(61.5, 21.7);
  return {std::abs(a - 31.1) <= kHmTolerance && std::abs(b - 32.1) <= kHmTolerance,
          "hm(36.8, 27.0)=" + fmt(a) + " (want 31.1), hm(61.5, 21.7)=" + fmt(b) +
              " (want 32.1)"};
}

// ------------------------------------------------------------ criterion 5

Outcome planted_recovery() {
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed : {7, 11, 13}) {
    SynthSpec spec;  // 256 entities, 64 seen, 20 queries each, D=64, D_t=96
    spec.seed = seed;
    const auto kb = gen_synthetic_kb(spec);
    const AdaptorConfig ac = recovery_adaptor(spec);
    const TrainConfig tc = recovery_train(seed);

    auto state = TrainState<float>::initial(ac, tc);
    EmbedOptions eo;
    eo.threads = tc.threads;
    const auto before = eval_retrieval(embed_bundles(kb.bundles, state.params, eo).index, kb.eval,
                                       {1}, tc.threads);

    const auto t0 = std::chrono::steady_clock::now();
    const auto corpus = build_training_corpus(kb.bundles, kb.train, ac.max_tokens);
    const auto report = train(corpus, state, tc);
    const double secs = seconds_since(t0);
    const auto after = eval_retrieval(embed_bundles(kb.bundles, state.params, eo).index, kb.eval,
                                      {1}, tc.threads);

    const bool ok = *after.top1_seen >= kSeenTop1 && *after.top1_unseen >= kUnseenTop1 &&
                    *before.top1_seen <= kUntrainedTop1 &&
                    *before.top1_unseen <= kUntrainedTop1 && secs <= kRecoverySeconds;
    pass = pass && ok;
    detail += "\n    seed " + std::to_string(seed) + ": seen=" + fmt(*after.top1_seen) +
              " unseen=" + fmt(*after.top1_unseen) + " untrained seen=" +
              fmt(*before.top1_seen) + " unseen=" + fmt(*before.top1_unseen) + " steps=" +
              std::to_string(report.steps.size()) + " train " + fmt(secs, 1) + "s" +
              (ok ? "" : "  <- miss");
  }
  return {pass, "seeds 7/11/13" + detail};
}

// ------------------------------------------------------------ criterion 6

Outcome ablation_direction() {
  std::size_t top1_wins = 0, sil_wins = 0;
  std::ostringstream table;
  table << "\n    seed  vanilla_top1  full_top1  vanilla_sil  full_sil";
  std::vector<AblationConfig> configs;
  for (const auto& c : default_ablation_configs())
    if (c.name == "vanilla" || c.name == "full") configs.push_back(c);
  if (configs.size() != 2) return {false, "vanilla/full configs not found"};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthSpec spec;
    spec.confusable_pairs = true;
    spec.seed = seed;
    const auto kb = gen_synthetic_kb(spec);
    AblationSettings st;
    st.adaptor = recovery_adaptor(spec);
    st.train = recovery_train(seed);
    const auto rows = ablation_run(kb, st, configs);
    const auto& vanilla = rows[0].config.name == "vanilla" ? rows[0] : rows[1];
    const auto& full = rows[0].config.name == "full" ? rows[0] : rows[1];
    top1_wins += full.report.top1_overall > vanilla.report.top1_overall;
    sil_wins += full.silhouette > vanilla.silhouette;
    table << "\n    " << std::setw(4) << seed << "  " << std::setw(12)
          << fmt(vanilla.report.top1_overall) << "  " << std::setw(9)
          << fmt(full.report.top1_overall) << "  " << std::setw(11) << fmt(vanilla.silhouette)
          << "  " << std::setw(8) << fmt(full.silhouette);
  }
  return {top1_wins >= kAblationWins && sil_wins >= kAblationWins,
          "full beats vanilla: top-1 " + std::to_string(top1_wins) + "/5, silhouette " +
              std::to_string(sil_wins) + "/5" + table.str()};
}

// ------------------------------------------------------------ criterion 7

// Clustered index: entities attach to one of `n_centers` directions.
EntityIndex clustered_index(Rng& rng, std::size_t entities, std::size_t images, std::size_t dim,
                            std::size_t n_centers, double spread) {
  std::vector<Vector<float>> centers;
  for (std::size_t c = 0; c < n_centers; ++c) centers.push_back(rng.unit<float>(dim));
  EntityIndex index(dim);
  char id[32];
  for (std::size_t e = 0; e < entities; ++e) {
    const auto& c = centers[rng.index(n_centers)];
    std::snprintf(id, sizeof id, "Q%06zu", e);
    for (std::size_t k = 0; k < images; ++k) {
      Vector<float> v(dim);
      for (std::size_t d = 0; d < dim; ++d) v[d] = c[d] + float(spread * rng.normal() / std::sqrt(dim));
      index.add(id, std::uint32_t(k), l2_normalize<float>(v));
    }
  }
  return index;
}

struct OracleHit {
  std::string id;
  double score;
  std::uint32_t image;
};

// Double-precision double loop: every row, then per-entity maximum.
std::vector<OracleHit> brute_force(const EntityIndex& index, const Vector<float>& h,
                                   std::size_t k) {
  double norm = 0;
  for (float x : h) norm += double(x) * x;
  norm = std::sqrt(norm);
  std::vector<OracleHit> best(index.entity_count(), {"", -1e300, 0});
  for (std::size_t r = 0; r < index.rows(); ++r) {
    double s = 0;
    for (std::size_t d = 0; d < index.dim(); ++d) s += double(index.row(r)[d]) * (h[d] / norm);
    auto& b = best[index.row_entity(r)];
    if (s > b.score) b = {index.entity_id(index.row_entity(r)), s, index.row_image(r)};
  }
  std::sort(best.begin(), best.end(), [](const OracleHit& a, const OracleHit& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  best.resize(std::min(k, best.size()));
  return best;
}

Outcome retrieval_exactness() {
  Rng rng(7);
  const std::size_t dim = 64, k = 10;
  EntityIndex exact = clustered_index(rng, 5000, 2, dim, 100, 0.6);
  // Rows per entity, for the per-entity scan.
  std::vector<std::vector<std::size_t>> rows_of(exact.entity_count());
  for (std::size_t r = 0; r < exact.rows(); ++r) rows_of[exact.row_entity(r)].push_back(r);

  std::size_t set_mismatch = 0, entity_mismatch = 0;
  double worst_score = 0;
  for (int t = 0; t < 200; ++t) {
    const Vector<float> h = rng.unit<float>(dim);
    const auto got = query(exact, h, {.k = k});
    const auto want = brute_force(exact, h, k);
    std::set<std::string> a, b;
    for (std::size_t i = 0; i < got.hits.size(); ++i) {
      a.insert(got.hits[i].entity_id);
      worst_score = std::max(worst_score, std::abs(double(got.hits[i].score) - want[i].score));
    }
    for (const auto& w : want) b.insert(w.id);
    // A set difference is tolerated only across a near-tie at the cut-off.
    if (a != b && std::abs(want.back().score - double(got.hits.back().score)) > kScoreTolerance)
      ++set_mismatch;
    // Per-entity scan: each hit's score and image are its own best row.
    for (const auto& hit : got.hits) {
      const std::size_t e = *exact.entity_ordinal(hit.entity_id);
      double best = -1e300;
      std::uint32_t image = 0;
      for (std::size_t r : rows_of[e]) {
        const double s = row_dot(l2_normalize<float>(h), exact.row(r));
        if (s > best) best = s, image = exact.row_image(r);
      }
      if (std::abs(best - hit.score) > kScoreTolerance || image != hit.image_id) ++entity_mismatch;
    }
  }

  EntityIndex ivf = exact;
  const std::size_t n_lists = std::size_t(std::sqrt(double(exact.rows())));
  build_ivf(ivf, n_lists, 7, n_lists / 8, default_thread_count());
  std::size_t full_probe_mismatch = 0, top1_agree = 0;
  const std::size_t n_recall = 500;
  for (std::size_t t = 0; t < n_recall; ++t) {
    // Queries near stored rows.
    const std::size_t r = rng.index(exact.rows());
    Vector<float> h(exact.row(r).begin(), exact.row(r).end());
    for (float& x : h) x += float(0.3 * rng.normal() / std::sqrt(dim));
    const auto e = query(exact, h, {.k = k});
    const auto full = query(ivf, h, {.k = k, .n_probe = n_lists});
    for (std::size_t i = 0; i < e.hits.size(); ++i)
      if (e.hits[i].entity_id != full.hits[i].entity_id || e.hits[i].score != full.hits[i].score)
        ++full_probe_mismatch;
    const auto probed = query(ivf, h, {.k = 1});
    top1_agree += !probed.hits.empty() && probed.hits[0].entity_id == e.hits[0].entity_id;
  }
  const double recall = double(top1_agree) / double(n_recall);
  const bool pass = set_mismatch == 0 && entity_mismatch == 0 && worst_score <= kScoreTolerance &&
                    full_probe_mismatch == 0 && recall >= kIvfRecall;
  return {pass, std::to_string(exact.rows()) + " rows: top-" + std::to_string(k) +
                    " set mismatches " + std::to_string(set_mismatch) + "/200, max score err " +
                    sci(worst_score) + ", per-entity mismatches " +
                    std::to_string(entity_mismatch) + "; IVF n_lists=" + std::to_string(n_lists) +
                    " full-probe mismatches " + std::to_string(full_probe_mismatch) +
                    ", recall@1 at n_probe=" + std::to_string(n_lists / 8) + " = " + fmt(recall)};
}

// ------------------------------------------------------------ criterion 8

std::size_t count_undetected_flips(const std::string& good_path, const std::string& bad_path,
                                   const std::function<ValidationReport(const std::string&)>& check,
                                   Rng& rng, std::size_t& unlocated) {
  const auto good = read_file(good_path);
  std::size_t missed = 0;
  for (int t = 0; t < 100; ++t) {
    auto bad = good;
    bad[rng.index(bad.size())] ^= std::uint8_t(1 + rng.index(255));
    write_file(bad_path, bad);
    const auto rep = check(bad_path);
    if (rep.ok()) ++missed;
    else if (rep.findings.front().record.empty()) ++unlocated;
  }
  return missed;
}

Outcome persistence() {
  ScratchDir dir("acceptance_persist");
  Rng rng(8);
  SynthSpec spec;
  spec.n_entities = 64;
  spec.n_seen = 16;
  spec.train_queries_per_entity = 2;
  const auto kb = gen_synthetic_kb(spec);

  write_store(dir.file("a.wcft"), kb.dims, kb.bundles);
  const auto store = FeatureStore::open(dir.file("a.wcft"));
  std::vector<FeatureBundle> back;
  for (std::size_t i = 0; i < store.size(); ++i) back.push_back(store.read_at(i));
  write_store(dir.file("b.wcft"), store.dims(), back);
  const bool store_same = back == kb.bundles &&
                          read_file(dir.file("a.wcft")) == read_file(dir.file("b.wcft")) &&
                          read_file(manifest_path(dir.file("a.wcft"))).size() ==
                              read_file(manifest_path(dir.file("b.wcft"))).size();

  EntityIndex index = clustered_index(rng, 300, 2, 32, 10, 0.5);
  build_ivf(index, 12, 1, 3);
  save_index(dir.file("a.wcix"), index);
  const auto loaded = load_index(dir.file("a.wcix"));
  save_index(dir.file("b.wcix"), loaded);
  const bool index_same =
      loaded == index && read_file(dir.file("a.wcix")) == read_file(dir.file("b.wcix"));

  // The corrupted store keeps a valid manifest next to it.
  write_file(manifest_path(dir.file("bad.wcft")), read_file(manifest_path(dir.file("a.wcft"))));
  std::size_t unlocated = 0;
  const std::size_t store_missed = count_undetected_flips(
      dir.file("a.wcft"), dir.file("bad.wcft"), [](const std::string& p) { return validate_store(p); },
      rng, unlocated);
  const std::size_t index_missed = count_undetected_flips(
      dir.file("a.wcix"), dir.file("bad.wcix"), [](const std::string& p) { return validate_index(p); },
      rng, unlocated);
  const bool pass = store_same && index_same && store_missed == 0 && index_missed == 0 &&
                    unlocated == 0;
  return {pass, std::string("WCFT round trip ") + (store_same ? "bit-identical" : "DIFFERS") +
                    ", WCIX round trip " + (index_same ? "bit-identical" : "DIFFERS") +
                    "; byte flips undetected: WCFT " + std::to_string(store_missed) +
                    "/100, WCIX " + std::to_string(index_missed) + "/100, unlocated " +
                    std::to_string(unlocated)};
}

// ------------------------------------------------------------ criterion 9

Outcome latency() {
  Rng rng(9);
  const std::size_t dim = 256, entities = 50000;
  EntityIndex index(dim);
  char id[32];
  for (std::size_t e = 0; e < entities; ++e) {
    std::snprintf(id, sizeof id, "L%06zu", e);
    for (std::uint32_t k = 0; k < 2; ++k) index.add(id, k, rng.unit<float>(dim));
  }
  std::vector<Vector<float>> queries;
  for (int i = 0; i < 64; ++i) queries.push_back(rng.unit<float>(dim));
  const auto one = bench_query(index, queries, 1, {.k = 10, .threads = 1});
  const auto eight = bench_query(index, queries, 2, {.k = 10, .threads = 8});
  const double scaling = eight.queries_per_second / one.queries_per_second;
  const double p50_ms = one.p50_ns / 1e6;
  const unsigned cores = std::thread::hardware_concurrency();
  return {p50_ms <= kP50Ms && scaling >= kScaling,
          std::to_string(index.rows()) + "x" + std::to_string(dim) + ": p50=" + fmt(p50_ms, 2) +
              "ms p95=" + fmt(one.p95_ns / 1e6, 2) + "ms, qps 1 thread=" +
              fmt(one.queries_per_second, 1) + ", 8 threads=" + fmt(eight.queries_per_second, 1) +
              " (scaling " + fmt(scaling, 2) + "x, need " + fmt(kScaling, 1) + "x; " +
              std::to_string(cores) + " hardware threads available)"};
}

// ----------------------------------------------------------- criterion 10

int run_cli(const std::string& cli, const std::string& args, const fs::path& cwd) {
  const std::string cmd =
      "cd '" + cwd.string() + "' && '" + cli + "' " + args + " >/dev/null 2>>cli_stderr.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism(const std::string& cli) {
  if (cli.empty() || !fs::exists(cli)) return {false, "ver-engine binary not found: " + cli};
  ScratchDir dir("acceptance_determinism");
  write_text_file(dir.file("spec.json"),
                  R"({"n_entities": 96, "n_seen": 32, "train_queries_per_entity": 6})");
  const std::string train =
      "train --store kb --queries kb/train.jsonl --seed 5 --threads 2 --heads 4 "
      "--batch-size 8 --n-sync 7 --lr 5e-3 --out ";
  int rc = run_cli(cli, "gen-synth --spec spec.json --out kb", dir.path());
  rc |= run_cli(cli, train + "a.ckpt", dir.path());
  rc |= run_cli(cli, train + "b.ckpt", dir.path());
  rc |= run_cli(cli, "embed-kb --store kb --ckpt a.ckpt --threads 1 --out serial.wcix", dir.path());
  rc |= run_cli(cli, "embed-kb --store kb --ckpt a.ckpt --threads 4 --out parallel.wcix",
                dir.path());
  if (rc != 0) return {false, "a CLI step failed: " + read_text_file(dir.file("cli_stderr.txt"))};
  const auto a = read_file(dir.file("a.ckpt"));
  const bool ckpt_same = a == read_file(dir.file("b.ckpt")) &&
                         read_file(dir.file("a.ckpt.log.jsonl")) ==
                             read_file(dir.file("b.ckpt.log.jsonl"));
  const auto s = read_file(dir.file("serial.wcix"));
  const bool shard_same = s == read_file(dir.file("parallel.wcix"));
  return {ckpt_same && shard_same,
          std::string("train x2: checkpoints ") + (ckpt_same ? "bit-identical" : "DIFFER") + " (" +
              std::to_string(a.size()) + " bytes); embed-kb 1 vs 4 threads: shards " +
              (shard_same ? "bit-identical" : "DIFFER") + " (" + std::to_string(s.size()) +
              " bytes)"};
}

}  // namespace
}  // namespace ver::acceptance

int main(int argc, char** argv) {
  using namespace ver::acceptance;
  CLI::App app{"ver-engine acceptance suite"};
  std::string cli;
  std::vector<int> only;
  app.add_option("--cli", cli, "Path to the ver-engine binary");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  if (!cli.empty()) cli = fs::absolute(cli).string();

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"loss oracle", loss_oracle},
      {"hard-negative invariants", hard_negative_invariants},
      {"metric anchors", metric_anchors},
      {"planted recovery", planted_recovery},
      {"ablation direction", ablation_direction},
      {"retrieval exactness", retrieval_exactness},
      {"persistence", persistence},
      {"latency harness", latency},
      {"determinism", [&] { return determinism(cli); }},
  };
  std::size_t failed = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = int(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    ++ran;
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << " (" << criteria[i].first
              << ", " << fmt(seconds_since(t0), 1) << "s): " << o.detail << std::endl;
  }
  std::cout << (ran - failed) << "/" << ran << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
