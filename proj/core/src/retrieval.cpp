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

#include "ver/retrieval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <json.hpp>
#include <limits>
#include <numeric>

#include "ver/batch_synth.hpp"
#include "ver/binary_io.hpp"
#include "ver/parallel.hpp"

namespace ver {
namespace {

constexpr float kNegInf = -std::numeric_limits<float>::infinity();

struct Best {
  float score = kNegInf;
  std::uint32_t row = std::numeric_limits<std::uint32_t>::max();
};

// Higher score wins; equal scores go to the lower row so the outcome does
// not depend on scan order.
inline void offer(Best& b, float s, std::uint32_t row) {
  if (s > b.score || (s == b.score && row < b.row)) {
    b.score = s;
    b.row = row;
  }
}

std::vector<std::size_t> probe_lists(const IvfQuantizer& q, std::span<const float> h,
                                     std::size_t n_probe) {
  const std::size_t n = q.n_lists();
  std::vector<std::pair<float, std::size_t>> d(n);
  for (std::size_t c = 0; c < n; ++c) {
    auto cent = q.centroids.row(c);
    // |h - c|^2 up to the constant |h|^2.
    d[c] = {row_dot(cent, cent) - 2.0f * row_dot(h, cent), c};
  }
  n_probe = std::clamp<std::size_t>(n_probe, 1, n);
  std::partial_sort(d.begin(), d.begin() + std::ptrdiff_t(n_probe), d.end());
  std::vector<std::size_t> out(n_probe);
  for (std::size_t i = 0; i < n_probe; ++i) out[i] = d[i].second;
  return out;
}

}  // namespace

float row_dot(std::span<const float> a, std::span<const float> b) {
  // Eight independent lanes, combined in a fixed order.
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  const std::size_t n = a.size();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  float tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) +
         tail;
}

void EntityIndex::add(const std::string& entity_id, std::uint32_t image_id,
                      std::span<const float> row) {
  if (row.size() != dim_) {
    throw DimensionError("index row width " + std::to_string(row.size()) + " != " +
                         std::to_string(dim_));
  }
  double norm = 0;
  for (float x : row) {
    if (!std::isfinite(x)) throw DegenerateInputError("non-finite index row for " + entity_id);
    norm += double(x) * double(x);
  }
  if (std::abs(std::sqrt(norm) - 1.0) > 1e-5) {
    throw DegenerateInputError("index row for " + entity_id + " is not unit norm");
  }
  auto [it, inserted] = by_id_.emplace(entity_id, std::uint32_t(entity_ids_.size()));
  if (inserted) entity_ids_.push_back(entity_id);
  row_entity_.push_back(it->second);
  row_image_.push_back(image_id);
  data_.insert(data_.end(), row.begin(), row.end());
  ivf_.reset();
}

void EntityIndex::append(const EntityIndex& other) {
  if (other.rows() == 0) return;
  if (rows() == 0 && entity_ids_.empty()) dim_ = other.dim_;
  for (std::size_t r = 0; r < other.rows(); ++r)
    add(other.entity_id(other.row_entity(r)), other.row_image(r), other.row(r));
}

std::optional<std::size_t> EntityIndex::entity_ordinal(const std::string& id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::string RetrievalResult::to_json() const {
  nlohmann::json j;
  j["hits"] = nlohmann::json::array();
  for (const auto& h : hits) {
    j["hits"].push_back({{"entity_id", h.entity_id}, {"score", h.score}, {"image_id", h.image_id}});
  }
  j["latency_ns"] = latency_ns;
  j["rows_scanned"] = rows_scanned;
  return j.dump();
}

RetrievalResult query(const EntityIndex& index, std::span<const float> h_raw,
                      const QueryOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  if (index.rows() == 0) throw DegenerateInputError("query against an empty index");
  if (h_raw.size() != index.dim()) {
    throw DimensionError("query width " + std::to_string(h_raw.size()) + " != index dim " +
                         std::to_string(index.dim()));
  }
  if (options.k == 0) throw ConfigError("k must be >= 1");
  const Vector<float> h = l2_normalize<float>(h_raw);

  // Rows to scan, ascending.
  std::vector<std::uint32_t> probe_rows;
  const bool use_ivf = index.ivf() && !options.force_exact;
  if (use_ivf) {
    const IvfQuantizer& q = *index.ivf();
    for (std::size_t list : probe_lists(q, h, options.n_probe.value_or(q.n_probe))) {
      probe_rows.insert(probe_rows.end(), q.list_rows.begin() + std::ptrdiff_t(q.list_offsets[list]),
                        q.list_rows.begin() + std::ptrdiff_t(q.list_offsets[list + 1]));
    }
    std::sort(probe_rows.begin(), probe_rows.end());
  }
  const std::size_t n_scan = use_ivf ? probe_rows.size() : index.rows();
  std::vector<float> scores(n_scan);
  auto row_of = [&](std::size_t i) { return use_ivf ? probe_rows[i] : std::uint32_t(i); };
  parallel_chunks(n_scan, options.threads, [&](std::size_t b, std::size_t e, std::size_t) {
    for (std::size_t i = b; i < e; ++i) scores[i] = row_dot(h, index.row(row_of(i)));
  });

  std::vector<Best> best(index.entity_count());
  for (std::size_t i = 0; i < n_scan; ++i) {
    const std::uint32_t r = row_of(i);
    offer(best[index.row_entity(r)], scores[i], r);
  }
  std::vector<std::uint32_t> cand;
  for (std::uint32_t e = 0; e < best.size(); ++e)
    if (best[e].row != std::numeric_limits<std::uint32_t>::max()) cand.push_back(e);
  const std::size_t k = std::min(options.k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + std::ptrdiff_t(k), cand.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      if (best[a].score != best[b].score) return best[a].score > best[b].score;
                      return index.entity_id(a) < index.entity_id(b);
                    });
  RetrievalResult out;
  out.rows_scanned = n_scan;
  for (std::size_t i = 0; i < k; ++i) {
    const Best& b = best[cand[i]];
    out.hits.push_back({index.entity_id(cand[i]), b.score, index.row_image(b.row)});
  }
  out.latency_ns = std::uint64_t(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                     std::chrono::steady_clock::now() - start)
                                     .count());
  return out;
}

void build_ivf(EntityIndex& index, std::size_t n_lists, std::uint64_t seed, std::size_t n_probe,
               std::size_t threads) {
  if (n_lists == 0) throw ConfigError("n_lists must be >= 1");
  if (n_lists > index.rows()) {
    throw ConfigError("n_lists=" + std::to_string(n_lists) + " exceeds index rows " +
                      std::to_string(index.rows()));
  }
  Matrix<float> points(index.rows(), index.dim());
  for (std::size_t r = 0; r < index.rows(); ++r)
    std::copy_n(index.row(r).begin(), index.dim(), points.row(r).begin());
  KMeansOptions opts;
  opts.threads = threads;
  ClusterPlan plan = kmeans_cluster(points, n_lists, seed, opts);
  IvfQuantizer q;
  q.centroids = std::move(plan.centroids);
  q.n_probe = std::uint32_t(std::clamp<std::size_t>(n_probe, 1, n_lists));
  q.list_offsets.assign(n_lists + 1, 0);
  for (std::size_t a : plan.assignments) ++q.list_offsets[a + 1];
  for (std::size_t c = 0; c < n_lists; ++c) q.list_offsets[c + 1] += q.list_offsets[c];
  q.list_rows.resize(index.rows());
  std::vector<std::uint64_t> fill(q.list_offsets.begin(), q.list_offsets.end() - 1);
  for (std::size_t r = 0; r < index.rows(); ++r)
    q.list_rows[fill[plan.assignments[r]]++] = std::uint32_t(r);
  index.set_ivf(std::move(q));
}

void save_index(const std::string& path, const EntityIndex& index) {
  ByteWriter w;
  w.put_magic("WCIX");
  w.put_u32(kIndexVersion);
  w.put_u32(std::uint32_t(index.dim()));
  w.put_u64(index.rows());
  w.put_u64(index.entity_count());
  const auto& ivf = index.ivf();
  w.put_u32(std::uint32_t(index.kind()));
  w.put_u32(ivf ? std::uint32_t(ivf->n_lists()) : 0);
  w.put_u32(ivf ? ivf->n_probe : 0);
  w.put_crc_since(0);
  std::size_t from = w.size();
  for (const auto& id : index.entity_ids()) w.put_string(id);
  w.put_crc_since(from);
  from = w.size();
  for (std::size_t r = 0; r < index.rows(); ++r) {
    w.put_u32(index.row_entity(r));
    w.put_u32(index.row_image(r));
  }
  w.put_crc_since(from);
  from = w.size();
  for (std::size_t r = 0; r < index.rows(); ++r) w.put_array<float>(index.row(r));
  w.put_crc_since(from);
  if (ivf) {
    from = w.size();
    w.put_array<float>(ivf->centroids.values());
    w.put_array<std::uint64_t>(ivf->list_offsets);
    w.put_array<std::uint32_t>(ivf->list_rows);
    w.put_crc_since(from);
  }
  write_file(path, w.bytes());
}

namespace {

// Strict parse; semantic problems are appended to `issues` when given,
// thrown otherwise. `section` tracks the region being read for diagnostics.
struct IndexParser {
  std::span<const std::uint8_t> bytes;
  std::string path;
  std::vector<Finding>* issues = nullptr;
  std::string section = "header";
  std::size_t section_offset = 0;

  void problem(std::size_t offset, const std::string& msg) {
    if (!issues) throw FormatError(path + ": " + section + " @" + std::to_string(offset) + ": " + msg);
    issues->push_back({section, offset, msg});
  }

  EntityIndex parse() {
    ByteReader r(bytes, path);
    r.expect_magic("WCIX");
    const std::uint32_t version = r.get_u32();
    if (version != kIndexVersion) {
      throw FormatError(path + ": unsupported WCIX version " + std::to_string(version));
    }
    const std::uint32_t dim = r.get_u32();
    const std::uint64_t rows = r.get_u64();
    const std::uint64_t n_entities = r.get_u64();
    const std::uint32_t kind = r.get_u32();
    const std::uint32_t n_lists = r.get_u32();
    const std::uint32_t n_probe = r.get_u32();
    r.check_crc_since(0, "header");
    if (dim == 0 || dim > (1u << 16)) throw FormatError(path + ": bad dim");
    if (kind > 1) throw FormatError(path + ": bad index kind");
    if (rows > std::numeric_limits<std::uint32_t>::max() || n_entities > rows + 1) {
      throw FormatError(path + ": implausible row/entity counts");
    }
    if (kind == 1 && (n_lists == 0 || n_lists > rows || n_probe == 0 || n_probe > n_lists)) {
      throw FormatError(path + ": bad quantizer parameters");
    }

    EntityIndex index(dim);
    section = "entities";
    section_offset = r.offset();
    std::vector<std::string> ids;
    for (std::uint64_t e = 0; e < n_entities; ++e) ids.push_back(r.get_string(4096));
    r.check_crc_since(section_offset, section);

    section = "row_map";
    section_offset = r.offset();
    const auto map = r.get_array<std::uint32_t>(rows * 2);
    r.check_crc_since(section_offset, section);

    section = "matrix";
    section_offset = r.offset();
    const auto matrix = r.get_array<float>(rows * dim);
    r.check_crc_since(section_offset, section);

    std::optional<IvfQuantizer> q;
    if (kind == 1) {
      section = "quantizer";
      section_offset = r.offset();
      IvfQuantizer iq;
      iq.centroids = Matrix<float>(n_lists, dim, r.get_array<float>(std::size_t(n_lists) * dim));
      iq.list_offsets = r.get_array<std::uint64_t>(std::size_t(n_lists) + 1);
      iq.list_rows = r.get_array<std::uint32_t>(rows);
      iq.n_probe = n_probe;
      r.check_crc_since(section_offset, section);
      q = std::move(iq);
    }
    section = "trailer";
    if (r.remaining() != 0) problem(r.offset(), std::to_string(r.remaining()) + " trailing bytes");

    section = "entities";
    {
      std::unordered_map<std::string, int> seen;
      for (const auto& id : ids)
        if (id.empty() || seen[id]++) problem(section_offset, "empty or duplicate entity id " + id);
    }
    section = "row_map";
    std::vector<bool> used(n_entities, false);
    for (std::uint64_t r2 = 0; r2 < rows; ++r2) {
      if (map[2 * r2] >= n_entities) {
        problem(r2 * 8, "row " + std::to_string(r2) + " maps to a missing entity");
      } else {
        used[map[2 * r2]] = true;
      }
    }
    for (std::uint64_t e = 0; e < n_entities; ++e)
      if (!used[e]) problem(0, "entity " + ids[e] + " has no rows");
    section = "matrix";
    for (std::uint64_t r2 = 0; r2 < rows; ++r2) {
      double norm = 0;
      bool finite = true;
      for (std::size_t d = 0; d < dim; ++d) {
        const float x = matrix[r2 * dim + d];
        finite = finite && std::isfinite(x);
        norm += double(x) * double(x);
      }
      if (!finite || std::abs(std::sqrt(norm) - 1.0) > 1e-5) {
        problem(r2 * dim * 4, "row " + std::to_string(r2) + " is not a finite unit vector");
      }
    }
    if (q) {
      section = "quantizer";
      bool ok = q->list_offsets.front() == 0 && q->list_offsets.back() == rows;
      for (std::size_t c = 0; c < n_lists && ok; ++c)
        ok = q->list_offsets[c] <= q->list_offsets[c + 1];
      std::vector<bool> seen_row(rows, false);
      for (std::uint32_t row : q->list_rows) {
        if (row >= rows || seen_row[row]) {
          ok = false;
          break;
        }
        seen_row[row] = true;
      }
      if (!ok) problem(section_offset, "inverted lists do not partition the rows");
      if (!all_finite(q->centroids)) problem(section_offset, "non-finite centroid");
    }
    if (issues && !issues->empty()) return index;

    for (std::uint64_t r2 = 0; r2 < rows; ++r2) {
      index.add(ids[map[2 * r2]], map[2 * r2 + 1],
                std::span<const float>(matrix.data() + r2 * dim, dim));
    }
    if (index.entity_ids() != ids) {
      throw FormatError(path + ": entity table order disagrees with the row map");
    }
    index.set_ivf(std::move(q));
    return index;
  }
};

}  // namespace

EntityIndex load_index(const std::string& path) {
  if (!std::filesystem::exists(path)) throw NotFoundError("index not found: " + path);
  MappedFile file(path);
  IndexParser p{file.bytes(), path};
  return p.parse();
}

ValidationReport validate_index(const std::string& path) {
  ValidationReport rep;
  rep.path = path;
  rep.format = "WCIX";
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const Error& e) {
    rep.findings.push_back({"header", 0, e.what()});
    return rep;
  }
  IndexParser p{bytes, path, &rep.findings};
  try {
    const EntityIndex index = p.parse();
    rep.records_checked = index.rows();
  } catch (const Error& e) {
    rep.findings.push_back({p.section, p.section_offset, e.what()});
  }
  return rep;
}

namespace {

EmbedReport embed_impl(std::size_t size, const std::function<FeatureBundle(std::size_t)>& get,
                       const std::function<std::string(std::size_t)>& id_of,
                       const AdaptorParams<float>& params, const EmbedOptions& options) {
  const std::size_t end = std::min(options.end.value_or(size), size);
  const std::size_t begin = std::min(options.begin, end);
  const std::size_t n = end - begin;

  struct Slot {
    std::vector<Vector<float>> rows;
    bool skipped = false;
  };
  std::vector<Slot> slots(n);
  std::atomic<std::size_t> done{0};
  parallel_for(n, options.threads, [&](std::size_t i) {
    const FeatureBundle b = get(begin + i);
    if (b.description.tokens.rows() > 0 && b.description.tokens.cols() != params.config.text_dim) {
      throw DimensionError("entity " + b.entity_id + ": token width does not match checkpoint");
    }
    const TokenEmbeddings<float> text = truncate_tokens(b.description, params.config.max_tokens);
    if (text.valid_len == 0) {
      slots[i].skipped = true;
    } else {
      const std::size_t images = options.all_images ? b.images.size() : 1;
      for (std::size_t k = 0; k < images; ++k)
        slots[i].rows.push_back(adaptor_forward(b.images[k], text, params));
    }
    const std::size_t d = ++done;
    if (options.progress && options.threads <= 1) options.progress(d, n);
  });

  EmbedReport rep;
  rep.index = EntityIndex(params.config.dim);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = id_of(begin + i);
    if (slots[i].skipped) {
      rep.skipped.push_back(id);
      continue;
    }
    for (std::size_t k = 0; k < slots[i].rows.size(); ++k)
      rep.index.add(id, std::uint32_t(k), slots[i].rows[k]);
    ++rep.embedded;
  }
  if (options.progress && options.threads > 1) options.progress(n, n);
  return rep;
}

}  // namespace

EmbedReport embed_kb(const FeatureStore& store, const AdaptorParams<float>& params,
                     const EmbedOptions& options) {
  if (store.dims().dim != params.config.dim || store.dims().text_dim != params.config.text_dim) {
    throw DimensionError("store dims (D=" + std::to_string(store.dims().dim) +
                         ", D_t=" + std::to_string(store.dims().text_dim) +
                         ") do not match the checkpoint (D=" + std::to_string(params.config.dim) +
                         ", D_t=" + std::to_string(params.config.text_dim) + ")");
  }
  return embed_impl(
      store.size(), [&](std::size_t i) { return store.read_at(i); },
      [&](std::size_t i) { return store.entity_id(i); }, params, options);
}

EmbedReport embed_bundles(const std::vector<FeatureBundle>& bundles,
                          const AdaptorParams<float>& params, const EmbedOptions& options) {
  return embed_impl(
      bundles.size(), [&](std::size_t i) { return bundles[i]; },
      [&](std::size_t i) { return bundles[i].entity_id; }, params, options);
}

EntityIndex index_from_pooled(const FeatureStore& store, bool all_images) {
  EntityIndex index(store.dims().dim);
  for (std::size_t i = 0; i < store.size(); ++i) {
    const FeatureBundle b = store.read_at(i);
    const std::size_t images = all_images ? b.pooled.size() : 1;
    for (std::size_t k = 0; k < images; ++k)
      index.add(b.entity_id, std::uint32_t(k), l2_normalize<float>(b.pooled[k]));
  }
  return index;
}

std::string LatencyStats::to_json() const {
  nlohmann::json j;
  j["count"] = count;
  j["p50_ns"] = p50_ns;
  j["p95_ns"] = p95_ns;
  j["mean_ns"] = mean_ns;
  j["queries_per_second"] = queries_per_second;
  j["rows_per_second"] = rows_per_second;
  j["threads"] = threads;
  return j.dump();
}

LatencyStats bench_query(const EntityIndex& index, const std::vector<Vector<float>>& queries,
                         std::size_t reps, const QueryOptions& options) {
  LatencyStats stats;
  stats.threads = std::max<std::size_t>(options.threads, 1);
  const std::size_t total = reps * queries.size();
  if (total == 0) return stats;
  QueryOptions single = options;
  single.threads = 1;
  // Warm-up pass.
  query(index, queries.front(), single);

  std::vector<double> lat(total);
  std::vector<std::size_t> scanned(total);
  const auto start = std::chrono::steady_clock::now();
  parallel_for(total, stats.threads, [&](std::size_t i) {
    const RetrievalResult r = query(index, queries[i % queries.size()], single);
    lat[i] = double(r.latency_ns);
    scanned[i] = r.rows_scanned;
  });
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  stats.count = total;
  stats.mean_ns = std::accumulate(lat.begin(), lat.end(), 0.0) / double(total);
  std::sort(lat.begin(), lat.end());
  // Nearest-rank percentiles.
  auto pct = [&](double p) {
    const std::size_t rank = std::size_t(std::ceil(p * double(total)));
    return lat[std::clamp<std::size_t>(rank, 1, total) - 1];
  };
  stats.p50_ns = pct(0.50);
  stats.p95_ns = pct(0.95);
  stats.queries_per_second = double(total) / wall;
  stats.rows_per_second =
      double(std::accumulate(scanned.begin(), scanned.end(), std::size_t{0})) / wall;
  return stats;
}

}  // namespace ver
