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

#include <benchmark/benchmark.h>

#include <cmath>
#include <map>
#include <random>

#include "ver/retrieval.hpp"

namespace {

ver::Vector<float> unit(std::mt19937_64& g, std::size_t dim) {
  std::normal_distribution<float> n;
  ver::Vector<float> v(dim);
  for (float& x : v) x = n(g);
  return ver::l2_normalize<float>(v);
}

// Cached across benchmark registrations; building 100k rows is not free.
const ver::EntityIndex& index_of(std::size_t rows, std::size_t dim, bool ivf) {
  static std::map<std::tuple<std::size_t, std::size_t, bool>, ver::EntityIndex> cache;
  const auto key = std::make_tuple(rows, dim, ivf);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::mt19937_64 g(rows * 31 + dim);
  ver::EntityIndex index(dim);
  for (std::size_t r = 0; r < rows; ++r)
    index.add("e" + std::to_string(r / 2), std::uint32_t(r % 2), unit(g, dim));
  if (ivf) {
    const auto lists = std::size_t(std::sqrt(double(rows)));
    ver::build_ivf(index, lists, 1, std::max<std::size_t>(1, lists / 8));
  }
  return cache.emplace(key, std::move(index)).first->second;
}

void BM_ExactQuery(benchmark::State& state) {
  const auto& index = index_of(std::size_t(state.range(0)), std::size_t(state.range(1)), false);
  std::mt19937_64 g(9);
  const auto q = unit(g, index.dim());
  for (auto _ : state) benchmark::DoNotOptimize(ver::query(index, q, {.k = 10}));
  state.SetItemsProcessed(state.iterations() * std::int64_t(index.rows()));
}
BENCHMARK(BM_ExactQuery)->Args({10000, 64})->Args({100000, 256})->Unit(benchmark::kMillisecond);

void BM_IvfQuery(benchmark::State& state) {
  const auto& index = index_of(std::size_t(state.range(0)), std::size_t(state.range(1)), true);
  std::mt19937_64 g(10);
  const auto q = unit(g, index.dim());
  for (auto _ : state) benchmark::DoNotOptimize(ver::query(index, q, {.k = 10}));
}
BENCHMARK(BM_IvfQuery)->Args({10000, 64})->Args({50000, 128})->Unit(benchmark::kMillisecond);

}  // namespace
