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

#ifndef VER_PARALLEL_HPP_
#define VER_PARALLEL_HPP_

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ver {

// Thread count from VER_ENGINE_THREADS, else the hardware concurrency.
std::size_t default_thread_count();

// Static contiguous partition of [0, n) into at most `threads` chunks; calls
// body(begin, end, chunk_index). The first exception thrown by any chunk is
// rethrown on the caller after all chunks have joined.
template <typename Body>
void parallel_chunks(std::size_t n, std::size_t threads, Body&& body) {
  if (n == 0) return;
  if (threads <= 1 || n == 1) {
    body(std::size_t{0}, n, std::size_t{0});
    return;
  }
  const std::size_t chunks = std::min(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(chunks - 1);
  std::exception_ptr error;
  std::mutex error_mu;
  auto run = [&](std::size_t c) {
    const std::size_t begin = n * c / chunks, end = n * (c + 1) / chunks;
    try {
      body(begin, end, c);
    } catch (...) {
      std::lock_guard lock(error_mu);
      if (!error) error = std::current_exception();
    }
  };
  for (std::size_t c = 1; c < chunks; ++c) pool.emplace_back(run, c);
  run(0);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

template <typename Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
  parallel_chunks(n, threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t i = begin; i < end; ++i) body(i);
  });
}

}  // namespace ver

#endif  // VER_PARALLEL_HPP_
