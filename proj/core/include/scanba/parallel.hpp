// Copyright 2026, the scanba authors
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

#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace scanba {

inline int effective_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(chunk, begin, end) over contiguous index chunks, one per worker.
/// Chunk boundaries depend only on (n, threads), so per-chunk partial results
/// merged in chunk order make the whole reduction deterministic.
inline void parallel_chunks(std::size_t n, int threads,
                            const std::function<void(int, std::size_t, std::size_t)>& fn) {
  const int t = std::min<std::size_t>(effective_threads(threads), std::max<std::size_t>(n, 1));
  if (t <= 1 || n == 0) {
    fn(0, 0, n);
    return;
  }
  const std::size_t chunk = (n + t - 1) / t;
  std::vector<std::thread> workers;
  workers.reserve(t);
  for (int i = 0; i < t; ++i) {
    const std::size_t begin = std::min(n, i * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    workers.emplace_back(fn, i, begin, end);
  }
  for (auto& w : workers) w.join();
}

}  // namespace scanba
