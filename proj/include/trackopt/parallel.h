// Copyright 2026 The trackopt Authors
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

#ifndef TRACKOPT_PARALLEL_H_
#define TRACKOPT_PARALLEL_H_

#include <cstddef>
#include <cstdint>
#include <functional>

namespace trackopt {

// splitmix64 finalizer over (seed, stream): independent RNG seeds for
// parallel work items, stable across thread counts.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Worker count from TRACKOPT_THREADS, else the hardware concurrency.
int default_thread_count();

// Calls fn(i) for i in [0, n) on up to `threads` workers. Items are handed
// out dynamically, so fn must not depend on which worker runs it. The first
// exception thrown by fn is rethrown after all workers stop.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace trackopt

#endif  // TRACKOPT_PARALLEL_H_
