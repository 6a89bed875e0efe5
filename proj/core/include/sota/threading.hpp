// Copyright 2026 The SOTA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SOTA_THREADING_HPP_
#define SOTA_THREADING_HPP_

#include <cstdint>

namespace sota {

// Worker-thread cap. Resolution order: explicit set_num_threads() call,
// then the SOTA_NUM_THREADS environment variable, then the hardware count.
int num_threads();
void set_num_threads(int n);

// Runs f(i) for i in [0, n). Results must not depend on which thread runs
// which index; every parallel site in the library writes to per-index slots
// so outputs are identical for any thread count.
template <typename F>
void parallel_for(std::int64_t n, F&& f) {
  const int threads = num_threads();
  if (threads <= 1 || n <= 1) {
    for (std::int64_t i = 0; i < n; ++i) f(i);
    return;
  }
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) f(i);
}

}  // namespace sota

#endif  // SOTA_THREADING_HPP_
