// Copyright 2026 The LLTN Authors
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

#include <cstddef>
#include <functional>

namespace lltn {

/// Process-wide cap on worker threads (>= 1). Defaults to LLTN_THREADS when
/// set, else the hardware concurrency.
int num_threads();
void set_num_threads(int n);

/// Runs fn(i) for i in [0, n). Each index is processed exactly once; callers
/// write only to per-index slots so results are schedule independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace lltn
