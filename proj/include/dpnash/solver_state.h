// Copyright 2026 The dpnash Authors
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

#ifndef DPNASH_SOLVER_STATE_H_
#define DPNASH_SOLVER_STATE_H_

#include <cstdint>
#include <vector>

#include "dpnash/game_core.h"

namespace dpnash {

// Per-player decisions x_i and aggregate-average estimates v_i at iteration k.
struct SolverState {
  std::vector<Vector> x;
  std::vector<Vector> v;
  int64_t k = 0;

  int num_players() const { return static_cast<int>(x.size()); }
};

}  // namespace dpnash

#endif  // DPNASH_SOLVER_STATE_H_
