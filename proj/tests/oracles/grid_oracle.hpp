// Copyright 2026 The Forge Authors. All Rights Reserved.
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
#include <array>
#include <cmath>

namespace oracle {

// Quantization rule written out directly: nearest grid line per coordinate,
// then a collapsed side grows by one cell toward its unrounded position.
inline std::array<long, 4> to_grid(std::array<double, 4> b, double w, double h, long bins) {
  const double ext[4] = {w, h, w, h};
  double scaled[4];
  long g[4];
  for (int i = 0; i < 4; ++i) {
    scaled[i] = b[i] / ext[i] * double(bins);
    g[i] = static_cast<long>(std::floor(scaled[i] + 0.5));
    g[i] = std::clamp(g[i], 0L, bins);
  }
  for (int lo : {0, 1}) {
    const int hi = lo + 2;
    if (g[lo] != g[hi]) continue;
    if (scaled[hi] >= double(g[hi]) && g[hi] < bins) {
      g[hi] += 1;
    } else if (g[lo] > 0) {
      g[lo] -= 1;
    } else {
      g[hi] += 1;
    }
  }
  return {g[0], g[1], g[2], g[3]};
}

}  // namespace oracle
