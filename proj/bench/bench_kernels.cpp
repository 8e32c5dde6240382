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

#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "forge/evalkit.hpp"
#include "forge/planner.hpp"

namespace {

using Clock = std::chrono::steady_clock;

template <typename Fn>
double time_ms(Fn&& fn, int reps) {
  const auto start = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count() / reps;
}

void detection_case(std::vector<forge::Prediction>& preds, std::vector<forge::GroundTruth>& gts) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int images = 500, categories = 40;
  std::size_t rank = 0;
  for (int i = 0; i < images; ++i) {
    const std::string id = "img" + std::to_string(i);
    for (int k = 0; k < 12; ++k) {
      const std::string label = "c" + std::to_string(rng() % categories);
      const double x = u(rng) * 500, y = u(rng) * 400, w = 8 + u(rng) * 120, h = 8 + u(rng) * 120;
      forge::Box b{x, y, x + w, y + h, forge::CoordSpace::pixels()};
      gts.push_back({id, label, b});
      for (int d = 0; d < 2; ++d) {
        forge::Box p = b;
        p.x1 += (u(rng) - 0.5) * 10;
        p.x2 += (u(rng) - 0.5) * 10;
        p.y1 += (u(rng) - 0.5) * 10;
        p.y2 += (u(rng) - 0.5) * 10;
        preds.push_back({id, label, p, u(rng), rank++});
      }
    }
  }
}

}  // namespace

int main() {
  std::vector<forge::Prediction> preds;
  std::vector<forge::GroundTruth> gts;
  detection_case(preds, gts);
  const auto params = forge::CocoParams::standard();
  forge::EvalReport serial, parallel;
  const double t_serial = time_ms([&] { serial = forge::coco_map_reference(preds, gts, params); }, 3);
  const double t_parallel = time_ms([&] { parallel = forge::coco_map(preds, gts, params, 0); }, 3);
  std::printf("coco_map     %zu preds  serial %8.2f ms  openmp %8.2f ms  speedup %.2fx  mAP %.6f/%.6f\n",
              preds.size(), t_serial, t_parallel, t_serial / t_parallel, serial.map.value_or(-1),
              parallel.map.value_or(-1));

  forge::PosGrid grid;
  grid.side = 24;
  grid.dim = 1024;
  grid.values.resize(static_cast<std::size_t>(grid.side * grid.side * grid.dim));
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& v : grid.values) v = n(rng);
  forge::PosGrid a, b;
  const double i_serial = time_ms([&] { a = forge::interpolate_pos_grid_reference(grid, 73); }, 3);
  const double i_parallel = time_ms([&] { b = forge::interpolate_pos_grid(grid, 73); }, 3);
  std::printf("interpolate  24->73 x %lld  serial %8.2f ms  openmp %8.2f ms  speedup %.2fx  identical %s\n",
              static_cast<long long>(grid.dim), i_serial, i_parallel, i_serial / i_parallel,
              a.values == b.values ? "yes" : "no");
  return 0;
}
