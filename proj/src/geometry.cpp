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

#include "forge/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace forge {

namespace {

bool is_integer(double v) { return std::isfinite(v) && std::floor(v) == v; }

std::string describe(const Box& b) {
  return "[" + std::to_string(b.x1) + ", " + std::to_string(b.y1) + ", " + std::to_string(b.x2) + ", " +
         std::to_string(b.y2) + "]";
}

// Maps one axis. Returns the grid pair for (lo, hi).
std::pair<int, int> quantize_axis(double lo, double hi, double extent, int bins) {
  const double s_lo = lo / extent * bins;
  const double s_hi = hi / extent * bins;
  int g_lo = static_cast<int>(std::lround(s_lo));
  int g_hi = static_cast<int>(std::lround(s_hi));
  g_lo = std::clamp(g_lo, 0, bins);
  g_hi = std::clamp(g_hi, 0, bins);
  if (g_lo == g_hi) {
    const int g = g_lo;
    if (s_hi >= g && g + 1 <= bins) {
      g_hi = g + 1;
    } else {
      g_lo = g - 1;
    }
  }
  return {g_lo, g_hi};
}

}  // namespace

std::optional<ErrorCode> check_box(const Box& b, double w, double h) {
  for (double v : {b.x1, b.y1, b.x2, b.y2})
    if (!std::isfinite(v)) return ErrorCode::OutOfBounds;

  if (b.space.is_grid()) {
    for (double v : {b.x1, b.y1, b.x2, b.y2})
      if (!is_integer(v)) return ErrorCode::NonIntegerGridCoordinate;
    if (b.x1 > b.x2 || b.y1 > b.y2) return ErrorCode::Inverted;
    const double n = b.space.bins;
    if (b.x1 < 0 || b.y1 < 0 || b.x2 > n || b.y2 > n) return ErrorCode::OutOfBounds;
    if (b.x1 == b.x2 || b.y1 == b.y2) return ErrorCode::ZeroArea;
    return std::nullopt;
  }

  if (b.x1 > b.x2 || b.y1 > b.y2) return ErrorCode::Inverted;
  if (b.x1 < 0 || b.y1 < 0 || b.x2 > w || b.y2 > h) return ErrorCode::OutOfBounds;
  return std::nullopt;
}

Box validate_box(const Box& b, double w, double h) {
  if (!(w > 0) || !(h > 0)) throw Error(ErrorCode::InvalidArgument, "image extent must be positive");
  if (auto err = check_box(b, w, h)) throw Error(*err, "invalid box " + describe(b));
  return b;
}

double clamp_box(Box& b, double w, double h) {
  const Box before = b;
  b.x1 = std::clamp(b.x1, 0.0, w);
  b.x2 = std::clamp(b.x2, 0.0, w);
  b.y1 = std::clamp(b.y1, 0.0, h);
  b.y2 = std::clamp(b.y2, 0.0, h);
  return std::max({std::abs(before.x1 - b.x1), std::abs(before.x2 - b.x2), std::abs(before.y1 - b.y1),
                   std::abs(before.y2 - b.y2)});
}

Box to_grid(const Box& b, double w, double h, int bins) {
  if (bins < 2) throw Error(ErrorCode::InvalidArgument, "coordinate bins must be >= 2");
  validate_box(b, w, h);
  const auto [x1, x2] = quantize_axis(b.x1, b.x2, w, bins);
  const auto [y1, y2] = quantize_axis(b.y1, b.y2, h, bins);
  return Box{double(x1), double(y1), double(x2), double(y2), CoordSpace::grid(bins)};
}

Box from_grid(const Box& b, double w, double h) {
  if (!b.space.is_grid()) throw Error(ErrorCode::InvalidArgument, "from_grid expects a grid box");
  const double n = b.space.bins;
  return Box{b.x1 / n * w, b.y1 / n * h, b.x2 / n * w, b.y2 / n * h, CoordSpace::pixels()};
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return inter / uni;
}

}  // namespace forge
