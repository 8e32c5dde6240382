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

#include <optional>

#include "forge/error.hpp"
#include "forge/model.hpp"

namespace forge {

// Returns the first violated Box invariant for an image of size (w, h), or
// nullopt. Pixel boxes must satisfy 0 <= x1 <= x2 <= w (same for y); grid
// boxes must hold integers in [0, bins] and have positive area.
std::optional<ErrorCode> check_box(const Box& b, double w, double h);

// Returns `b` unchanged when valid; throws forge::Error otherwise. Never clamps.
Box validate_box(const Box& b, double w, double h);

// Clamps a pixel box into [0,w]x[0,h]. Returns the largest distance any
// coordinate moved.
double clamp_box(Box& b, double w, double h);

// Quantizes a pixel box to NormalizedGrid(bins) with round(c / extent * bins).
// A side that collapses to zero length is widened by one cell toward the side
// where the unrounded coordinate lies, so the result always has positive area
// and every coordinate stays within one cell of the original.
Box to_grid(const Box& b, double w, double h, int bins = kDefaultCoordBins);

Box from_grid(const Box& b, double w, double h);

// area(a ∩ b) / area(a ∪ b) with the continuous (x2 - x1) convention.
double iou(const Box& a, const Box& b);

}  // namespace forge
