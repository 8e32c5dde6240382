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

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "forge/io.hpp"
#include "forge/model.hpp"

namespace forge {

enum class Stage { AlignInit, PreAdapt, InstructTune };
enum class Part { Projector, VisualEncoder, LLM, VisualTokenizerProjector };
enum class Schedule { Cosine };

std::string_view to_string(Stage stage);
std::string_view to_string(Part part);
std::string_view to_string(Schedule schedule);
std::optional<Stage> stage_from_string(std::string_view name);
std::optional<Part> part_from_string(std::string_view name);

struct StagePlan {
  Stage stage = Stage::AlignInit;
  std::set<Part> trainable;
  double base_lr = 0;
  double encoder_lr_scale = 1.0;
  std::string sharding_level;
  std::int64_t max_len = 0;
  double warmup_ratio = 0;
  Schedule schedule = Schedule::Cosine;
  std::int64_t epochs = 1;
  std::int64_t batch_size = 0;
  std::map<TaskKind, std::set<Part>> data_routes;  // which parts a kind's gradients update

  double encoder_lr() const { return base_lr * encoder_lr_scale; }
  Json to_json() const;
  static StagePlan from_json(const Json& j);
};

struct PlanOptions {
  // Also halve the stage-1 rate for 27B.
  bool halve_stage1_for_27b = false;
};

// scale: "7B", "9B", "13B" or "27B"; UnknownScale otherwise.
std::vector<StagePlan> default_plans(std::string_view scale, const PlanOptions& options = {});

// Clause names of every violated invariant; empty when the plan is legal.
std::vector<std::string> validate_plan(const StagePlan& plan);

Json plans_to_json(std::string_view scale, const std::vector<StagePlan>& plans);

// ---- shape calculus ----------------------------------------------------------------

struct ShapeSpec {
  std::int64_t encoder_res = 1022;
  std::int64_t patch = 14;
  std::int64_t pretrain_res = 336;
  std::int64_t kernel = 3;
  std::int64_t stride = 2;
  std::int64_t pad = 1;
};

struct GridShape {
  std::int64_t side = 0;
  std::int64_t tokens = 0;
};

// res / patch; NotDivisible unless patch divides res.
GridShape patch_grid(std::int64_t res, std::int64_t patch);

// floor((in + 2p - k) / s) + 1; InvalidArgument when in + 2p < k or s < 1.
GridShape conv_tokens(std::int64_t in_side, std::int64_t k, std::int64_t s, std::int64_t p);

struct ShapeReport {
  GridShape pretrain;
  GridShape encoder;
  GridShape connector;
  Json to_json() const;
};
ShapeReport shape_report(const ShapeSpec& spec);

enum class InterpMode { CornerAligned, HalfPixel };

// Row-major grid of side*side vectors of width dim.
struct PosGrid {
  std::int64_t side = 0;
  std::int64_t dim = 0;
  std::vector<double> values;
  std::optional<std::vector<double>> class_token;  // passed through unchanged

  double at(std::int64_t r, std::int64_t c, std::int64_t d) const { return values[(r * side + c) * dim + d]; }
};

// Bilinear resampling; DegenerateGrid when either side < 2. Row-parallel.
PosGrid interpolate_pos_grid(const PosGrid& src, std::int64_t dst_side, InterpMode mode = InterpMode::CornerAligned,
                             int jobs = 0);
// Serial reference.
PosGrid interpolate_pos_grid_reference(const PosGrid& src, std::int64_t dst_side,
                                       InterpMode mode = InterpMode::CornerAligned);

}  // namespace forge
