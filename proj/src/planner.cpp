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

#include "forge/planner.hpp"

#include <algorithm>
#include <cmath>

#include "forge/error.hpp"
#include "forge/parallel.hpp"

namespace forge {

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::AlignInit: return "AlignInit";
    case Stage::PreAdapt: return "PreAdapt";
    case Stage::InstructTune: return "InstructTune";
  }
  return "?";
}

std::string_view to_string(Part part) {
  switch (part) {
    case Part::Projector: return "Projector";
    case Part::VisualEncoder: return "VisualEncoder";
    case Part::LLM: return "LLM";
    case Part::VisualTokenizerProjector: return "VisualTokenizerProjector";
  }
  return "?";
}

std::string_view to_string(Schedule) { return "cosine"; }

std::optional<Stage> stage_from_string(std::string_view name) {
  for (auto s : {Stage::AlignInit, Stage::PreAdapt, Stage::InstructTune})
    if (to_string(s) == name) return s;
  return std::nullopt;
}

std::optional<Part> part_from_string(std::string_view name) {
  for (auto p : {Part::Projector, Part::VisualEncoder, Part::LLM, Part::VisualTokenizerProjector})
    if (to_string(p) == name) return p;
  return std::nullopt;
}

namespace {

Json parts_json(const std::set<Part>& parts) {
  Json out = Json::array();
  for (auto p : parts) out.push_back(to_string(p));
  return out;
}

std::set<Part> parts_from_json(const Json& j) {
  std::set<Part> out;
  for (const auto& v : j) {
    auto p = part_from_string(v.get<std::string>());
    if (!p) throw Error(ErrorCode::Config, "unknown model part '" + v.get<std::string>() + "'");
    out.insert(*p);
  }
  return out;
}

}  // namespace

Json StagePlan::to_json() const {
  Json routes = Json::object();
  for (const auto& [kind, parts] : data_routes) routes[std::string(to_string(kind))] = parts_json(parts);
  return {{"stage", to_string(stage)},
          {"trainable", parts_json(trainable)},
          {"base_lr", base_lr},
          {"encoder_lr_scale", encoder_lr_scale},
          {"encoder_lr", encoder_lr()},
          {"sharding_level", sharding_level},
          {"max_len", max_len},
          {"warmup_ratio", warmup_ratio},
          {"schedule", to_string(schedule)},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"data_routes", std::move(routes)}};
}

StagePlan StagePlan::from_json(const Json& j) {
  try {
    StagePlan p;
    auto stage = stage_from_string(j.at("stage").get<std::string>());
    if (!stage) throw Error(ErrorCode::Config, "unknown stage '" + j.at("stage").get<std::string>() + "'");
    p.stage = *stage;
    p.trainable = parts_from_json(j.at("trainable"));
    p.base_lr = j.at("base_lr").get<double>();
    p.encoder_lr_scale = j.value("encoder_lr_scale", 1.0);
    p.sharding_level = j.at("sharding_level").get<std::string>();
    p.max_len = j.at("max_len").get<std::int64_t>();
    p.warmup_ratio = j.at("warmup_ratio").get<double>();
    if (j.value("schedule", std::string("cosine")) != "cosine") throw Error(ErrorCode::Config, "schedule must be cosine");
    p.epochs = j.at("epochs").get<std::int64_t>();
    p.batch_size = j.at("batch_size").get<std::int64_t>();
    for (const auto& [name, parts] : j.at("data_routes").items()) {
      auto kind = task_kind_from_string(name);
      if (!kind) throw Error(ErrorCode::Config, "unknown task kind '" + name + "'");
      p.data_routes[*kind] = parts_from_json(parts);
    }
    return p;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Config, std::string("bad stage plan: ") + e.what());
  }
}

std::vector<StagePlan> default_plans(std::string_view scale, const PlanOptions& options) {
  static const std::vector<std::string_view> kScales{"7B", "9B", "13B", "27B"};
  if (std::find(kScales.begin(), kScales.end(), scale) == kScales.end())
    throw Error(ErrorCode::UnknownScale, "model scale must be one of 7B, 9B, 13B, 27B", std::string(scale));
  const bool large = scale == "27B";

  StagePlan base;
  base.schedule = Schedule::Cosine;
  base.warmup_ratio = 0.3;
  base.epochs = 1;
  base.batch_size = 256;

  const std::set<Part> full{Part::Projector, Part::VisualEncoder, Part::LLM};

  StagePlan align = base;
  align.stage = Stage::AlignInit;
  align.trainable = {Part::Projector};
  align.base_lr = (large && options.halve_stage1_for_27b) ? 5e-4 : 1e-3;
  align.sharding_level = "zero2";
  align.max_len = 2048;
  align.data_routes[TaskKind::Caption] = {Part::Projector};

  StagePlan pre = base;
  pre.stage = Stage::PreAdapt;
  pre.trainable = full;
  pre.base_lr = large ? 1e-5 : 2e-5;
  pre.sharding_level = "zero3";
  pre.max_len = 4096;
  for (auto k : {TaskKind::REC, TaskKind::REG, TaskKind::Detection, TaskKind::LanguageOnly}) pre.data_routes[k] = full;

  StagePlan tune = base;
  tune.stage = Stage::InstructTune;
  tune.trainable = {Part::Projector, Part::VisualEncoder, Part::LLM, Part::VisualTokenizerProjector};
  tune.base_lr = pre.base_lr;
  tune.encoder_lr_scale = 0.1;
  tune.sharding_level = "zero3";
  tune.max_len = 4096;
  for (auto k : all_task_kinds()) tune.data_routes[k] = full;
  tune.data_routes[TaskKind::Counting].insert(Part::VisualTokenizerProjector);

  return {align, pre, tune};
}

std::vector<std::string> validate_plan(const StagePlan& p) {
  std::vector<std::string> v;
  switch (p.stage) {
    case Stage::AlignInit:
      if (p.trainable != std::set<Part>{Part::Projector}) v.push_back("AlignInit trains exactly Projector");
      break;
    case Stage::PreAdapt:
      if (p.trainable != std::set<Part>{Part::Projector, Part::VisualEncoder, Part::LLM})
        v.push_back("PreAdapt trains everything except the visual tokenizer");
      break;
    case Stage::InstructTune: {
      bool counting_routed = false, other_routed = false;
      for (const auto& [kind, parts] : p.data_routes) {
        if (!parts.count(Part::VisualTokenizerProjector)) continue;
        (kind == TaskKind::Counting ? counting_routed : other_routed) = true;
      }
      if (other_routed) v.push_back("InstructTune routes only Counting samples to VisualTokenizerProjector");
      if (!counting_routed) v.push_back("InstructTune routes Counting samples to VisualTokenizerProjector");
      for (auto part : {Part::Projector, Part::VisualEncoder, Part::LLM})
        if (!p.trainable.count(part))
          v.push_back("InstructTune trains " + std::string(to_string(part)));
      break;
    }
  }
  for (const auto& [kind, parts] : p.data_routes)
    for (auto part : parts)
      if (!p.trainable.count(part)) {
        v.push_back("route destinations are trainable (" + std::string(to_string(kind)) + " -> " +
                    std::string(to_string(part)) + ")");
      }
  if (!(p.warmup_ratio > 0.0 && p.warmup_ratio < 1.0)) v.push_back("warmup_ratio in (0, 1)");
  if (p.epochs < 1) v.push_back("epochs >= 1");
  if (!(p.base_lr > 0.0) || !std::isfinite(p.base_lr)) v.push_back("base_lr > 0");
  if (!(p.encoder_lr_scale > 0.0 && p.encoder_lr_scale <= 1.0)) v.push_back("encoder_lr_scale in (0, 1]");
  if (p.batch_size < 1) v.push_back("batch_size >= 1");
  if (p.max_len < 1) v.push_back("max_len >= 1");
  return v;
}

Json plans_to_json(std::string_view scale, const std::vector<StagePlan>& plans) {
  Json stages = Json::array();
  for (const auto& p : plans) stages.push_back(p.to_json());
  return {{"scale", scale}, {"stages", std::move(stages)}};
}

// ---- shapes ---------------------------------------------------------------------------

GridShape patch_grid(std::int64_t res, std::int64_t patch) {
  if (patch <= 0 || res <= 0) throw Error(ErrorCode::InvalidArgument, "resolution and patch must be positive");
  if (res % patch != 0)
    throw Error(ErrorCode::NotDivisible, std::to_string(res) + " is not divisible by patch " + std::to_string(patch));
  const auto side = res / patch;
  return {side, side * side};
}

GridShape conv_tokens(std::int64_t in_side, std::int64_t k, std::int64_t s, std::int64_t p) {
  if (k < 1 || s < 1 || p < 0 || in_side < 1)
    throw Error(ErrorCode::InvalidArgument, "kernel and stride must be >= 1, padding >= 0");
  if (in_side + 2 * p < k) throw Error(ErrorCode::InvalidArgument, "kernel larger than padded input");
  const auto side = (in_side + 2 * p - k) / s + 1;
  return {side, side * side};
}

Json ShapeReport::to_json() const {
  auto g = [](const GridShape& s) { return Json{{"side", s.side}, {"tokens", s.tokens}}; };
  return {{"pretrain", g(pretrain)}, {"encoder", g(encoder)}, {"connector", g(connector)}};
}

ShapeReport shape_report(const ShapeSpec& spec) {
  ShapeReport r;
  r.pretrain = patch_grid(spec.pretrain_res, spec.patch);
  r.encoder = patch_grid(spec.encoder_res, spec.patch);
  r.connector = conv_tokens(r.encoder.side, spec.kernel, spec.stride, spec.pad);
  return r;
}

namespace {

struct Tap {
  std::int64_t lo;
  double frac;
};

Tap source_tap(std::int64_t i, std::int64_t src_side, std::int64_t dst_side, InterpMode mode) {
  double x;
  if (mode == InterpMode::CornerAligned) {
    x = double(i) * double(src_side - 1) / double(dst_side - 1);
  } else {
    x = (double(i) + 0.5) * double(src_side) / double(dst_side) - 0.5;
    x = std::clamp(x, 0.0, double(src_side - 1));
  }
  auto lo = static_cast<std::int64_t>(std::floor(x));
  lo = std::min(lo, src_side - 2);
  return {lo, x - double(lo)};
}

void check_grid(const PosGrid& src, std::int64_t dst_side) {
  if (src.side < 2 || dst_side < 2) throw Error(ErrorCode::DegenerateGrid, "grid sides must be >= 2");
  if (src.dim < 1 || static_cast<std::int64_t>(src.values.size()) != src.side * src.side * src.dim)
    throw Error(ErrorCode::InvalidArgument, "grid values do not match side*side*dim");
}

void interpolate_row(const PosGrid& src, PosGrid& dst, std::int64_t r, const std::vector<Tap>& taps) {
  const Tap& tr = taps[static_cast<std::size_t>(r)];
  const double wr = tr.frac;
  for (std::int64_t c = 0; c < dst.side; ++c) {
    const Tap& tc = taps[static_cast<std::size_t>(c)];
    const double wc = tc.frac;
    double* out = &dst.values[static_cast<std::size_t>((r * dst.side + c) * dst.dim)];
    for (std::int64_t d = 0; d < src.dim; ++d) {
      const double top = (1.0 - wc) * src.at(tr.lo, tc.lo, d) + wc * src.at(tr.lo, tc.lo + 1, d);
      const double bottom = (1.0 - wc) * src.at(tr.lo + 1, tc.lo, d) + wc * src.at(tr.lo + 1, tc.lo + 1, d);
      out[d] = (1.0 - wr) * top + wr * bottom;
    }
  }
}

PosGrid make_output(const PosGrid& src, std::int64_t dst_side) {
  PosGrid dst;
  dst.side = dst_side;
  dst.dim = src.dim;
  dst.values.assign(static_cast<std::size_t>(dst_side * dst_side * src.dim), 0.0);
  dst.class_token = src.class_token;
  return dst;
}

}  // namespace

PosGrid interpolate_pos_grid(const PosGrid& src, std::int64_t dst_side, InterpMode mode, int jobs) {
  check_grid(src, dst_side);
  PosGrid dst = make_output(src, dst_side);
  std::vector<Tap> taps;
  for (std::int64_t i = 0; i < dst_side; ++i) taps.push_back(source_tap(i, src.side, dst_side, mode));
  parallel_for(static_cast<std::size_t>(dst_side), jobs,
               [&](std::size_t r) { interpolate_row(src, dst, static_cast<std::int64_t>(r), taps); });
  return dst;
}

PosGrid interpolate_pos_grid_reference(const PosGrid& src, std::int64_t dst_side, InterpMode mode) {
  check_grid(src, dst_side);
  PosGrid dst = make_output(src, dst_side);
  for (std::int64_t r = 0; r < dst_side; ++r) {
    const Tap tr = source_tap(r, src.side, dst_side, mode);
    for (std::int64_t c = 0; c < dst_side; ++c) {
      const Tap tc = source_tap(c, src.side, dst_side, mode);
      for (std::int64_t d = 0; d < src.dim; ++d) {
        const double v00 = src.at(tr.lo, tc.lo, d), v01 = src.at(tr.lo, tc.lo + 1, d);
        const double v10 = src.at(tr.lo + 1, tc.lo, d), v11 = src.at(tr.lo + 1, tc.lo + 1, d);
        const double top = (1.0 - tc.frac) * v00 + tc.frac * v01;
        const double bottom = (1.0 - tc.frac) * v10 + tc.frac * v11;
        dst.values[static_cast<std::size_t>((r * dst_side + c) * src.dim + d)] =
            (1.0 - tr.frac) * top + tr.frac * bottom;
      }
    }
  }
  return dst;
}

}  // namespace forge
