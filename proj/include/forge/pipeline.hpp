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
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "forge/convo.hpp"
#include "forge/curate.hpp"
#include "forge/ingest.hpp"
#include "forge/io.hpp"

namespace forge {

// One machine-readable JSON line per event on `out`. Event payloads never
// carry timings so logs of equal runs compare equal.
class EventLog {
 public:
  explicit EventLog(std::ostream* out = nullptr) : out_(out) {}
  void emit(std::string_view event, std::string_view stage, Json fields = Json::object());

 private:
  std::ostream* out_;
};

// Stage output helpers shared by the subcommands and the pipeline.
void write_curated(const CurateResult& result, const fs::path& out_dir);
RenderResult render_directory(const fs::path& in_dir, const fs::path& out_dir, const TemplatePack& pack,
                              const RenderOptions& options, std::int64_t budget, int jobs);

enum class PipelineStage { Ingest, Curate, Consolidate, Render };
std::string_view to_string(PipelineStage stage);
std::optional<PipelineStage> pipeline_stage_from_string(std::string_view name);

struct CurationConfig {
  double dedup_iou = kDefaultDedupIou;
  std::optional<fs::path> lexicon;
  std::optional<std::vector<std::string>> responsive_phrases;
  bool task_level = true;
  bool annotation_level = true;
  bool grounding = true;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  int jobs = 1;
  int coord_bins = kDefaultCoordBins;
  std::vector<SourceDescriptor> sources;
  bool lenient = false;
  CurationConfig curation;
  fs::path mix;
  std::optional<fs::path> templates;  // builtin pack when absent
  std::int64_t budget = kStage23Budget;
  fs::path out;
};

// Parses and checks a config document. Relative paths resolve against
// `base_dir`. Every referenced file must exist; the seed is mandatory.
PipelineConfig pipeline_config_from_json(const Json& j, const fs::path& base_dir);
// Loads from a file; FORGE_OUT, when set, replaces the output directory.
PipelineConfig load_pipeline_config(const fs::path& path);

struct PipelineSummary {
  std::string output_hash;  // SHA-256 over conversations.jsonl then manifest.json
  std::size_t conversations = 0;
  Json stages = Json::object();
};

// Runs the selected stages (all when empty) in order. Stages that are not
// selected read the previous stage's outputs from disk. Errors are rethrown
// with the stage name in the locator.
PipelineSummary run_pipeline(const PipelineConfig& cfg, const std::set<PipelineStage>& stages, EventLog& log);

// SHA-256 of render/conversations.jsonl followed by consolidate/manifest.json.
std::string pipeline_output_hash(const fs::path& out_dir);

// Per-task corpus statistics over samples.jsonl (and regions.jsonl for
// detail levels) in `dir`. A missing or empty directory gives all zeros.
Json corpus_stats(const fs::path& dir);

// Display row name for a task kind.
std::string_view table_row_name(TaskKind kind);

}  // namespace forge
