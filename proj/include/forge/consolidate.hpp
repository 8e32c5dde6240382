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
#include <string>
#include <vector>

#include "forge/io.hpp"
#include "forge/model.hpp"

namespace forge {

enum class Split { Pretrain, Instruction };

std::string_view to_string(Split split);
std::optional<Split> split_from_string(std::string_view name);
bool kind_allowed(Split split, TaskKind kind);

struct MixEntry {
  TaskKind kind = TaskKind::Caption;
  std::vector<std::string> sources;  // empty = any source
  std::optional<std::size_t> quota;
  std::optional<double> fraction;  // of the matching stream, floored

  bool matches(const TaskSample& sample) const;
};

struct MixSpec {
  Split split = Split::Pretrain;
  std::uint64_t seed = 0;
  std::vector<MixEntry> entries;

  // Throws Config on invalid quotas, unknown kinds or sources, and kinds not
  // allowed in the split.
  void validate() const;
  static MixSpec from_json(const Json& j);
  // A file holds one MixSpec or a bundle {"splits": {"pretrain": ..., ...}};
  // bundles with several splits need `split`.
  static MixSpec load(const fs::path& path, std::optional<Split> split = std::nullopt);
  Json to_json() const;
};

struct EntryReport {
  TaskKind kind = TaskKind::Caption;
  std::vector<std::string> sources;
  std::size_t quota = 0;
  std::size_t available = 0;
  std::size_t selected = 0;
  std::size_t emitted = 0;  // selected minus duplicates removed at merge
  std::size_t shortfall = 0;
};

struct SplitManifest {
  Split split = Split::Pretrain;
  std::uint64_t seed = 0;
  std::vector<EntryReport> entries;
  std::size_t deduped = 0;
  std::size_t total = 0;
  std::string content_hash;  // SHA-256 of samples.jsonl
  std::vector<std::string> warnings;

  Json to_json() const;
  static SplitManifest from_json(const Json& j);
};

struct ConsolidateResult {
  std::vector<TaskSample> samples;
  SplitManifest manifest;
};

// Algorithm R over `stream` with an explicit generator; returns the indices of
// the kept elements in stream order.
std::vector<std::size_t> reservoir_indices(std::size_t stream_size, std::size_t quota, std::uint64_t seed);

// Dedup key: image id plus FNV-1a of the kind and canonical payload.
std::string dedup_key(const TaskSample& sample);

// Throws UnresolvedSource when an entry with a positive quota matches no input.
ConsolidateResult consolidate(const MixSpec& mix, const std::vector<TaskSample>& inputs, int jobs = 0);

std::string samples_jsonl(const std::vector<TaskSample>& samples);
void write_consolidated(const ConsolidateResult& result, const fs::path& out_dir);

// samples.jsonl under `dir`, or nothing when absent.
std::vector<TaskSample> load_samples(const fs::path& dir);

struct VerifyRow {
  std::string name;
  TaskKind kind = TaskKind::Caption;
  std::int64_t expected = 0;
  std::int64_t actual = 0;
  std::int64_t tolerance = 0;
  bool desk_verifiable = true;
  bool pass = true;

  std::int64_t delta() const { return actual - expected; }
};

struct VerifyReport {
  std::vector<VerifyRow> rows;
  bool all_pass = true;
  Json to_json() const;
};

// Reference table JSON:
//   {"rows": [{"name", "kind", "expected", "tolerance"?, "scale": "desk"|"full"}]}
// Rows are compared against the emitted count summed over entries of the same
// kind. A {"splits": {...}} bundle is indexed by the manifest's split.
// "full" rows record the target and are flagged not desk-verifiable.
VerifyReport verify_manifest(const SplitManifest& manifest, const Json& reference);

}  // namespace forge
