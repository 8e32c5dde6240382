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
#include <string>
#include <vector>

#include "forge/io.hpp"
#include "forge/model.hpp"

namespace forge {

enum class SourceFormat { CocoDetectionJson, RegionDescriptionJson, ReferringJson, CaptionJsonl, PlainTextJsonl };

std::string_view to_string(SourceFormat format);
// Accepts the enum spelling or the short CLI names (coco, regions, referring,
// caption, text).
std::optional<SourceFormat> source_format_from_string(std::string_view name);

struct SourceDescriptor {
  Source name = Source::MSCOCO;
  SourceFormat format = SourceFormat::CocoDetectionJson;
  fs::path path;
};

struct IngestOptions {
  bool lenient = false;
  // Lenient mode clamps boxes that overflow the image by at most this much.
  double clamp_tolerance_px = 2.0;
};

struct DropRecord {
  std::string locator;
  std::string reason;
};

// read = emitted + dropped. Zero-target referring expressions are counted in
// `negatives` and are neither read nor emitted regions.
struct IngestLedger {
  std::size_t read = 0;
  std::size_t emitted = 0;
  std::size_t clamped = 0;
  std::size_t dropped = 0;
  std::size_t negatives = 0;
  std::size_t images = 0;
  std::vector<DropRecord> drops;

  Json to_json() const;
};

struct IngestResult {
  SourceDescriptor source;
  std::vector<AnnotatedImage> images;
  std::vector<TaskSample> samples;
  IngestLedger ledger;
};

IngestResult ingest_coco_detection(const SourceDescriptor& src, const IngestOptions& opts = {});
IngestResult ingest_referring(const SourceDescriptor& src, const IngestOptions& opts = {});
IngestResult ingest_region_descriptions(const SourceDescriptor& src, const IngestOptions& opts = {});
IngestResult ingest_captions(const SourceDescriptor& src, const IngestOptions& opts = {});
IngestResult ingest_text_only(const SourceDescriptor& src, const IngestOptions& opts = {});

// Dispatches on src.format.
IngestResult ingest(const SourceDescriptor& src, const IngestOptions& opts = {});

// Writes images.jsonl + regions.jsonl (+ samples.jsonl when present) and
// ledger.json, each atomically.
void write_ingest_output(const IngestResult& result, const fs::path& out_dir);

struct Corpus {
  std::vector<AnnotatedImage> images;
  std::vector<TaskSample> samples;
};

// Loads the canonical files written by write_ingest_output. Missing files are
// treated as empty.
Corpus load_corpus(const fs::path& dir);

}  // namespace forge
