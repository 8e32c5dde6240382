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

#include "doctest.h"
#include "forge/error.hpp"
#include "forge/ingest.hpp"
#include "test_util.hpp"

using namespace forge;
using testutil::TempDir;
using testutil::write_file;

namespace {

SourceDescriptor descriptor(Source name, SourceFormat format, const fs::path& path) { return {name, format, path}; }

ErrorCode ingest_error(const SourceDescriptor& d, const IngestOptions& opts = {}) {
  try {
    ingest(d, opts);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected ingest to fail");
  return ErrorCode::Io;
}

const char* kCoco = R"({
  "images": [{"id": 1, "width": 100, "height": 100, "file_name": "a.jpg"},
             {"id": 2, "width": 50, "height": 40, "file_name": "b.jpg"}],
  "annotations": [{"id": 7, "image_id": 1, "category_id": 3, "bbox": [10, 20, 30, 40]}],
  "categories": [{"id": 3, "name": "Dog"}]
})";

}  // namespace

TEST_CASE("coco detection: box conversion and empty images") {
  TempDir dir;
  write_file(dir / "coco.json", kCoco);
  auto r = ingest(descriptor(Source::MSCOCO, SourceFormat::CocoDetectionJson, dir / "coco.json"));
  REQUIRE(r.images.size() == 2);
  const auto& img = r.images[0];
  CHECK(img.image_id == "mscoco:1");
  REQUIRE(img.regions.size() == 1);
  const auto& region = img.regions[0];
  CHECK(region.box.x1 == 10);
  CHECK(region.box.y1 == 20);
  CHECK(region.box.x2 == 40);
  CHECK(region.box.y2 == 60);
  CHECK(region.category == std::optional<std::string>("dog"));
  CHECK(region.expression == "dog");
  CHECK(region.source == Source::MSCOCO);
  CHECK(r.images[1].regions.empty());
  CHECK(r.ledger.read == 1);
  CHECK(r.ledger.emitted == 1);
}

TEST_CASE("coco detection: empty annotation list keeps images") {
  TempDir dir;
  write_file(dir / "c.json", R"({"images":[{"id":1,"width":10,"height":10}],"annotations":[],"categories":[]})");
  auto r = ingest(descriptor(Source::Objects365, SourceFormat::CocoDetectionJson, dir / "c.json"));
  REQUIRE(r.images.size() == 1);
  CHECK(r.images[0].regions.empty());
}

TEST_CASE("coco detection: dangling references") {
  TempDir dir;
  write_file(dir / "img.json", R"({"images":[{"id":1,"width":10,"height":10}],
    "annotations":[{"image_id":9,"category_id":1,"bbox":[0,0,1,1]}],"categories":[{"id":1,"name":"a"}]})");
  write_file(dir / "cat.json", R"({"images":[{"id":1,"width":10,"height":10}],
    "annotations":[{"image_id":1,"category_id":5,"bbox":[0,0,1,1]}],"categories":[{"id":1,"name":"a"}]})");
  CHECK(ingest_error(descriptor(Source::MSCOCO, SourceFormat::CocoDetectionJson, dir / "img.json")) ==
        ErrorCode::DanglingImageId);
  CHECK(ingest_error(descriptor(Source::MSCOCO, SourceFormat::CocoDetectionJson, dir / "cat.json")) ==
        ErrorCode::DanglingCategoryId);

  IngestOptions lenient;
  lenient.lenient = true;
  auto r = ingest(descriptor(Source::MSCOCO, SourceFormat::CocoDetectionJson, dir / "img.json"), lenient);
  CHECK(r.ledger.read == 1);
  CHECK(r.ledger.dropped == 1);
  CHECK(r.ledger.emitted == 0);
  REQUIRE(r.ledger.drops.size() == 1);
  CHECK(r.ledger.drops[0].reason.find("DanglingImageId") != std::string::npos);
}

TEST_CASE("malformed json is reported with a position") {
  TempDir dir;
  write_file(dir / "bad.json", R"({"images": [)");
  try {
    ingest(descriptor(Source::MSCOCO, SourceFormat::CocoDetectionJson, dir / "bad.json"));
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedJson);
    CHECK_FALSE(e.locator().empty());
  }
}

TEST_CASE("referring: fan-out, negatives and the left sandwich") {
  TempDir dir;
  write_file(dir / "refs.json", R"({
    "images": [{"id": 5, "width": 200, "height": 100}],
    "refs": [
      {"image_id": 5, "sentences": ["left sandwich"], "bbox": [0, 0, 50, 50]},
      {"image_id": 5, "sentences": [{"sent": "a red car"}, {"sent": "the red vehicle"}], "bbox": [60, 10, 40, 30]},
      {"image_id": 5, "sentences": ["the cat"], "bboxes": []}
    ]})");
  auto r = ingest(descriptor(Source::GRefCOCO, SourceFormat::ReferringJson, dir / "refs.json"));
  REQUIRE(r.images.size() == 1);
  const auto& img = r.images[0];
  REQUIRE(img.regions.size() == 3);
  CHECK(img.regions[0].expression == "left sandwich");
  CHECK_FALSE(img.regions[0].category.has_value());
  CHECK(img.regions[0].detail_level == DetailLevel::Unclassified);
  CHECK(img.regions[1].expression == "a red car");
  CHECK(img.regions[2].expression == "the red vehicle");
  CHECK(img.regions[1].box.x1 == img.regions[2].box.x1);
  CHECK(img.regions[1].box.x2 == 100);
  CHECK(img.negative_expressions == std::vector<std::string>{"the cat"});
  CHECK(r.ledger.negatives == 1);
  CHECK(r.ledger.read == r.ledger.emitted + r.ledger.dropped);
}

TEST_CASE("referring: empty expression and malformed record") {
  TempDir dir;
  write_file(dir / "e.json", R"({"images":[{"id":1,"width":10,"height":10}],
    "refs":[{"image_id":1,"sentences":["   "],"bbox":[0,0,1,1]}]})");
  CHECK(ingest_error(descriptor(Source::RefCOCO, SourceFormat::ReferringJson, dir / "e.json")) ==
        ErrorCode::EmptyExpression);
  write_file(dir / "m.json", R"({"images":[{"id":1,"width":10,"height":10}],"refs":[{"image_id":1,"sentences":["x"]}]})");
  CHECK(ingest_error(descriptor(Source::RefCOCO, SourceFormat::ReferringJson, dir / "m.json")) ==
        ErrorCode::MalformedRecord);
}

TEST_CASE("region descriptions: passthrough, duplicates kept, clamping") {
  TempDir dir;
  write_file(dir / "vg.json", R"([{"id": 1, "width": 100, "height": 100, "regions": [
      {"phrase": "a man riding a bike", "x": 10, "y": 10, "width": 20, "height": 20},
      {"phrase": "a man riding a bike", "x": 10, "y": 10, "width": 20, "height": 20},
      {"phrase": "sky", "x": 0, "y": 0, "width": 101.5, "height": 30}]}])");
  const auto d = descriptor(Source::VisualGenome, SourceFormat::RegionDescriptionJson, dir / "vg.json");
  CHECK(ingest_error(d) == ErrorCode::OutOfBounds);

  IngestOptions lenient;
  lenient.lenient = true;
  auto r = ingest(d, lenient);
  REQUIRE(r.images.size() == 1);
  const auto& regions = r.images[0].regions;
  REQUIRE(regions.size() == 3);
  CHECK(regions[0].expression == "a man riding a bike");
  CHECK(regions[1].expression == "a man riding a bike");
  CHECK(regions[2].box.x2 == 100);
  CHECK(r.ledger.clamped == 1);
  CHECK(r.ledger.emitted == 3);

  write_file(dir / "far.json", R"([{"id": 1, "width": 100, "height": 100, "regions": [
      {"phrase": "sky", "x": 0, "y": 0, "width": 103, "height": 30}]}])");
  auto far = ingest(descriptor(Source::VisualGenome, SourceFormat::RegionDescriptionJson, dir / "far.json"), lenient);
  CHECK(far.ledger.dropped == 1);
  CHECK(far.ledger.emitted == 0);
  CHECK(far.images[0].regions.empty());
}

TEST_CASE("detailed sources arrive pre-labeled") {
  TempDir dir;
  write_file(dir / "o.json", R"([{"id": 1, "width": 100, "height": 100, "regions": [
      {"phrase": "dog", "bbox": [0, 0, 10, 10]}]}])");
  auto r = ingest(descriptor(Source::Osprey, SourceFormat::RegionDescriptionJson, dir / "o.json"));
  CHECK(r.images[0].regions[0].detail_level == DetailLevel::Detailed);
}

TEST_CASE("text only sources") {
  TempDir dir;
  write_file(dir / "t.jsonl",
             R"({"id": "a", "turns": [{"role": "user", "text": "hi"}, {"role": "assistant", "text": "hello"}]})"
             "\n"
             R"({"turns": [{"role":"user","text":"1"},{"role":"assistant","text":"2"},{"role":"user","text":"3"},)"
             R"({"role":"assistant","text":"4"},{"role":"user","text":"5"},{"role":"assistant","text":"6"}]})"
             "\n");
  auto r = ingest(descriptor(Source::UltraChat, SourceFormat::PlainTextJsonl, dir / "t.jsonl"));
  REQUIRE(r.samples.size() == 2);
  CHECK(r.samples[0].kind == TaskKind::LanguageOnly);
  CHECK_FALSE(r.samples[0].image_ref.has_value());
  CHECK(r.samples[0].sample_id == "txt:ultrachat:a");
  const auto& six = std::get<DialoguePayload>(r.samples[1].payload).turns;
  REQUIRE(six.size() == 6);
  for (int i = 0; i < 6; ++i) CHECK(six[static_cast<std::size_t>(i)].text == std::to_string(i + 1));

  write_file(dir / "img.jsonl", R"({"image": "x.jpg", "turns": [{"role": "user", "text": "hi"}]})" "\n");
  CHECK(ingest_error(descriptor(Source::UltraChat, SourceFormat::PlainTextJsonl, dir / "img.jsonl")) ==
        ErrorCode::HasImageInTextSource);
}

TEST_CASE("captions become Caption samples") {
  TempDir dir;
  write_file(dir / "c.jsonl", R"({"image_id": 4, "width": 10, "height": 10, "uri": "4.jpg", "caption": "A  dog."})" "\n");
  auto r = ingest(descriptor(Source::ShareGPT4V, SourceFormat::CaptionJsonl, dir / "c.jsonl"));
  REQUIRE(r.samples.size() == 1);
  CHECK(r.samples[0].kind == TaskKind::Caption);
  CHECK(r.samples[0].image_ref == std::optional<std::string>("sharegpt4v:4"));
  CHECK(std::get<CaptionPayload>(r.samples[0].payload).caption == "A dog.");
  CHECK(r.images.size() == 1);
}

TEST_CASE("canonical output is byte-identical across runs and reloads") {
  TempDir dir;
  write_file(dir / "coco.json", kCoco);
  const auto d = descriptor(Source::MSCOCO, SourceFormat::CocoDetectionJson, dir / "coco.json");
  write_ingest_output(ingest(d), dir / "a");
  write_ingest_output(ingest(d), dir / "b");
  for (const char* f : {"images.jsonl", "regions.jsonl", "ledger.json"})
    CHECK(testutil::read_file(dir / "a" / f) == testutil::read_file(dir / "b" / f));
  const Corpus corpus = load_corpus(dir / "a");
  REQUIRE(corpus.images.size() == 2);
  CHECK(corpus.images[0].regions.size() == 1);
  CHECK(corpus.images[0].regions[0].category == std::optional<std::string>("dog"));
  const Json ledger = read_json_file(dir / "a" / "ledger.json");
  for (const char* k : {"read", "emitted", "clamped", "dropped"}) CHECK(ledger.contains(k));
}
