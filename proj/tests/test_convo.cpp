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

#include <functional>
#include <random>
#include <set>
#include <regex>

#include "doctest.h"
#include "forge/convo.hpp"
#include "forge/error.hpp"
#include "forge/geometry.hpp"
#include "test_util.hpp"

using namespace forge;

namespace {

Box grid(double x1, double y1, double x2, double y2) { return {x1, y1, x2, y2, CoordSpace::grid(1000)}; }
Box px(double x1, double y1, double x2, double y2) { return {x1, y1, x2, y2, CoordSpace::pixels()}; }

std::optional<ErrorCode> code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

std::string user_text(const ConversationRecord& r) { return r.turns.at(0).text; }
std::string answer(const ConversationRecord& r) { return r.turns.at(1).text; }

}  // namespace

TEST_CASE("box serialization") {
  CHECK(serialize_box(grid(0, 0, 1000, 1000)) == "[0, 0, 1000, 1000]");
  CHECK(serialize_box(grid(10, 20, 300, 400)) == "[10, 20, 300, 400]");
  CHECK(serialize_localization({}) == "None");
  CHECK(serialize_localization({{"dog", {grid(1, 2, 3, 4), grid(5, 6, 7, 8)}}, {"zebra", {}}}) ==
        "dog-[1, 2, 3, 4][5, 6, 7, 8]\nzebra-None");
}

TEST_CASE("strict parse examples") {
  auto p = parse_localization("dog-[10, 20, 300, 400]\ncat-None");
  CHECK_FALSE(p.recovered);
  REQUIRE(p.entries.size() == 2);
  CHECK(p.entries[0].label == "dog");
  CHECK(p.entries[0].boxes == std::vector<Box>{grid(10, 20, 300, 400)});
  CHECK(p.entries[1].boxes.empty());

  auto semi = parse_localization("dog-[1, 2, 3, 4]; cat-[5,6,7,8][9, 10, 11, 12]");
  CHECK_FALSE(semi.recovered);
  REQUIRE(semi.entries.size() == 2);
  CHECK(semi.entries[1].boxes.size() == 2);

  auto counted = parse_localization("apple-[1, 2, 3, 4][5, 6, 7, 8]\n2");
  CHECK(counted.count == 2);
  CHECK(counted.entries[0].boxes.size() == 2);

  auto none = parse_localization("None");
  CHECK(none.entries.empty());
  CHECK_FALSE(none.recovered);
}

TEST_CASE("recovery from free text") {
  auto p = parse_localization("Sure! The dog is at [10, 20, 300, 400].");
  CHECK(p.recovered);
  REQUIRE(p.entries.size() == 1);
  CHECK(p.entries[0].label == "dog");
  CHECK(p.entries[0].boxes == std::vector<Box>{grid(10, 20, 300, 400)});
  CHECK(p.diagnostics.size() >= 2);

  auto known = parse_localization("I see a red car [1, 2, 3, 4] and the traffic light [5,6,7,8]", 1000,
                                  {"car", "traffic light"});
  REQUIRE(known.entries.size() == 2);
  CHECK(known.entries[0].label == "car");
  CHECK(known.entries[1].label == "traffic light");

  auto decimals = parse_localization("dog [1.5, 2, 3, 4] cat [1, 2, 3, 4]");
  REQUIRE(decimals.entries.size() == 1);
  CHECK(decimals.entries[0].label == "cat");

  CHECK(code_of([] { parse_localization("no boxes here at all"); }) == ErrorCode::NoBoxesFound);
  CHECK(code_of([] { parse_localization(""); }) == ErrorCode::NoBoxesFound);
}

TEST_CASE("serialize then parse round-trips") {
  std::mt19937_64 rng(21);
  const std::vector<std::string> labels{"dog", "cat", "traffic light", "hot dog", "person", "cup"};
  for (int t = 0; t < 2000; ++t) {
    std::vector<LabeledBoxes> entries;
    std::vector<std::string> pool = labels;
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t n = rng() % 5;
    for (std::size_t i = 0; i < n; ++i) {
      LabeledBoxes e{pool[i], {}};
      const std::size_t m = rng() % 4;
      for (std::size_t k = 0; k < m; ++k) {
        const double x1 = double(rng() % 999), y1 = double(rng() % 999);
        e.boxes.push_back(grid(x1, y1, x1 + 1 + double(rng() % std::size_t(1000 - x1)),
                               y1 + 1 + double(rng() % std::size_t(1000 - y1))));
      }
      entries.push_back(std::move(e));
    }
    const std::string text = serialize_localization(entries);
    const auto parsed = parse_localization(text);
    CHECK_FALSE(parsed.recovered);
    CHECK(parsed.entries == entries);
  }
}

TEST_CASE("recovery never invents coordinates") {
  // Every recovered box must be one of the well-formed integer groups present
  // in the text, found here by a regex scan.
  const std::regex group(R"(\[\s*\+?(\d+)\s*,\s*\+?(\d+)\s*,\s*\+?(\d+)\s*,\s*\+?(\d+)\s*\])");
  const std::vector<std::string> noise{"the", "dog", "is", "at", "[", "]", ",", "3", "4.5", "-2", "[1, 2]", "cat:",
                                       "\n", "located", "[7, 8, 9, 10]", "[ 11 ,12, 13,14 ]", "[1,2,3,4.0]"};
  std::mt19937_64 rng(5);
  for (int t = 0; t < 3000; ++t) {
    std::string text;
    const int len = 1 + int(rng() % 20);
    for (int k = 0; k < len; ++k) text += noise[rng() % noise.size()] + (rng() % 2 ? " " : "");
    std::multiset<std::array<double, 4>> expected;
    for (std::sregex_iterator it(text.begin(), text.end(), group), end; it != end; ++it)
      expected.insert({std::stod((*it)[1]), std::stod((*it)[2]), std::stod((*it)[3]), std::stod((*it)[4])});
    std::multiset<std::array<double, 4>> got;
    try {
      const auto p = parse_localization(text);
      for (const auto& e : p.entries)
        for (const auto& b : e.boxes) got.insert({b.x1, b.y1, b.x2, b.y2});
      if (p.recovered) CHECK_MESSAGE(got == expected, text);
      else CHECK(std::includes(expected.begin(), expected.end(), got.begin(), got.end()));
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoBoxesFound);
      CHECK_MESSAGE(expected.empty(), text);
    }
  }
}

TEST_CASE("length estimate") {
  ConversationRecord empty;
  CHECK(estimate_length(empty) == 0);
  ConversationRecord r{"x", std::nullopt, {{Role::User, "one two three"}, {Role::Assistant, " four\tfive\n"}}, 0};
  CHECK(estimate_length(r) == 7);  // ceil(5 * 1.3)
  ConversationRecord ten{"x", std::nullopt, {{Role::User, "a b c d e f g h i j"}}, 0};
  CHECK(estimate_length(ten) == 13);

  std::string big;
  for (int i = 0; i < 5000; ++i) big += "w ";
  ConversationRecord longer{"x", std::nullopt, {{Role::User, big}}, 0};
  CHECK(check_length(longer, 4096).over_budget);
  CHECK(check_length(longer, 4096).estimate == 6500);
  CHECK_FALSE(check_length(r, 2048).over_budget);
  CHECK(code_of([&] { check_length(r, 1000); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("template validation") {
  CHECK_NOTHROW(TemplatePack::builtin().validate());
  const auto shipped = TemplatePack::load(testutil::source_dir() / "data" / "templates.json");
  CHECK(shipped.to_json() == TemplatePack::builtin().to_json());

  Json j = TemplatePack::builtin().to_json();
  j["templates"].erase("Counting");
  CHECK(code_of([&] { TemplatePack::from_json(j); }) == ErrorCode::MissingTemplate);

  j = TemplatePack::builtin().to_json();
  j["templates"]["REC"] = Json::array({"Where is it?"});
  CHECK_THROWS_AS(TemplatePack::from_json(j), Error);

  testutil::TempDir dir;
  CHECK_THROWS_AS(TemplatePack::load(dir.path() / "missing.json"), Error);
}

TEST_CASE("serialize_sample per kind") {
  const auto pack = TemplatePack::builtin();
  RenderOptions opts{3, 1000};

  TaskSample rec{"rec:1", TaskKind::REC, "img1", Source::RefCOCO,
                 RecPayload{200, 100, "the left dog", px(0, 0, 100, 50)}};
  auto r = serialize_sample(rec, pack, opts);
  CHECK(user_text(r).rfind("<image>\n", 0) == 0);
  CHECK(user_text(r).find("the left dog") != std::string::npos);
  CHECK(answer(r) == "[0, 0, 500, 500]");
  CHECK(check_conversation(r).empty());
  CHECK(r.token_estimate == estimate_length(r));

  TaskSample reg{"reg:1", TaskKind::REG, "img1", Source::RefCOCO,
                 RegPayload{200, 100, px(0, 0, 100, 50), "a long description", DetailLevel::Detailed}};
  auto g = serialize_sample(reg, pack, opts);
  CHECK(user_text(g).find("more detailed") != std::string::npos);
  CHECK(user_text(g).find("[0, 0, 500, 500]") != std::string::npos);
  CHECK(answer(g) == "a long description");

  TaskSample grd{"grd:1", TaskKind::Grounding, "img1", Source::V3Det,
                 ObjectsPayload{200, 100, {{"dog", {px(0, 0, 100, 50)}}, {"zebra", {}}}}};
  CHECK(answer(serialize_sample(grd, pack, opts)) == "dog-[0, 0, 500, 500]\nzebra-None");
  TaskSample empty_grd{"grd:2", TaskKind::Grounding, "img1", Source::V3Det, ObjectsPayload{200, 100, {}}};
  CHECK(answer(serialize_sample(empty_grd, pack, opts)) == "None");

  TaskSample cnt{"cnt:1", TaskKind::Counting, "img1", Source::FSCD,
                 CountingPayload{200, 100, "apple", {px(0, 0, 10, 10), px(20, 20, 30, 30)}}};
  const auto c = serialize_sample(cnt, pack, opts);
  const auto parsed = parse_localization(answer(c));
  CHECK(parsed.count == 2);
  CHECK(parsed.entries.at(0).boxes.size() == 2);

  TaskSample chat{"txt:1", TaskKind::LanguageOnly, std::nullopt, Source::UltraChat,
                  DialoguePayload{{{Role::User, "hello?"}, {Role::Assistant, "hi"}}}};
  const auto t = serialize_sample(chat, pack, opts);
  CHECK(user_text(t).find("<image>") == std::string::npos);
  CHECK(user_text(t).find("hello?") != std::string::npos);
  CHECK(answer(t) == "hi");

  CHECK(sample_to_json(rec) == sample_to_json(rec));
  CHECK(conversation_to_json(serialize_sample(rec, pack, opts)) == conversation_to_json(r));
}

TEST_CASE("check_conversation flags bad turns") {
  ConversationRecord bad{"x", std::nullopt, {{Role::Assistant, "[5, 5, 1, 1]"}}, 0};
  const auto v = check_conversation(bad);
  CHECK(v.size() == 2);
  ConversationRecord out_of_grid{"x", std::nullopt, {{Role::User, "q"}, {Role::Assistant, "[0, 0, 1001, 5]"}}, 0};
  CHECK(check_conversation(out_of_grid).size() == 1);
}

TEST_CASE("render_samples drops over-budget records and is job-independent") {
  const auto pack = TemplatePack::builtin();
  std::vector<TaskSample> samples;
  for (int i = 0; i < 50; ++i)
    samples.push_back({"cap:" + std::to_string(i), TaskKind::Caption, "img" + std::to_string(i), Source::ShareGPT4V,
                       CaptionPayload{"a caption " + std::to_string(i)}});
  std::string huge;
  for (int i = 0; i < 3000; ++i) huge += "word ";
  samples.push_back({"cap:huge", TaskKind::Caption, "imgh", Source::ShareGPT4V, CaptionPayload{huge}});
  const auto one = render_samples(samples, pack, {9, 1000}, 2048, 1);
  const auto many = render_samples(samples, pack, {9, 1000}, 2048, 8);
  CHECK(one.ledger.input == 51);
  CHECK(one.ledger.over_budget == 1);
  CHECK(one.ledger.rendered == 50);
  REQUIRE(one.records.size() == many.records.size());
  for (std::size_t i = 0; i < one.records.size(); ++i)
    CHECK(conversation_to_json(one.records[i]) == conversation_to_json(many.records[i]));
  CHECK(render_samples(samples, pack, {9, 1000}, 4096, 1).ledger.over_budget == 0);
}
