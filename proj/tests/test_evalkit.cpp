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

#include <random>
#include <set>

#include "doctest.h"
#include "forge/error.hpp"
#include "forge/evalkit.hpp"
#include "forge/geometry.hpp"
#include "oracles/coco_oracle.hpp"
#include "test_util.hpp"

using namespace forge;

namespace {

Box px(double x1, double y1, double x2, double y2) { return {x1, y1, x2, y2, CoordSpace::pixels()}; }

std::array<double, 4> arr(const Box& b) { return {b.x1, b.y1, b.x2, b.y2}; }

struct Problem {
  std::vector<Prediction> preds;
  std::vector<GroundTruth> gts;
};

Problem random_problem(std::mt19937_64& rng) {
  Problem p;
  const std::vector<std::string> labels{"dog", "cat", "car"};
  const int images = 1 + int(rng() % 5);
  auto coord = [&](int lo, int span) { return double(lo + int(rng() % std::uint64_t(span))); };
  std::size_t rank = 0;
  for (int i = 0; i < images; ++i) {
    const std::string id = "img" + std::to_string(i);
    const int ng = int(rng() % 6);
    for (int g = 0; g < ng; ++g) {
      const double x = coord(0, 200), y = coord(0, 200);
      p.gts.push_back({id, labels[rng() % 2], px(x, y, x + coord(4, 150), y + coord(4, 150))});
    }
    const int nd = int(rng() % 8);
    for (int d = 0; d < nd; ++d) {
      Box b;
      std::string label = labels[rng() % 3];
      if (!p.gts.empty() && rng() % 3) {
        const auto& src = p.gts[rng() % p.gts.size()];
        b = src.box;
        label = rng() % 4 ? src.label : label;
        b.x1 += coord(-6, 13);
        b.y1 += coord(-6, 13);
        b.x2 = std::max(b.x1 + 1, b.x2 + coord(-6, 13));
        b.y2 = std::max(b.y1 + 1, b.y2 + coord(-6, 13));
      } else {
        const double x = coord(0, 200), y = coord(0, 200);
        b = px(x, y, x + coord(4, 150), y + coord(4, 150));
      }
      p.preds.push_back({id, label, b, double(1 + rng() % 9) / 10.0, rank++});
    }
  }
  return p;
}

void check_close(const std::optional<double>& got, const std::optional<double>& want) {
  REQUIRE(got.has_value() == want.has_value());
  if (got) CHECK(*got == doctest::Approx(*want).epsilon(1e-12));
}

void check_against_oracle(const Problem& p) {
  std::vector<oracle::Det> dets;
  std::vector<oracle::Gt> gts;
  for (const auto& d : p.preds) dets.push_back({d.image_id, d.label, arr(d.box), d.score, d.rank});
  for (const auto& g : p.gts) gts.push_back({g.image_id, g.label, arr(g.box)});
  const auto r = coco_map_reference(p.preds, p.gts);
  const double inf = std::numeric_limits<double>::infinity();
  check_close(r.map, oracle::mean_ap(dets, gts));
  check_close(r.aps, oracle::mean_ap(dets, gts, 0, 32 * 32));
  check_close(r.apm, oracle::mean_ap(dets, gts, 32 * 32, 96 * 96));
  check_close(r.apl, oracle::mean_ap(dets, gts, 96 * 96, inf));
  for (const auto& [label, ap] : r.per_category_ap) {
    double sum = 0;
    for (double t : oracle::coco_thresholds()) sum += oracle::average_precision(dets, gts, label, t).value();
    CHECK(ap == doctest::Approx(sum / 10).epsilon(1e-12));
  }
  std::set<std::string> labels;
  for (const auto& g : gts) labels.insert(g.label);
  double s50 = 0, s75 = 0;
  for (const auto& l : labels) {
    s50 += oracle::average_precision(dets, gts, l, 0.5).value();
    s75 += oracle::average_precision(dets, gts, l, 0.75).value();
  }
  if (!labels.empty()) {
    CHECK(r.ap50.value() == doctest::Approx(s50 / double(labels.size())).epsilon(1e-12));
    CHECK(r.ap75.value() == doctest::Approx(s75 / double(labels.size())).epsilon(1e-12));
  }
}

}  // namespace

TEST_CASE("iou examples") {
  CHECK(iou(px(0, 0, 10, 10), px(0, 0, 10, 10)) == 1.0);
  CHECK(iou(px(0, 0, 10, 10), px(10, 0, 20, 10)) == 0.0);
  CHECK(iou(px(0, 0, 10, 10), px(0, 0, 10, 6)) == doctest::Approx(0.6));
  CHECK(iou(px(0, 0, 10, 10), px(5, 0, 15, 10)) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("detection mAP examples") {
  SUBCASE("perfect predictions") {
    std::vector<GroundTruth> gts{{"a", "dog", px(0, 0, 50, 50)}, {"a", "cat", px(60, 60, 200, 200)},
                                 {"b", "dog", px(5, 5, 20, 20)}};
    std::vector<Prediction> preds;
    for (std::size_t i = 0; i < gts.size(); ++i) preds.push_back({gts[i].image_id, gts[i].label, gts[i].box, 0.9, i});
    const auto r = coco_map(preds, gts);
    CHECK(r.map.value() == 1.0);
    CHECK(r.ap50.value() == 1.0);
    CHECK(r.matched == 3);
    CHECK(r.unmatched_predictions == 0);
    CHECK(r.unmatched_ground_truth == 0);
  }
  SUBCASE("IoU 0.6 passes AP50 and fails AP75") {
    const auto r = coco_map({{"a", "dog", px(0, 0, 10, 6), 0.9, 0}}, {{"a", "dog", px(0, 0, 10, 10)}});
    CHECK(r.ap50.value() == 1.0);
    CHECK(r.ap75.value() == 0.0);
    CHECK(r.map.value() == doctest::Approx(0.3));  // thresholds 0.50, 0.55, 0.60
  }
  SUBCASE("confident false positive ahead of the true positive") {
    const auto r = coco_map({{"a", "dog", px(100, 100, 120, 120), 0.9, 0}, {"a", "dog", px(0, 0, 10, 10), 0.8, 1}},
                            {{"a", "dog", px(0, 0, 10, 10)}});
    CHECK(r.map.value() == doctest::Approx(0.5));
    CHECK(r.matched == 1);
    CHECK(r.unmatched_predictions == 1);
  }
  SUBCASE("score ties fall back to emission order") {
    const std::vector<GroundTruth> gts{{"a", "dog", px(0, 0, 10, 10)}};
    const auto first_good = coco_map({{"a", "dog", px(0, 0, 10, 10), 0.5, 0}, {"a", "dog", px(50, 50, 60, 60), 0.5, 1}}, gts);
    const auto first_bad = coco_map({{"a", "dog", px(0, 0, 10, 10), 0.5, 1}, {"a", "dog", px(50, 50, 60, 60), 0.5, 0}}, gts);
    CHECK(first_good.map.value() == 1.0);
    CHECK(first_bad.map.value() == doctest::Approx(0.5));
  }
  SUBCASE("area bands are half-open") {
    const auto r = coco_map({{"a", "dog", px(0, 0, 32, 32), 1.0, 0}}, {{"a", "dog", px(0, 0, 32, 32)}});
    CHECK_FALSE(r.aps.has_value());
    CHECK(r.apm.value() == 1.0);
    CHECK_FALSE(r.apl.has_value());
  }
  SUBCASE("labels without ground truth") {
    const auto r = coco_map({{"a", "zebra", px(0, 0, 5, 5), 1.0, 0}, {"a", "dog", px(0, 0, 5, 5), 1.0, 1}},
                            {{"a", "dog", px(0, 0, 5, 5)}});
    CHECK(r.map.value() == 1.0);
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].find("zebra") != std::string::npos);
    CHECK_FALSE(coco_map({{"a", "zebra", px(0, 0, 5, 5), 1.0, 0}}, {}).map.has_value());
  }
  SUBCASE("max detections per image") {
    std::vector<Prediction> preds;
    for (std::size_t i = 0; i < 150; ++i) preds.push_back({"a", "dog", px(500, 500, 510, 510), 0.9, i});
    preds.push_back({"a", "dog", px(0, 0, 10, 10), 0.1, 150});
    CHECK(coco_map(preds, {{"a", "dog", px(0, 0, 10, 10)}}).map.value() == 0.0);
  }
}

TEST_CASE("reference evaluator agrees with the brute-force oracle") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 300; ++t) check_against_oracle(random_problem(rng));
}

TEST_CASE("parallel kernel equals the serial reference") {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 100; ++t) {
    const auto p = random_problem(rng);
    const auto ref = coco_map_reference(p.preds, p.gts).to_json();
    CHECK(coco_map(p.preds, p.gts, CocoParams::standard(), 1).to_json() == ref);
    CHECK(coco_map(p.preds, p.gts, CocoParams::standard(), 4).to_json() == ref);
  }
}

TEST_CASE("invariance to prediction order and uniform scaling") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 100; ++t) {
    auto p = random_problem(rng);
    const auto base = coco_map(p.preds, p.gts);
    auto shuffled = p.preds;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(coco_map(shuffled, p.gts).to_json() == base.to_json());

    for (auto& d : p.preds) d.box = px(d.box.x1 * 4, d.box.y1 * 4, d.box.x2 * 4, d.box.y2 * 4);
    for (auto& g : p.gts) g.box = px(g.box.x1 * 4, g.box.y1 * 4, g.box.x2 * 4, g.box.y2 * 4);
    const auto scaled = coco_map(p.preds, p.gts);
    CHECK(scaled.map == base.map);
    CHECK(scaled.ap50 == base.ap50);
    CHECK(scaled.ap75 == base.ap75);
    CHECK(scaled.per_category_ap == base.per_category_ap);
  }
}

TEST_CASE("REC accuracy") {
  const std::vector<RecQuery> gts{{"q1", px(0, 0, 10, 10), "val"}, {"q2", px(0, 0, 10, 10), "testA"},
                                  {"q3", px(0, 0, 10, 10), "testA"}};
  std::map<std::string, std::optional<Box>> preds{
      {"q1", px(0, 0, 10, 10)}, {"q2", px(0, 0, 10, 5)}, {"q3", std::nullopt}};
  const auto strict = rec_accuracy(preds, gts);
  CHECK(strict.correct == 1);
  CHECK(strict.total == 3);
  CHECK(strict.accuracy == doctest::Approx(1.0 / 3.0));
  CHECK(strict.split_accuracy.at("val") == 1.0);
  CHECK(strict.split_accuracy.at("testA") == 0.0);
  CHECK(rec_accuracy(preds, gts, 0.5, true).correct == 2);  // IoU exactly 0.5

  preds.erase("q3");
  try {
    rec_accuracy(preds, gts);
    FAIL("expected MissingQuery");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingQuery);
  }
}

TEST_CASE("counting MAE") {
  CHECK(counting_mae({}) == 0.0);
  CHECK(counting_mae({{3, 5}, {4, 4}}) == 1.0);
  CHECK(counting_mae({{0, 7}}) == 7.0);
  CHECK(counting_mae({{10, 7}, {7, 10}}) == 3.0);
}

TEST_CASE("run_eval file front-ends") {
  testutil::TempDir dir;
  const auto gt = dir.path() / "gt.jsonl", preds = dir.path() / "preds.jsonl";

  SUBCASE("detection") {
    testutil::write_file(gt, R"({"image_id":"a","width":100,"height":100,"objects":[{"label":"dog","bbox":[0,0,50,50]},{"label":"cat","bbox":[50,50,100,100]}]})"
                             "\n");
    testutil::write_file(preds, R"({"image_id":"a","raw_text":"dog-[0, 0, 500, 500]\ncat-[500, 500, 1000, 1000]"})"
                                "\n");
    auto r = run_eval({EvalTask::Detection, preds, gt});
    CHECK(r.at("mAP").get<double>() == 1.0);
    CHECK(r.at("task") == "detection");
    CHECK(r.at("recovered_outputs") == 0);

    testutil::write_file(preds, R"({"image_id":"a","raw_text":"I found a dog at [0, 0, 500, 500]."})"
                                "\n" R"({"image_id":"a","raw_text":"nothing"})" "\n");
    r = run_eval({EvalTask::Detection, preds, gt});
    CHECK(r.at("AP50").get<double>() == 0.5);
    CHECK(r.at("recovered_outputs") == 1);
    CHECK(r.at("parse_failures") == 1);

    testutil::write_file(preds, R"({"image_id":"a","label":"dog","bbox":[0,0,50,50],"score":0.7})" "\n");
    CHECK(run_eval({EvalTask::Detection, preds, gt}).at("AP50").get<double>() == 0.5);
    testutil::write_file(preds, R"({"image_id":"a","label":"dog","bbox":[0,0,50,50],"score":1.7})" "\n");
    CHECK_THROWS_AS(run_eval({EvalTask::Detection, preds, gt}), Error);
    testutil::write_file(preds, R"({"image_id":"a","label":"dog"})" "\n");
    CHECK_THROWS_AS(run_eval({EvalTask::Detection, preds, gt}), Error);
  }
  SUBCASE("rec") {
    testutil::write_file(gt, R"({"query_id":"q1","bbox":[0,0,50,50],"width":100,"height":100,"split":"val"})" "\n"
                             R"({"query_id":"q2","bbox":[0,0,50,50],"width":100,"height":100,"split":"val"})" "\n");
    testutil::write_file(preds, R"({"query_id":"q1","raw_text":"[0, 0, 500, 500]"})" "\n"
                                R"({"query_id":"q2","raw_text":"no idea"})" "\n");
    auto r = run_eval({EvalTask::Rec, preds, gt});
    CHECK(r.at("accuracy").get<double>() == 0.5);
    CHECK(r.at("unparseable") == 1);
    CHECK(r.at("criterion") == "iou>0.5");
    testutil::write_file(preds, R"({"query_id":"q1","bbox":[0,0,50,50]})" "\n");
    CHECK_THROWS_AS(run_eval({EvalTask::Rec, preds, gt}), Error);
  }
  SUBCASE("counting") {
    testutil::write_file(gt, R"({"query_id":"c1","count":3})" "\n" R"({"query_id":"c2","count":1})" "\n");
    testutil::write_file(preds, R"({"query_id":"c1","raw_text":"apple-[1, 1, 5, 5][6, 6, 9, 9]\n2"})" "\n"
                                R"({"query_id":"c2","count":1})" "\n");
    auto r = run_eval({EvalTask::Counting, preds, gt});
    CHECK(r.at("mae").get<double>() == 0.5);
    CHECK(r.at("queries") == 2);
  }
}
