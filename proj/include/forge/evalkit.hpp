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

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/geometry.hpp"
#include "forge/io.hpp"
#include "forge/model.hpp"

namespace forge {

struct Prediction {
  std::string image_id;
  std::string label;
  Box box;  // AbsolutePixels
  double score = 1.0;
  std::size_t rank = 0;  // emission order; breaks score ties
};

struct GroundTruth {
  std::string image_id;
  std::string label;
  Box box;
};

struct AreaRange {
  std::string name;
  double lo = 0;
  double hi = std::numeric_limits<double>::infinity();  // [lo, hi)
};

// Standard COCO box protocol; every constant is overridable.
struct CocoParams {
  std::vector<double> iou_thresholds;  // 0.50:0.05:0.95
  std::size_t recall_points = 101;
  std::size_t max_dets = 100;
  std::vector<AreaRange> area_ranges;  // all, small, medium, large

  static CocoParams standard();
};

struct EvalReport {
  // nullopt when no category has ground truth in the band.
  std::optional<double> map, ap50, ap75, aps, apm, apl;
  std::map<std::string, double> per_category_ap;  // mean over thresholds, area "all"
  std::size_t matched = 0;      // true positives at IoU 0.5, area all
  std::size_t unmatched_predictions = 0;
  std::size_t unmatched_ground_truth = 0;
  std::vector<std::string> warnings;

  Json to_json() const;
};

// Precision/recall evaluation for one (category, area band, threshold).
// Returns nullopt when no non-ignored ground truth exists.
struct ApCell {
  std::optional<double> ap;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t ground_truth = 0;
};

// Parallel kernel (OpenMP over the category x band x threshold grid).
EvalReport coco_map(const std::vector<Prediction>& preds, const std::vector<GroundTruth>& gts,
                    const CocoParams& params = CocoParams::standard(), int jobs = 0);

// Serial reference: same protocol, straight nested loops.
EvalReport coco_map_reference(const std::vector<Prediction>& preds, const std::vector<GroundTruth>& gts,
                              const CocoParams& params = CocoParams::standard());

// ---- REC -------------------------------------------------------------------------

struct RecQuery {
  std::string query_id;
  Box gt;
  std::string split;
};

struct RecResult {
  double accuracy = 0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::map<std::string, double> split_accuracy;
  Json to_json() const;
};

// Top-1 accuracy: a query is correct when IoU(pred, gt) > threshold
// (>= with `inclusive`). Queries whose prediction is nullopt (unparseable)
// count as wrong. Throws MissingQuery when a ground-truth query has no
// prediction record at all.
RecResult rec_accuracy(const std::map<std::string, std::optional<Box>>& preds, const std::vector<RecQuery>& gts,
                       double threshold = 0.5, bool inclusive = false);

// mean |pred - gt| over (pred_count, gt_count) pairs; 0 for no pairs.
double counting_mae(const std::vector<std::pair<long long, long long>>& counts);

// ---- file front-ends used by `forge eval` ---------------------------------------

enum class EvalTask { Detection, Rec, Counting };

struct EvalFiles {
  EvalTask task = EvalTask::Detection;
  fs::path preds;
  fs::path gt;
  int coord_bins = kDefaultCoordBins;
  bool iou_geq = false;
  int jobs = 0;
};

Json run_eval(const EvalFiles& files);

}  // namespace forge
