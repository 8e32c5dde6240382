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

#include "forge/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include "forge/convo.hpp"
#include "forge/error.hpp"
#include "forge/parallel.hpp"
#include "forge/text.hpp"

namespace forge {

CocoParams CocoParams::standard() {
  CocoParams p;
  for (int i = 0; i < 10; ++i) p.iou_thresholds.push_back(0.5 + 0.05 * i);
  p.area_ranges = {{"all", 0.0, std::numeric_limits<double>::infinity()},
                   {"small", 0.0, 32.0 * 32.0},
                   {"medium", 32.0 * 32.0, 96.0 * 96.0},
                   {"large", 96.0 * 96.0, std::numeric_limits<double>::infinity()}};
  return p;
}

namespace {

Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

// Detections and ground truth of one (category, image) pair.
struct Bucket {
  std::vector<std::size_t> gts;
  std::vector<std::size_t> dts;  // sorted by (score desc, rank asc), truncated to max_dets
};

struct Index {
  std::vector<std::string> categories;
  // buckets[c] : image -> bucket, iterated in image_id order.
  std::vector<std::map<std::string, Bucket>> buckets;
  std::vector<std::string> warnings;
};

bool dt_before(const Prediction& a, const Prediction& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.rank < b.rank;
}

Index build_index(const std::vector<Prediction>& preds, const std::vector<GroundTruth>& gts,
                  const CocoParams& params) {
  Index index;
  std::set<std::string> labels;
  for (const auto& g : gts) labels.insert(g.label);
  index.categories.assign(labels.begin(), labels.end());
  std::unordered_map<std::string, std::size_t> cat_of;
  for (std::size_t c = 0; c < index.categories.size(); ++c) cat_of[index.categories[c]] = c;
  index.buckets.resize(index.categories.size());

  for (std::size_t i = 0; i < gts.size(); ++i) index.buckets[cat_of.at(gts[i].label)][gts[i].image_id].gts.push_back(i);

  std::set<std::string> orphan_labels;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    auto it = cat_of.find(preds[i].label);
    if (it == cat_of.end()) {
      orphan_labels.insert(preds[i].label);
      continue;
    }
    index.buckets[it->second][preds[i].image_id].dts.push_back(i);
  }
  for (const auto& l : orphan_labels)
    index.warnings.push_back("EmptyGroundTruth: category '" + l + "' has predictions but no ground truth; skipped");

  for (auto& per_image : index.buckets) {
    for (auto& [image, bucket] : per_image) {
      std::stable_sort(bucket.dts.begin(), bucket.dts.end(),
                       [&](std::size_t a, std::size_t b) { return dt_before(preds[a], preds[b]); });
      if (bucket.dts.size() > params.max_dets) bucket.dts.resize(params.max_dets);
    }
  }
  return index;
}

struct DtRecord {
  double score;
  std::size_t rank;
  bool matched;
  bool ignored;
};

bool in_band(double area, const AreaRange& band) { return area >= band.lo && area < band.hi; }

// COCO greedy matching inside one image. `iou_at(d, g)` gives IoU between the
// d-th detection and g-th ground truth of the bucket.
template <typename IouFn>
std::size_t match_image(const Bucket& bucket, const std::vector<Prediction>& preds,
                        const std::vector<GroundTruth>& gts, const AreaRange& band, double threshold, IouFn&& iou_at,
                        std::vector<DtRecord>& out) {
  const std::size_t ng = bucket.gts.size();
  std::vector<char> ignore(ng);
  for (std::size_t g = 0; g < ng; ++g) ignore[g] = in_band(gts[bucket.gts[g]].box.area(), band) ? 0 : 1;
  // Non-ignored ground truth is matched first.
  std::vector<std::size_t> order(ng);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ignore[a] < ignore[b]; });

  std::vector<char> taken(ng, 0);
  for (std::size_t d = 0; d < bucket.dts.size(); ++d) {
    const Prediction& p = preds[bucket.dts[d]];
    double best_iou = std::min(threshold, 1.0 - 1e-10);
    long best = -1;
    for (std::size_t g : order) {
      if (taken[g]) continue;
      if (best > -1 && !ignore[static_cast<std::size_t>(best)] && ignore[g]) break;
      const double v = iou_at(d, g);
      if (v < best_iou) continue;
      best_iou = v;
      best = static_cast<long>(g);
    }
    if (best > -1) {
      taken[static_cast<std::size_t>(best)] = 1;
      out.push_back({p.score, p.rank, true, ignore[static_cast<std::size_t>(best)] != 0});
    } else {
      out.push_back({p.score, p.rank, false, !in_band(p.box.area(), band)});
    }
  }
  return static_cast<std::size_t>(std::count(ignore.begin(), ignore.end(), 0));
}

ApCell accumulate(std::vector<DtRecord>& records, std::size_t npig, std::size_t recall_points) {
  ApCell cell;
  cell.ground_truth = npig;
  std::stable_sort(records.begin(), records.end(), [](const DtRecord& a, const DtRecord& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.rank < b.rank;
  });
  std::vector<double> recall, precision;
  std::size_t tp = 0, fp = 0;
  for (const auto& r : records) {
    if (r.ignored) continue;
    (r.matched ? tp : fp)++;
    recall.push_back(npig ? double(tp) / double(npig) : 0.0);
    precision.push_back(double(tp) / double(tp + fp));
  }
  cell.true_positives = tp;
  cell.false_positives = fp;
  if (npig == 0) return cell;
  for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double sum = 0;
  for (std::size_t k = 0; k < recall_points; ++k) {
    const double r = recall_points > 1 ? double(k) / double(recall_points - 1) : 0.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  cell.ap = sum / double(recall_points);
  return cell;
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& values) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& v : values)
    if (v) {
      sum += *v;
      ++n;
    }
  if (!n) return std::nullopt;
  return sum / double(n);
}

// cells[(c * bands + a) * thresholds + t]
EvalReport summarize(const Index& index, const std::vector<ApCell>& cells, const CocoParams& params) {
  EvalReport report;
  report.warnings = index.warnings;
  const std::size_t nc = index.categories.size(), na = params.area_ranges.size(), nt = params.iou_thresholds.size();
  auto at = [&](std::size_t c, std::size_t a, std::size_t t) -> const ApCell& { return cells[(c * na + a) * nt + t]; };

  auto band_index = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t a = 0; a < na; ++a)
      if (params.area_ranges[a].name == name) return a;
    return std::nullopt;
  };
  auto threshold_index = [&](double v) -> std::optional<std::size_t> {
    for (std::size_t t = 0; t < nt; ++t)
      if (std::abs(params.iou_thresholds[t] - v) < 1e-9) return t;
    return std::nullopt;
  };
  auto band_mean = [&](std::optional<std::size_t> a, std::optional<std::size_t> only_t) -> std::optional<double> {
    if (!a) return std::nullopt;
    std::vector<std::optional<double>> v;
    for (std::size_t c = 0; c < nc; ++c)
      for (std::size_t t = 0; t < nt; ++t)
        if (!only_t || *only_t == t) v.push_back(at(c, *a, t).ap);
    return mean_of(v);
  };

  const auto all = band_index("all");
  report.map = band_mean(all, std::nullopt);
  report.ap50 = band_mean(all, threshold_index(0.5));
  report.ap75 = band_mean(all, threshold_index(0.75));
  report.aps = band_mean(band_index("small"), std::nullopt);
  report.apm = band_mean(band_index("medium"), std::nullopt);
  report.apl = band_mean(band_index("large"), std::nullopt);

  if (all) {
    for (std::size_t c = 0; c < nc; ++c) {
      std::vector<std::optional<double>> v;
      for (std::size_t t = 0; t < nt; ++t) v.push_back(at(c, *all, t).ap);
      if (auto m = mean_of(v)) report.per_category_ap[index.categories[c]] = *m;
    }
    if (auto t50 = threshold_index(0.5)) {
      for (std::size_t c = 0; c < nc; ++c) {
        const ApCell& cell = at(c, *all, *t50);
        report.matched += cell.true_positives;
        report.unmatched_predictions += cell.false_positives;
        report.unmatched_ground_truth += cell.ground_truth - cell.true_positives;
      }
    }
  }
  return report;
}

}  // namespace

Json EvalReport::to_json() const {
  return {{"mAP", opt_json(map)},
          {"AP50", opt_json(ap50)},
          {"AP75", opt_json(ap75)},
          {"APS", opt_json(aps)},
          {"APM", opt_json(apm)},
          {"APL", opt_json(apl)},
          {"per_category_ap", per_category_ap},
          {"matched", matched},
          {"unmatched_predictions", unmatched_predictions},
          {"unmatched_ground_truth", unmatched_ground_truth},
          {"warnings", warnings}};
}

EvalReport coco_map_reference(const std::vector<Prediction>& preds, const std::vector<GroundTruth>& gts,
                              const CocoParams& params) {
  const Index index = build_index(preds, gts, params);
  const std::size_t nc = index.categories.size(), na = params.area_ranges.size(), nt = params.iou_thresholds.size();
  std::vector<ApCell> cells(nc * na * nt);
  for (std::size_t c = 0; c < nc; ++c) {
    for (std::size_t a = 0; a < na; ++a) {
      for (std::size_t t = 0; t < nt; ++t) {
        std::vector<DtRecord> records;
        std::size_t npig = 0;
        for (const auto& [image, bucket] : index.buckets[c]) {
          auto iou_at = [&](std::size_t d, std::size_t g) {
            return iou(preds[bucket.dts[d]].box, gts[bucket.gts[g]].box);
          };
          npig += match_image(bucket, preds, gts, params.area_ranges[a], params.iou_thresholds[t], iou_at, records);
        }
        cells[(c * na + a) * nt + t] = accumulate(records, npig, params.recall_points);
      }
    }
  }
  return summarize(index, cells, params);
}

EvalReport coco_map(const std::vector<Prediction>& preds, const std::vector<GroundTruth>& gts,
                    const CocoParams& params, int jobs) {
  const Index index = build_index(preds, gts, params);
  const std::size_t nc = index.categories.size(), na = params.area_ranges.size(), nt = params.iou_thresholds.size();

  // IoU matrices once per (category, image), shared by every band/threshold.
  struct Work {
    const Bucket* bucket;
    std::vector<double> ious;  // dts x gts, row-major
  };
  std::vector<std::vector<Work>> work(nc);
  std::vector<std::pair<std::size_t, std::size_t>> flat;
  for (std::size_t c = 0; c < nc; ++c) {
    for (const auto& [image, bucket] : index.buckets[c]) {
      flat.emplace_back(c, work[c].size());
      work[c].push_back({&bucket, {}});
    }
  }
  parallel_for(flat.size(), jobs, [&](std::size_t i) {
    Work& w = work[flat[i].first][flat[i].second];
    const auto& b = *w.bucket;
    w.ious.resize(b.dts.size() * b.gts.size());
    for (std::size_t d = 0; d < b.dts.size(); ++d)
      for (std::size_t g = 0; g < b.gts.size(); ++g)
        w.ious[d * b.gts.size() + g] = iou(preds[b.dts[d]].box, gts[b.gts[g]].box);
  });

  std::vector<ApCell> cells(nc * na * nt);
  parallel_for(cells.size(), jobs, [&](std::size_t cell) {
    const std::size_t c = cell / (na * nt), a = (cell / nt) % na, t = cell % nt;
    std::vector<DtRecord> records;
    std::size_t npig = 0;
    for (const auto& w : work[c]) {
      const std::size_t ng = w.bucket->gts.size();
      auto iou_at = [&](std::size_t d, std::size_t g) { return w.ious[d * ng + g]; };
      npig += match_image(*w.bucket, preds, gts, params.area_ranges[a], params.iou_thresholds[t], iou_at, records);
    }
    cells[cell] = accumulate(records, npig, params.recall_points);
  });
  return summarize(index, cells, params);
}

// ---- REC / counting -----------------------------------------------------------------

Json RecResult::to_json() const {
  return {{"accuracy", accuracy}, {"correct", correct}, {"total", total}, {"split_accuracy", split_accuracy}};
}

RecResult rec_accuracy(const std::map<std::string, std::optional<Box>>& preds, const std::vector<RecQuery>& gts,
                       double threshold, bool inclusive) {
  RecResult result;
  std::map<std::string, std::pair<std::size_t, std::size_t>> splits;  // correct, total
  for (const auto& q : gts) {
    auto it = preds.find(q.query_id);
    if (it == preds.end()) throw Error(ErrorCode::MissingQuery, "no prediction for query " + q.query_id);
    bool ok = false;
    if (it->second) {
      const double v = iou(*it->second, q.gt);
      ok = inclusive ? v >= threshold : v > threshold;
    }
    ++result.total;
    auto& s = splits[q.split];
    ++s.second;
    if (ok) {
      ++result.correct;
      ++s.first;
    }
  }
  result.accuracy = result.total ? double(result.correct) / double(result.total) : 0.0;
  for (const auto& [name, cs] : splits) result.split_accuracy[name] = double(cs.first) / double(cs.second);
  return result;
}

double counting_mae(const std::vector<std::pair<long long, long long>>& counts) {
  if (counts.empty()) return 0.0;
  double sum = 0;
  for (const auto& [pred, gt] : counts) sum += std::abs(double(pred - gt));
  return sum / double(counts.size());
}

// ---- file front-ends ---------------------------------------------------------------

namespace {

struct ImageSize {
  int width = 0, height = 0;
};

Box pixels_from_grid(const Box& grid, const ImageSize& size) { return from_grid(grid, size.width, size.height); }

std::string query_key(const Json& j) {
  if (j.contains("query_id")) {
    const auto& q = j.at("query_id");
    return q.is_string() ? q.get<std::string>() : q.dump();
  }
  if (j.contains("image_id") && j.at("image_id").is_string()) return j.at("image_id").get<std::string>();
  throw Error(ErrorCode::MalformedRecord, "record needs query_id or image_id");
}

std::vector<Box> parse_boxes_or_empty(const std::string& text, int bins, std::vector<std::string>& notes) {
  try {
    auto parsed = parse_localization(text, bins);
    std::vector<Box> out;
    for (const auto& e : parsed.entries) out.insert(out.end(), e.boxes.begin(), e.boxes.end());
    return out;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoBoxesFound) throw;
    notes.push_back(e.what());
    return {};
  }
}

Json eval_detection(const EvalFiles& f) {
  std::vector<GroundTruth> gts;
  std::map<std::string, ImageSize> sizes;
  std::set<std::string> labels;
  for_each_jsonl(f.gt, [&](const Json& j, std::size_t) {
    const auto image_id = j.at("image_id").get<std::string>();
    if (j.contains("width") && j.contains("height")) sizes[image_id] = {j.at("width").get<int>(), j.at("height").get<int>()};
    auto add = [&](const Json& o) {
      GroundTruth g{image_id, normalize_label(o.at("label").get<std::string>()), box_from_json(o.at("bbox"))};
      labels.insert(g.label);
      gts.push_back(std::move(g));
    };
    if (j.contains("objects")) {
      for (const auto& o : j.at("objects")) add(o);
    } else if (j.contains("label")) {
      add(j);
    }
  });
  const std::vector<std::string> known(labels.begin(), labels.end());

  std::vector<Prediction> preds;
  std::size_t rank = 0, parse_failures = 0, recovered = 0;
  for_each_jsonl(f.preds, [&](const Json& j, std::size_t) {
    const auto image_id = j.at("image_id").get<std::string>();
    if (j.contains("raw_text")) {
      auto size = sizes.find(image_id);
      if (size == sizes.end())
        throw Error(ErrorCode::MalformedRecord, "raw_text prediction for image without size in ground truth", image_id);
      ParsedLocalization parsed;
      try {
        parsed = parse_localization(j.at("raw_text").get<std::string>(), f.coord_bins, known);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoBoxesFound) throw;
        ++parse_failures;
        return;
      }
      if (parsed.recovered) ++recovered;
      for (const auto& e : parsed.entries)
        for (const auto& b : e.boxes)
          preds.push_back({image_id, normalize_label(e.label), pixels_from_grid(b, size->second), 1.0, rank++});
    } else {
      Prediction p{image_id, normalize_label(j.at("label").get<std::string>()), box_from_json(j.at("bbox")),
                   j.value("score", 1.0), rank++};
      if (p.score < 0 || p.score > 1) throw Error(ErrorCode::MalformedRecord, "score outside [0, 1]", image_id);
      preds.push_back(std::move(p));
    }
  });
  Json report = coco_map(preds, gts, CocoParams::standard(), f.jobs).to_json();
  report["task"] = "detection";
  report["parse_failures"] = parse_failures;
  report["recovered_outputs"] = recovered;
  return report;
}

Json eval_rec(const EvalFiles& f) {
  std::vector<RecQuery> queries;
  std::map<std::string, ImageSize> sizes;
  for_each_jsonl(f.gt, [&](const Json& j, std::size_t) {
    RecQuery q{query_key(j), box_from_json(j.at("bbox")), j.value("split", std::string("default"))};
    sizes[q.query_id] = {j.value("width", 0), j.value("height", 0)};
    queries.push_back(std::move(q));
  });
  std::map<std::string, std::optional<Box>> preds;
  std::vector<std::string> notes;
  for_each_jsonl(f.preds, [&](const Json& j, std::size_t) {
    const auto key = query_key(j);
    if (j.contains("raw_text")) {
      auto boxes = parse_boxes_or_empty(j.at("raw_text").get<std::string>(), f.coord_bins, notes);
      const auto& size = sizes[key];
      if (boxes.empty() || size.width <= 0 || size.height <= 0) {
        preds[key] = std::nullopt;
      } else {
        preds[key] = pixels_from_grid(boxes.front(), size);
      }
    } else if (j.contains("bbox")) {
      preds[key] = box_from_json(j.at("bbox"));
    } else {
      preds[key] = std::nullopt;
    }
  });
  Json report = rec_accuracy(preds, queries, 0.5, f.iou_geq).to_json();
  report["task"] = "rec";
  report["criterion"] = f.iou_geq ? "iou>=0.5" : "iou>0.5";
  report["unparseable"] = notes.size();
  return report;
}

Json eval_counting(const EvalFiles& f) {
  std::map<std::string, long long> gt_counts;
  std::vector<std::string> order;
  for_each_jsonl(f.gt, [&](const Json& j, std::size_t) {
    const auto key = query_key(j);
    long long count = j.contains("count") ? j.at("count").get<long long>()
                                          : static_cast<long long>(j.value("boxes", Json::array()).size());
    if (!gt_counts.count(key)) order.push_back(key);
    gt_counts[key] = count;
  });
  std::map<std::string, long long> pred_counts;
  std::vector<std::string> notes;
  for_each_jsonl(f.preds, [&](const Json& j, std::size_t) {
    const auto key = query_key(j);
    if (j.contains("raw_text")) {
      pred_counts[key] =
          static_cast<long long>(parse_boxes_or_empty(j.at("raw_text").get<std::string>(), f.coord_bins, notes).size());
    } else {
      pred_counts[key] = j.value("count", 0LL);
    }
  });
  std::vector<std::pair<long long, long long>> pairs;
  for (const auto& key : order) {
    auto it = pred_counts.find(key);
    pairs.emplace_back(it == pred_counts.end() ? 0 : it->second, gt_counts[key]);
  }
  return {{"task", "counting"}, {"mae", counting_mae(pairs)}, {"queries", pairs.size()}, {"unparseable", notes.size()}};
}

}  // namespace

Json run_eval(const EvalFiles& files) {
  try {
    switch (files.task) {
      case EvalTask::Detection: return eval_detection(files);
      case EvalTask::Rec: return eval_rec(files);
      case EvalTask::Counting: return eval_counting(files);
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("bad evaluation record: ") + e.what());
  }
  throw Error(ErrorCode::InvalidArgument, "unknown evaluation task");
}

}  // namespace forge
