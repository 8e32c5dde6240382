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

#include <cstdlib>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "forge/consolidate.hpp"
#include "forge/convo.hpp"
#include "forge/curate.hpp"
#include "forge/error.hpp"
#include "forge/evalkit.hpp"
#include "forge/ingest.hpp"
#include "forge/pipeline.hpp"
#include "forge/planner.hpp"

namespace {

using namespace forge;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitVerify = 3;

Source parse_source(const std::string& name) {
  auto s = source_from_string(name);
  if (!s) throw Error(ErrorCode::Config, "unknown source '" + name + "'");
  return *s;
}

int cmd_ingest(const std::string& source, const std::string& format, const std::string& in, const std::string& out,
               bool lenient, EventLog& log) {
  auto f = source_format_from_string(format);
  if (!f) throw Error(ErrorCode::Config, "unknown format '" + format + "'");
  SourceDescriptor d{parse_source(source), *f, in};
  if (!fs::exists(d.path)) throw Error(ErrorCode::Config, "input not found", in);
  IngestOptions opts;
  opts.lenient = lenient;
  auto result = ingest(d, opts);
  write_ingest_output(result, out);
  log.emit("stage_done", "ingest", {{"ledger", result.ledger.to_json()}});
  std::cerr << "ingest " << source << ": " << result.ledger.emitted << " regions from " << result.ledger.images
            << " images, " << result.ledger.dropped << " dropped, " << result.ledger.clamped << " clamped\n";
  return kExitOk;
}

struct CurateArgs {
  std::vector<std::string> in;
  std::string out;
  std::uint64_t seed = 0;
  double dedup_iou = kDefaultDedupIou;
  bool task_level = false;
  bool annotation_level = false;
  bool no_grounding = false;
  std::string lexicon;
  int jobs = 1;
};

int cmd_curate(const CurateArgs& a, EventLog& log) {
  Corpus corpus;
  for (const auto& dir : a.in) {
    if (!fs::exists(dir)) throw Error(ErrorCode::Config, "input directory not found", dir);
    auto part = load_corpus(dir);
    std::move(part.images.begin(), part.images.end(), std::back_inserter(corpus.images));
    std::move(part.samples.begin(), part.samples.end(), std::back_inserter(corpus.samples));
  }
  CurateOptions opts;
  const bool neither = !a.task_level && !a.annotation_level;
  opts.task_level = neither || a.task_level;
  opts.annotation_level = neither || a.annotation_level;
  opts.grounding = opts.task_level && !a.no_grounding;
  opts.dedup_iou = a.dedup_iou;
  opts.seed = a.seed;
  opts.jobs = a.jobs;
  if (!a.lexicon.empty()) opts.lexicon = Lexicon::load(a.lexicon);
  auto result = curate(corpus, opts);
  write_curated(result, a.out);
  log.emit("stage_done", "curate", {{"samples", result.samples.size()}, {"report", result.report.to_json()}});
  std::cerr << "curate: " << result.samples.size() << " samples from " << corpus.images.size() << " images\n";
  return kExitOk;
}

int cmd_consolidate(const std::string& mix_path, const std::string& split_name, const std::vector<std::string>& in,
                    const std::string& out, const std::string& verify, int jobs, EventLog& log) {
  std::optional<Split> split;
  if (!split_name.empty()) {
    split = split_from_string(split_name);
    if (!split) throw Error(ErrorCode::Config, "split must be pretrain or instruction");
  }
  const MixSpec mix = MixSpec::load(mix_path, split);
  Json reference;
  if (!verify.empty()) {
    if (!fs::exists(verify)) throw Error(ErrorCode::Config, "reference table not found", verify);
    reference = read_json_file(verify);
  }
  std::vector<TaskSample> inputs;
  for (const auto& dir : in) {
    if (!fs::exists(dir)) throw Error(ErrorCode::Config, "input directory not found", dir);
    auto part = load_samples(dir);
    std::move(part.begin(), part.end(), std::back_inserter(inputs));
  }
  auto result = consolidate(mix, inputs, jobs);
  write_consolidated(result, out);
  log.emit("stage_done", "consolidate", {{"manifest", result.manifest.to_json()}});
  std::cerr << "consolidate: " << result.manifest.total << " samples, " << result.manifest.deduped << " deduped\n";
  for (const auto& w : result.manifest.warnings) std::cerr << "  warning: " << w << "\n";
  if (!verify.empty()) {
    auto report = verify_manifest(result.manifest, reference);
    log.emit("verify", "consolidate", {{"report", report.to_json()}});
    for (const auto& r : report.rows) {
      std::cerr << "  " << r.name << ": expected " << r.expected << ", got " << r.actual;
      std::cerr << (!r.desk_verifiable ? " (not desk-verifiable)" : r.pass ? " ok" : " FAIL") << "\n";
    }
    if (!report.all_pass) return kExitVerify;
  }
  return kExitOk;
}

int cmd_render(const std::string& templates, const std::string& in, const std::string& out, std::int64_t budget,
               std::uint64_t seed, int bins, int jobs, EventLog& log) {
  TemplatePack pack = templates.empty() ? TemplatePack::builtin() : TemplatePack::load(templates);
  pack.validate();
  if (budget != kStage1Budget && budget != kStage23Budget)
    throw Error(ErrorCode::Config, "budget must be 2048 or 4096");
  if (!fs::exists(in)) throw Error(ErrorCode::Config, "input directory not found", in);
  RenderOptions opts;
  opts.seed = seed;
  opts.coord_bins = bins;
  auto result = render_directory(in, out, pack, opts, budget, jobs);
  log.emit("stage_done", "render", {{"ledger", result.ledger.to_json()}});
  std::cerr << "render: " << result.ledger.rendered << " conversations, " << result.ledger.over_budget
            << " over budget\n";
  return kExitOk;
}

int cmd_eval(const std::string& task, const std::string& preds, const std::string& gt, const std::string& report_path,
             int bins, bool iou_geq, int jobs, EventLog& log) {
  EvalFiles f;
  if (task == "detection") f.task = EvalTask::Detection;
  else if (task == "rec") f.task = EvalTask::Rec;
  else if (task == "counting") f.task = EvalTask::Counting;
  else throw Error(ErrorCode::Config, "task must be detection, rec or counting");
  for (const auto& p : {preds, gt})
    if (!fs::exists(p)) throw Error(ErrorCode::Config, "file not found", p);
  f.preds = preds;
  f.gt = gt;
  f.coord_bins = bins;
  f.iou_geq = iou_geq;
  f.jobs = jobs;
  Json report = run_eval(f);
  if (!report_path.empty()) write_json_file(report_path, report);
  log.emit("stage_done", "eval", {{"report", report}});
  std::cerr << "eval " << task << ": " << report.dump() << "\n";
  return kExitOk;
}

int cmd_plan(const std::string& scale, const std::string& out, bool halve_stage1, const std::string& validate,
             EventLog& log) {
  if (!validate.empty()) {
    if (!fs::exists(validate)) throw Error(ErrorCode::Config, "plan file not found", validate);
    const Json doc = read_json_file(validate);
    const Json stages = doc.contains("stages") ? doc.at("stages") : doc.is_array() ? doc : Json::array({doc});
    Json violations = Json::array();
    for (const auto& sj : stages) {
      auto plan = StagePlan::from_json(sj);
      for (const auto& v : validate_plan(plan)) {
        violations.push_back({{"stage", to_string(plan.stage)}, {"violation", v}});
        std::cerr << to_string(plan.stage) << ": " << v << "\n";
      }
    }
    log.emit("validate", "plan", {{"violations", violations}});
    return violations.empty() ? kExitOk : kExitVerify;
  }
  PlanOptions opts;
  opts.halve_stage1_for_27b = halve_stage1;
  auto plans = default_plans(scale, opts);
  const Json doc = plans_to_json(scale, plans);
  if (!out.empty()) write_json_file(out, doc);
  else std::cout << doc.dump(2) << "\n";
  for (const auto& p : plans)
    std::cerr << to_string(p.stage) << ": lr " << p.base_lr << ", encoder lr " << p.encoder_lr() << ", "
              << p.sharding_level << ", max_len " << p.max_len << "\n";
  if (!out.empty()) log.emit("stage_done", "plan", {{"scale", scale}, {"out", out}});
  return kExitOk;
}

int cmd_shapes(const ShapeSpec& spec, EventLog& log) {
  auto report = shape_report(spec);
  log.emit("stage_done", "shapes", {{"shapes", report.to_json()}});
  std::cerr << "pretrain " << spec.pretrain_res << "px: " << report.pretrain.side << "x" << report.pretrain.side
            << " = " << report.pretrain.tokens << " tokens\n"
            << "encoder " << spec.encoder_res << "px: " << report.encoder.side << "x" << report.encoder.side << " = "
            << report.encoder.tokens << " tokens\n"
            << "connector: " << report.connector.side << "x" << report.connector.side << " = "
            << report.connector.tokens << " tokens\n";
  return kExitOk;
}

int cmd_stats(const std::string& in, const std::string& out, EventLog& log) {
  Json stats = corpus_stats(in);
  if (!out.empty()) write_json_file(out, stats);
  log.emit("stage_done", "stats", {{"stats", stats}});
  for (const auto& [row, n] : stats.at("rows").items()) std::cerr << row << ": " << n.get<std::size_t>() << "\n";
  return kExitOk;
}

int cmd_pipeline(const std::string& config, const std::vector<std::string>& stage_names, int jobs, EventLog& log) {
  PipelineConfig cfg = load_pipeline_config(config);
  if (jobs != 0) cfg.jobs = jobs;
  std::set<PipelineStage> stages;
  for (const auto& name : stage_names) {
    auto s = pipeline_stage_from_string(name);
    if (!s) throw Error(ErrorCode::Config, "unknown stage '" + name + "'");
    stages.insert(*s);
  }
  auto summary = run_pipeline(cfg, stages, log);
  std::cerr << "pipeline: " << summary.conversations << " conversations";
  if (!summary.output_hash.empty()) std::cerr << ", output hash " << summary.output_hash;
  std::cerr << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"forge: grounding/caption curation, textual-coordinate rendering and evaluation toolkit"};
  app.require_subcommand(1);

  std::string source, format, in_path, out_path;
  bool lenient = false;
  auto* ingest_cmd = app.add_subcommand("ingest", "Convert a raw dataset export into canonical JSONL");
  ingest_cmd->add_option("--source", source, "Dataset name")->required();
  ingest_cmd->add_option("--format", format, "coco | regions | referring | caption | text")->required();
  ingest_cmd->add_option("--in", in_path, "Input file")->required();
  ingest_cmd->add_option("--out", out_path, "Output directory")->required();
  ingest_cmd->add_flag("--lenient", lenient, "Drop or clamp bad records instead of failing");

  CurateArgs curate_args;
  auto* curate_cmd = app.add_subcommand("curate", "Task- and annotation-level curation");
  curate_cmd->add_option("--in", curate_args.in, "Ingest output directories")->required();
  curate_cmd->add_option("--out", curate_args.out, "Output directory")->required();
  curate_cmd->add_option("--seed", curate_args.seed, "Seed")->required();
  curate_cmd->add_option("--dedup-iou", curate_args.dedup_iou, "IoU at which merged boxes are duplicates");
  curate_cmd->add_flag("--task-level", curate_args.task_level, "Run task-level curation");
  curate_cmd->add_flag("--annotation-level", curate_args.annotation_level, "Run annotation-level curation");
  curate_cmd->add_flag("--no-grounding", curate_args.no_grounding, "Skip grounding reorganization");
  curate_cmd->add_option("--lexicon", curate_args.lexicon, "Lexicon JSON");
  curate_cmd->add_option("--jobs", curate_args.jobs, "Worker threads");

  std::string mix_path, verify_path, split_name;
  std::vector<std::string> consolidate_in;
  int jobs = 0;
  auto* consolidate_cmd = app.add_subcommand("consolidate", "Quota-driven assembly of a training split");
  consolidate_cmd->add_option("--mix", mix_path, "MixSpec JSON")->required();
  consolidate_cmd->add_option("--in", consolidate_in, "Sample directories")->required();
  consolidate_cmd->add_option("--out", out_path, "Output directory")->required();
  consolidate_cmd->add_option("--split", split_name, "Split to take from a mix bundle");
  consolidate_cmd->add_option("--verify", verify_path, "Reference table JSON; exit 3 on mismatch");
  consolidate_cmd->add_option("--jobs", jobs, "Worker threads");

  std::string templates;
  std::int64_t budget = kStage23Budget;
  std::uint64_t seed = 0;
  int bins = kDefaultCoordBins;
  auto* render_cmd = app.add_subcommand("render", "Serialize samples into conversations");
  render_cmd->add_option("--templates", templates, "Template pack JSON (builtin when omitted)");
  render_cmd->add_option("--in", in_path, "Sample directory")->required();
  render_cmd->add_option("--out", out_path, "Output directory")->required();
  render_cmd->add_option("--budget", budget, "Length budget: 2048 or 4096");
  render_cmd->add_option("--seed", seed, "Seed")->required();
  render_cmd->add_option("--coord-bins", bins, "Grid bins");
  render_cmd->add_option("--jobs", jobs, "Worker threads");

  std::string task, preds, gt, report_path;
  bool iou_geq = false;
  auto* eval_cmd = app.add_subcommand("eval", "Score model output");
  eval_cmd->add_option("--task", task, "detection | rec | counting")->required();
  eval_cmd->add_option("--preds", preds, "Prediction JSONL")->required();
  eval_cmd->add_option("--gt", gt, "Ground-truth JSONL")->required();
  eval_cmd->add_option("--report", report_path, "Report JSON path");
  eval_cmd->add_option("--coord-bins", bins, "Grid bins of raw_text predictions");
  eval_cmd->add_flag("--iou-geq", iou_geq, "REC: count IoU == 0.5 as correct");
  eval_cmd->add_option("--jobs", jobs, "Worker threads");

  std::string scale, validate_path;
  bool halve_stage1 = false;
  auto* plan_cmd = app.add_subcommand("plan", "Emit or validate the three-stage training plans");
  plan_cmd->add_option("--scale", scale, "7B | 9B | 13B | 27B");
  plan_cmd->add_option("--out", out_path, "plans.json path");
  plan_cmd->add_flag("--halve-stage1", halve_stage1, "Also halve the stage-1 rate for 27B");
  plan_cmd->add_option("--validate", validate_path, "Validate a plans.json; exit 3 on violations");

  ShapeSpec shape;
  auto* shapes_cmd = app.add_subcommand("shapes", "Patch grid and connector token counts");
  shapes_cmd->add_option("--res", shape.encoder_res, "Encoder resolution");
  shapes_cmd->add_option("--patch", shape.patch, "Patch size");
  shapes_cmd->add_option("--pretrain-res", shape.pretrain_res, "Pre-training resolution");
  shapes_cmd->add_option("--k", shape.kernel, "Connector kernel");
  shapes_cmd->add_option("--s", shape.stride, "Connector stride");
  shapes_cmd->add_option("--p", shape.pad, "Connector padding");

  auto* stats_cmd = app.add_subcommand("stats", "Corpus statistics");
  stats_cmd->add_option("--in", in_path, "Sample directory")->required();
  stats_cmd->add_option("--out", out_path, "Report JSON path");

  std::string config;
  std::vector<std::string> stage_names;
  auto* pipeline_cmd = app.add_subcommand("pipeline", "ingest -> curate -> consolidate -> render");
  pipeline_cmd->add_option("--config", config, "Pipeline config JSON")->required();
  pipeline_cmd->add_option("--stage", stage_names, "Run only these stages");
  pipeline_cmd->add_option("--jobs", jobs, "Worker thread cap (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  EventLog log(&std::cout);
  std::string stage_name = app.get_subcommands().front()->get_name();
  try {
    if (*ingest_cmd) return cmd_ingest(source, format, in_path, out_path, lenient, log);
    if (*curate_cmd) return cmd_curate(curate_args, log);
    if (*consolidate_cmd) return cmd_consolidate(mix_path, split_name, consolidate_in, out_path, verify_path, jobs, log);
    if (*render_cmd) return cmd_render(templates, in_path, out_path, budget, seed, bins, jobs, log);
    if (*eval_cmd) return cmd_eval(task, preds, gt, report_path, bins, iou_geq, jobs, log);
    if (*plan_cmd) {
      if (scale.empty() && validate_path.empty()) throw Error(ErrorCode::Config, "--scale or --validate is required");
      return cmd_plan(scale, out_path, halve_stage1, validate_path, log);
    }
    if (*shapes_cmd) return cmd_shapes(shape, log);
    if (*stats_cmd) return cmd_stats(in_path, out_path, log);
    if (*pipeline_cmd) return cmd_pipeline(config, stage_names, jobs, log);
  } catch (const Error& e) {
    log.emit("error", stage_name,
             {{"code", to_string(e.code())}, {"message", e.message()}, {"locator", e.locator()}});
    std::cerr << "error: " << e.what() << "\n";
    return is_config_error(e.code()) ? kExitConfig : kExitData;
  } catch (const std::exception& e) {
    log.emit("error", stage_name, {{"code", "Io"}, {"message", e.what()}});
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}
