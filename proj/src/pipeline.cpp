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

#include "forge/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "forge/consolidate.hpp"
#include "forge/error.hpp"

namespace forge {

void EventLog::emit(std::string_view event, std::string_view stage, Json fields) {
  if (!out_) return;
  Json line = {{"event", event}, {"stage", stage}};
  for (auto& [k, v] : fields.items()) line[k] = std::move(v);
  *out_ << line.dump() << '\n';
  out_->flush();
}

void write_curated(const CurateResult& result, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  AtomicWriter samples(out_dir / "samples.jsonl");
  samples.stream() << samples_jsonl(result.samples);
  samples.commit();
  write_json_file(out_dir / "ledger.json", result.report.to_json());
}

RenderResult render_directory(const fs::path& in_dir, const fs::path& out_dir, const TemplatePack& pack,
                              const RenderOptions& options, std::int64_t budget, int jobs) {
  const auto samples = load_samples(in_dir);
  RenderResult result = render_samples(samples, pack, options, budget, jobs);
  fs::create_directories(out_dir);
  AtomicWriter out(out_dir / "conversations.jsonl");
  for (const auto& r : result.records) out.write_json_line(conversation_to_json(r));
  out.commit();
  write_json_file(out_dir / "ledger.json", result.ledger.to_json());
  return result;
}

std::string_view to_string(PipelineStage stage) {
  switch (stage) {
    case PipelineStage::Ingest: return "ingest";
    case PipelineStage::Curate: return "curate";
    case PipelineStage::Consolidate: return "consolidate";
    case PipelineStage::Render: return "render";
  }
  return "?";
}

std::optional<PipelineStage> pipeline_stage_from_string(std::string_view name) {
  for (auto s : {PipelineStage::Ingest, PipelineStage::Curate, PipelineStage::Consolidate, PipelineStage::Render})
    if (to_string(s) == name) return s;
  return std::nullopt;
}

namespace {

fs::path existing_path(const Json& j, const fs::path& base_dir, const std::string& what) {
  fs::path p = j.get<std::string>();
  if (p.is_relative()) p = base_dir / p;
  if (!fs::exists(p)) throw Error(ErrorCode::Config, what + " not found: " + p.string(), what);
  return p.lexically_normal();
}

}  // namespace

PipelineConfig pipeline_config_from_json(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorCode::Config, "pipeline config must be a JSON object");
  try {
    PipelineConfig cfg;
    if (!j.contains("seed") || !j.at("seed").is_number_unsigned())
      throw Error(ErrorCode::Config, "seed is mandatory and must be a non-negative integer", "seed");
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.jobs = j.value("jobs", 1);
    cfg.coord_bins = j.value("coord_bins", kDefaultCoordBins);
    if (cfg.coord_bins < 2) throw Error(ErrorCode::Config, "coord_bins must be >= 2", "coord_bins");
    cfg.lenient = j.value("lenient", false);

    std::set<Source> seen;
    for (const auto& sj : j.at("sources")) {
      SourceDescriptor d;
      const auto name = sj.at("name").get<std::string>();
      const auto source = source_from_string(name);
      if (!source) throw Error(ErrorCode::Config, "unknown source '" + name + "'", "sources");
      if (!seen.insert(*source).second) throw Error(ErrorCode::Config, "source listed twice: " + name, "sources");
      const auto format_name = sj.at("format").get<std::string>();
      const auto format = source_format_from_string(format_name);
      if (!format) throw Error(ErrorCode::Config, "unknown format '" + format_name + "'", "sources");
      d.name = *source;
      d.format = *format;
      d.path = existing_path(sj.at("path"), base_dir, "source " + name);
      cfg.sources.push_back(std::move(d));
    }
    if (cfg.sources.empty()) throw Error(ErrorCode::Config, "no sources configured", "sources");

    if (j.contains("curation")) {
      const auto& c = j.at("curation");
      cfg.curation.dedup_iou = c.value("dedup_iou", kDefaultDedupIou);
      if (!(cfg.curation.dedup_iou > 0.0 && cfg.curation.dedup_iou <= 1.0))
        throw Error(ErrorCode::Config, "dedup_iou must lie in (0, 1]", "curation.dedup_iou");
      if (c.contains("lexicon")) cfg.curation.lexicon = existing_path(c.at("lexicon"), base_dir, "lexicon");
      if (c.contains("responsive_phrases"))
        cfg.curation.responsive_phrases = c.at("responsive_phrases").get<std::vector<std::string>>();
      cfg.curation.task_level = c.value("task_level", true);
      cfg.curation.annotation_level = c.value("annotation_level", true);
      cfg.curation.grounding = c.value("grounding", true);
    }
    cfg.mix = existing_path(j.at("mix"), base_dir, "mix");
    if (j.contains("templates")) cfg.templates = existing_path(j.at("templates"), base_dir, "templates");
    cfg.budget = j.value("budget", kStage23Budget);
    if (cfg.budget != kStage1Budget && cfg.budget != kStage23Budget)
      throw Error(ErrorCode::Config, "budget must be 2048 or 4096", "budget");
    fs::path out = j.value("out", std::string("out"));
    cfg.out = out.is_relative() ? (base_dir / out).lexically_normal() : out;
    return cfg;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Config, std::string("bad pipeline config: ") + e.what());
  }
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::Config, "config not found", path.string());
  Json j;
  try {
    j = read_json_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, e.message(), e.locator());
  }
  PipelineConfig cfg = pipeline_config_from_json(j, fs::absolute(path).parent_path());
  if (const char* env = std::getenv("FORGE_OUT"); env && *env) cfg.out = env;
  return cfg;
}

namespace {

template <typename Fn>
auto in_stage(PipelineStage stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    std::string where = "stage " + std::string(to_string(stage));
    if (!e.locator().empty()) where += ": " + e.locator();
    throw Error(e.code(), e.message(), where);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::Io, e.what(), "stage " + std::string(to_string(stage)));
  }
}

fs::path ingest_dir(const PipelineConfig& cfg, const SourceDescriptor& d) {
  return cfg.out / "ingest" / std::string(to_string(d.name));
}

}  // namespace

std::string pipeline_output_hash(const fs::path& out_dir) {
  std::string data;
  for (const auto& p : {out_dir / "render" / "conversations.jsonl", out_dir / "consolidate" / "manifest.json"}) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    data += ss.str();
  }
  return sha256_hex(data);
}

PipelineSummary run_pipeline(const PipelineConfig& cfg, const std::set<PipelineStage>& selected, EventLog& log) {
  auto wants = [&](PipelineStage s) { return selected.empty() || selected.count(s) > 0; };

  // Everything that can fail on configuration is loaded before any write.
  TemplatePack pack = cfg.templates ? TemplatePack::load(*cfg.templates) : TemplatePack::builtin();
  if (cfg.curation.responsive_phrases) pack.responsive_phrases = *cfg.curation.responsive_phrases;
  pack.validate();
  const Lexicon lexicon = cfg.curation.lexicon ? Lexicon::load(*cfg.curation.lexicon) : Lexicon::builtin();
  const MixSpec mix = MixSpec::load(cfg.mix);

  PipelineSummary summary;
  log.emit("pipeline_start", "pipeline", {{"seed", cfg.seed}, {"sources", cfg.sources.size()}});

  if (wants(PipelineStage::Ingest)) {
    log.emit("stage_start", "ingest");
    Json ledgers = Json::object();
    in_stage(PipelineStage::Ingest, [&] {
      IngestOptions opts;
      opts.lenient = cfg.lenient;
      for (const auto& d : cfg.sources) {
        auto result = ingest(d, opts);
        write_ingest_output(result, ingest_dir(cfg, d));
        ledgers[std::string(to_string(d.name))] = result.ledger.to_json();
      }
      return 0;
    });
    summary.stages["ingest"] = ledgers;
    log.emit("stage_done", "ingest", {{"ledgers", ledgers}});
  }

  if (wants(PipelineStage::Curate)) {
    log.emit("stage_start", "curate");
    auto result = in_stage(PipelineStage::Curate, [&] {
      Corpus corpus;
      for (const auto& d : cfg.sources) {
        if (!fs::exists(ingest_dir(cfg, d)))
          throw Error(ErrorCode::Io, "missing ingest output; run the ingest stage first", ingest_dir(cfg, d).string());
        auto part = load_corpus(ingest_dir(cfg, d));
        std::move(part.images.begin(), part.images.end(), std::back_inserter(corpus.images));
        std::move(part.samples.begin(), part.samples.end(), std::back_inserter(corpus.samples));
      }
      CurateOptions opts;
      opts.task_level = cfg.curation.task_level;
      opts.annotation_level = cfg.curation.annotation_level;
      opts.grounding = cfg.curation.grounding;
      opts.dedup_iou = cfg.curation.dedup_iou;
      opts.seed = cfg.seed;
      opts.jobs = cfg.jobs;
      opts.lexicon = lexicon;
      auto r = curate(corpus, opts);
      write_curated(r, cfg.out / "curate");
      return r;
    });
    summary.stages["curate"] = {{"samples", result.samples.size()}, {"balanced", result.report.balanced()}};
    log.emit("stage_done", "curate", summary.stages["curate"]);
  }

  if (wants(PipelineStage::Consolidate)) {
    log.emit("stage_start", "consolidate");
    auto result = in_stage(PipelineStage::Consolidate, [&] {
      if (!fs::exists(cfg.out / "curate" / "samples.jsonl"))
        throw Error(ErrorCode::Io, "missing curate output; run the curate stage first");
      auto r = consolidate(mix, load_samples(cfg.out / "curate"), cfg.jobs);
      write_consolidated(r, cfg.out / "consolidate");
      return r;
    });
    summary.stages["consolidate"] = {{"total", result.manifest.total},
                                     {"deduped", result.manifest.deduped},
                                     {"content_hash", result.manifest.content_hash},
                                     {"warnings", result.manifest.warnings}};
    log.emit("stage_done", "consolidate", summary.stages["consolidate"]);
  }

  if (wants(PipelineStage::Render)) {
    log.emit("stage_start", "render");
    auto result = in_stage(PipelineStage::Render, [&] {
      if (!fs::exists(cfg.out / "consolidate" / "samples.jsonl"))
        throw Error(ErrorCode::Io, "missing consolidate output; run the consolidate stage first");
      RenderOptions opts;
      opts.seed = cfg.seed;
      opts.coord_bins = cfg.coord_bins;
      return render_directory(cfg.out / "consolidate", cfg.out / "render", pack, opts, cfg.budget, cfg.jobs);
    });
    summary.conversations = result.records.size();
    summary.stages["render"] = result.ledger.to_json();
    log.emit("stage_done", "render", summary.stages["render"]);
  }

  if (fs::exists(cfg.out / "render" / "conversations.jsonl") && fs::exists(cfg.out / "consolidate" / "manifest.json"))
    summary.output_hash = pipeline_output_hash(cfg.out);
  log.emit("pipeline_done", "pipeline", {{"output_hash", summary.output_hash}});
  return summary;
}

// ---- stats -------------------------------------------------------------------------

std::string_view table_row_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::LanguageOnly: return "Language Instruction";
    case TaskKind::VLInstruction: return "VL Instruction";
    case TaskKind::Caption: return "Image Caption";
    case TaskKind::GeneralVQA: return "General VQAs";
    case TaskKind::SceneTextVQA: return "Scene Text-centric VQAs";
    case TaskKind::DocVQA: return "Document-related VQAs";
    case TaskKind::Detection: return "Object Detection";
    case TaskKind::REC: return "REC";
    case TaskKind::Grounding: return "Visual Grounding";
    case TaskKind::REG: return "REG";
    case TaskKind::Counting: return "Object Counting";
  }
  return "?";
}

Json corpus_stats(const fs::path& dir) {
  std::map<std::string, std::size_t> rows, kinds;
  for (auto k : all_task_kinds()) {
    rows[std::string(table_row_name(k))] = 0;
    kinds[std::string(to_string(k))] = 0;
  }
  std::map<std::string, std::size_t> detail;
  for (auto level : {DetailLevel::ClassLevel, DetailLevel::Concise, DetailLevel::Detailed, DetailLevel::Unclassified})
    detail[std::string(to_string(level))] = 0;
  std::map<std::size_t, std::size_t> histogram;
  std::set<std::string> vocab;
  std::size_t total = 0, localized = 0, boxes = 0;

  for (const auto& s : load_samples(dir)) {
    ++total;
    ++rows[std::string(table_row_name(s.kind))];
    ++kinds[std::string(to_string(s.kind))];
    std::optional<std::size_t> n;
    if (const auto* o = std::get_if<ObjectsPayload>(&s.payload)) {
      n = 0;
      for (const auto& e : o->objects) {
        *n += e.boxes.size();
        vocab.insert(e.label);
      }
    } else if (const auto* c = std::get_if<CountingPayload>(&s.payload)) {
      n = c->boxes.size();
      vocab.insert(c->label);
    } else if (std::holds_alternative<RecPayload>(s.payload)) {
      n = 1;
    } else if (const auto* r = std::get_if<RegPayload>(&s.payload)) {
      n = 1;
      ++detail[std::string(to_string(r->detail))];
    }
    if (n) {
      ++localized;
      boxes += *n;
      ++histogram[*n];
    }
  }
  const auto regions = dir / "regions.jsonl";
  if (fs::exists(regions)) {
    for_each_jsonl(regions, [&](const Json& j, std::size_t) {
      ++detail[j.value("detail_level", std::string("unclassified"))];
    });
  }

  Json hist = Json::object();
  for (const auto& [k, v] : histogram) hist[std::to_string(k)] = v;
  return {{"samples", total},
          {"rows", rows},
          {"kinds", kinds},
          {"boxes_per_sample", {{"samples", localized},
                                {"boxes", boxes},
                                {"mean", localized ? double(boxes) / double(localized) : 0.0},
                                {"histogram", hist}}},
          {"label_vocabulary", vocab.size()},
          {"detail_levels", detail}};
}

}  // namespace forge
