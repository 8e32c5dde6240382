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

#include "forge/consolidate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <unordered_set>

#include "forge/error.hpp"
#include "forge/parallel.hpp"
#include "forge/rng.hpp"

namespace forge {

std::string_view to_string(Split split) { return split == Split::Pretrain ? "pretrain" : "instruction"; }

std::optional<Split> split_from_string(std::string_view name) {
  if (name == "pretrain") return Split::Pretrain;
  if (name == "instruction") return Split::Instruction;
  return std::nullopt;
}

bool kind_allowed(Split split, TaskKind kind) {
  if (split == Split::Instruction) return true;
  switch (kind) {
    case TaskKind::Caption:
    case TaskKind::REC:
    case TaskKind::REG:
    case TaskKind::Detection:
    case TaskKind::LanguageOnly:
      return true;
    default:
      return false;
  }
}

bool MixEntry::matches(const TaskSample& sample) const {
  if (sample.kind != kind) return false;
  if (sources.empty()) return true;
  const auto name = to_string(sample.source);
  return std::find(sources.begin(), sources.end(), name) != sources.end();
}

void MixSpec::validate() const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const std::string where = "mix entry " + std::to_string(i);
    if (e.quota.has_value() == e.fraction.has_value())
      throw Error(ErrorCode::Config, "exactly one of quota or fraction is required", where);
    if (e.fraction && !(*e.fraction >= 0.0 && *e.fraction <= 1.0))
      throw Error(ErrorCode::Config, "fraction must lie in [0, 1]", where);
    if (!kind_allowed(split, e.kind))
      throw Error(ErrorCode::Config,
                  std::string(to_string(e.kind)) + " is not allowed in the " + std::string(to_string(split)) + " split",
                  where);
    for (const auto& s : e.sources)
      if (!source_from_string(s)) throw Error(ErrorCode::Config, "unknown source '" + s + "'", where);
  }
}

MixSpec MixSpec::from_json(const Json& j) {
  try {
    MixSpec mix;
    const auto split = split_from_string(j.at("split").get<std::string>());
    if (!split) throw Error(ErrorCode::Config, "split must be pretrain or instruction");
    mix.split = *split;
    mix.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& ej : j.at("entries")) {
      MixEntry e;
      const auto kind = task_kind_from_string(ej.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::Config, "unknown kind '" + ej.at("kind").get<std::string>() + "'");
      e.kind = *kind;
      if (ej.contains("sources")) {
        const auto& s = ej.at("sources");
        if (s.is_array()) {
          e.sources = s.get<std::vector<std::string>>();
        } else if (!(s.is_string() && s.get<std::string>() == "*")) {
          throw Error(ErrorCode::Config, "sources must be a list or \"*\"");
        }
      }
      if (ej.contains("quota")) {
        const auto q = ej.at("quota").get<std::int64_t>();
        if (q < 0) throw Error(ErrorCode::Config, "quota must be non-negative");
        e.quota = static_cast<std::size_t>(q);
      }
      if (ej.contains("fraction")) e.fraction = ej.at("fraction").get<double>();
      mix.entries.push_back(std::move(e));
    }
    mix.validate();
    return mix;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Config, std::string("bad mix spec: ") + e.what());
  }
}

MixSpec MixSpec::load(const fs::path& path, std::optional<Split> split) {
  if (!fs::exists(path)) throw Error(ErrorCode::Config, "mix spec not found", path.string());
  Json j;
  try {
    j = read_json_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, e.message(), path.string());
  }
  if (j.is_object() && j.contains("splits")) {
    const auto& splits = j.at("splits");
    if (!split && splits.size() != 1)
      throw Error(ErrorCode::Config, "mix bundle holds several splits; choose one", path.string());
    const std::string key = split ? std::string(to_string(*split)) : splits.begin().key();
    if (!splits.contains(key)) throw Error(ErrorCode::Config, "mix bundle has no split " + key, path.string());
    return from_json(splits.at(key));
  }
  MixSpec mix = from_json(j);
  if (split && mix.split != *split)
    throw Error(ErrorCode::Config, "mix spec is for the " + std::string(to_string(mix.split)) + " split",
                path.string());
  return mix;
}

Json MixSpec::to_json() const {
  Json entries_json = Json::array();
  for (const auto& e : entries) {
    Json ej = {{"kind", to_string(e.kind)}};
    ej["sources"] = e.sources.empty() ? Json("*") : Json(e.sources);
    if (e.quota) ej["quota"] = *e.quota;
    if (e.fraction) ej["fraction"] = *e.fraction;
    entries_json.push_back(std::move(ej));
  }
  return {{"split", to_string(split)}, {"seed", seed}, {"entries", std::move(entries_json)}};
}

Json SplitManifest::to_json() const {
  Json rows = Json::array();
  for (const auto& e : entries) {
    rows.push_back({{"kind", to_string(e.kind)},
                    {"sources", e.sources.empty() ? Json("*") : Json(e.sources)},
                    {"quota", e.quota},
                    {"available", e.available},
                    {"selected", e.selected},
                    {"emitted", e.emitted},
                    {"shortfall", e.shortfall}});
  }
  return {{"split", to_string(split)}, {"seed", seed},   {"entries", std::move(rows)},     {"deduped", deduped},
          {"total", total},            {"content_hash", content_hash}, {"warnings", warnings}};
}

SplitManifest SplitManifest::from_json(const Json& j) {
  try {
    SplitManifest m;
    m.split = split_from_string(j.at("split").get<std::string>()).value_or(Split::Pretrain);
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& ej : j.at("entries")) {
      EntryReport e;
      e.kind = task_kind_from_string(ej.at("kind").get<std::string>()).value_or(TaskKind::Caption);
      if (ej.at("sources").is_array()) e.sources = ej.at("sources").get<std::vector<std::string>>();
      e.quota = ej.at("quota").get<std::size_t>();
      e.available = ej.at("available").get<std::size_t>();
      e.selected = ej.at("selected").get<std::size_t>();
      e.emitted = ej.at("emitted").get<std::size_t>();
      e.shortfall = ej.at("shortfall").get<std::size_t>();
      m.entries.push_back(std::move(e));
    }
    m.deduped = j.at("deduped").get<std::size_t>();
    m.total = j.at("total").get<std::size_t>();
    m.content_hash = j.value("content_hash", std::string());
    m.warnings = j.value("warnings", std::vector<std::string>{});
    return m;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("bad manifest: ") + e.what());
  }
}

std::vector<std::size_t> reservoir_indices(std::size_t stream_size, std::size_t quota, std::uint64_t seed) {
  const std::size_t keep = std::min(stream_size, quota);
  std::vector<std::size_t> reservoir(keep);
  for (std::size_t i = 0; i < keep; ++i) reservoir[i] = i;
  Rng rng(seed);
  for (std::size_t i = keep; i < stream_size; ++i) {
    const auto j = uniform_below(rng, i + 1);
    if (j < keep) reservoir[j] = i;
  }
  std::sort(reservoir.begin(), reservoir.end());
  return reservoir;
}

std::string dedup_key(const TaskSample& sample) {
  const Json payload = sample_to_json(sample).at("payload");
  std::string canonical(to_string(sample.kind));
  canonical += '\n';
  canonical += payload.dump();
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical)));
  return sample.image_ref.value_or("") + "#" + hex;
}

ConsolidateResult consolidate(const MixSpec& mix, const std::vector<TaskSample>& inputs, int jobs) {
  mix.validate();
  const std::size_t n = mix.entries.size();
  std::vector<std::vector<std::size_t>> streams(n);
  for (std::size_t i = 0; i < inputs.size(); ++i)
    for (std::size_t e = 0; e < n; ++e)
      if (mix.entries[e].matches(inputs[i])) streams[e].push_back(i);

  ConsolidateResult result;
  SplitManifest& manifest = result.manifest;
  manifest.split = mix.split;
  manifest.seed = mix.seed;
  manifest.entries.resize(n);
  for (std::size_t e = 0; e < n; ++e) {
    const auto& entry = mix.entries[e];
    auto& row = manifest.entries[e];
    row.kind = entry.kind;
    row.sources = entry.sources;
    row.available = streams[e].size();
    row.quota = entry.quota ? *entry.quota
                            : static_cast<std::size_t>(std::floor(*entry.fraction * double(row.available)));
    if (row.quota > 0 && row.available == 0) {
      std::string filter = entry.sources.empty() ? "*" : entry.sources.front();
      for (std::size_t s = 1; s < entry.sources.size(); ++s) filter += "," + entry.sources[s];
      throw Error(ErrorCode::UnresolvedSource,
                  "no input samples of kind " + std::string(to_string(entry.kind)) + " from " + filter,
                  "mix entry " + std::to_string(e));
    }
  }

  std::vector<std::vector<std::size_t>> picked(n);
  parallel_for(n, jobs, [&](std::size_t e) {
    auto local = reservoir_indices(streams[e].size(), manifest.entries[e].quota, derive_seed(mix.seed, std::uint64_t(e)));
    for (auto& i : local) i = streams[e][i];
    std::stable_sort(local.begin(), local.end(),
                     [&](std::size_t a, std::size_t b) { return inputs[a].sample_id < inputs[b].sample_id; });
    picked[e] = std::move(local);
  });

  std::unordered_set<std::string> keys, ids;
  for (std::size_t e = 0; e < n; ++e) {
    auto& row = manifest.entries[e];
    row.selected = picked[e].size();
    for (std::size_t i : picked[e]) {
      const TaskSample& s = inputs[i];
      if (!keys.insert(dedup_key(s)).second || !ids.insert(s.sample_id).second) {
        ++manifest.deduped;
        continue;
      }
      result.samples.push_back(s);
      ++row.emitted;
    }
    row.shortfall = row.quota - row.emitted;
    if (row.shortfall > 0)
      manifest.warnings.push_back("QuotaShortfall: entry " + std::to_string(e) + " (" +
                                  std::string(to_string(row.kind)) + ") emitted " + std::to_string(row.emitted) +
                                  " of " + std::to_string(row.quota));
  }
  manifest.total = result.samples.size();
  manifest.content_hash = sha256_hex(samples_jsonl(result.samples));
  return result;
}

std::string samples_jsonl(const std::vector<TaskSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += sample_to_json(s).dump();
    out += '\n';
  }
  return out;
}

void write_consolidated(const ConsolidateResult& result, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  AtomicWriter samples(out_dir / "samples.jsonl");
  samples.stream() << samples_jsonl(result.samples);
  samples.commit();
  write_json_file(out_dir / "manifest.json", result.manifest.to_json());
}

std::vector<TaskSample> load_samples(const fs::path& dir) {
  std::vector<TaskSample> out;
  const auto path = dir / "samples.jsonl";
  if (!fs::exists(path)) return out;
  for_each_jsonl(path, [&](const Json& j, std::size_t) { out.push_back(sample_from_json(j)); });
  return out;
}

Json VerifyReport::to_json() const {
  Json rows_json = Json::array();
  for (const auto& r : rows) {
    Json rj = {{"name", r.name},         {"kind", to_string(r.kind)}, {"expected", r.expected},
               {"actual", r.actual},     {"delta", r.delta()},        {"tolerance", r.tolerance}};
    rj["status"] = !r.desk_verifiable ? "not desk-verifiable" : (r.pass ? "pass" : "fail");
    rows_json.push_back(std::move(rj));
  }
  return {{"rows", std::move(rows_json)}, {"all_pass", all_pass}};
}

VerifyReport verify_manifest(const SplitManifest& manifest, const Json& reference) {
  VerifyReport report;
  try {
    const Json& table =
        reference.contains("splits") ? reference.at("splits").at(std::string(to_string(manifest.split))) : reference;
    for (const auto& rj : table.at("rows")) {
      VerifyRow row;
      const auto kind = task_kind_from_string(rj.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::Config, "unknown kind in reference table: " + rj.at("kind").get<std::string>());
      row.kind = *kind;
      row.name = rj.value("name", std::string(to_string(row.kind)));
      row.expected = rj.at("expected").get<std::int64_t>();
      row.tolerance = rj.value("tolerance", std::int64_t{0});
      row.desk_verifiable = rj.value("scale", std::string("desk")) != "full";
      for (const auto& e : manifest.entries)
        if (e.kind == row.kind) row.actual += static_cast<std::int64_t>(e.emitted);
      row.pass = !row.desk_verifiable || std::llabs(row.delta()) <= row.tolerance;
      report.all_pass = report.all_pass && row.pass;
      report.rows.push_back(std::move(row));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Config, std::string("bad reference table: ") + e.what());
  }
  return report;
}

}  // namespace forge
