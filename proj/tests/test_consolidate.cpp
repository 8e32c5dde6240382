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
#include "forge/consolidate.hpp"
#include "forge/error.hpp"
#include "forge/rng.hpp"
#include "test_util.hpp"

using namespace forge;

namespace {

TaskSample caption(int i, Source source = Source::ShareGPT4V) {
  return {"cap:" + std::string(to_string(source)) + ":" + std::to_string(i), TaskKind::Caption,
          std::string(to_string(source)) + ":img" + std::to_string(i), source,
          CaptionPayload{"caption number " + std::to_string(i)}};
}

MixSpec one_entry(std::size_t quota, std::uint64_t seed = 7) {
  MixSpec mix;
  mix.split = Split::Pretrain;
  mix.seed = seed;
  mix.entries.push_back({TaskKind::Caption, {"sharegpt4v"}, quota, std::nullopt});
  return mix;
}

std::vector<TaskSample> captions(int n) {
  std::vector<TaskSample> v;
  for (int i = 0; i < n; ++i) v.push_back(caption(i));
  return v;
}

// Algorithm R written against sample ids: fill, then replace slot j with
// item i when j = U[0, i] lands inside the reservoir.
std::set<std::string> reservoir_oracle(const std::vector<TaskSample>& stream, std::size_t k, std::uint64_t seed) {
  std::vector<std::string> slots;
  Rng rng(seed);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (slots.size() < k) {
      slots.push_back(stream[i].sample_id);
      continue;
    }
    const auto j = uniform_below(rng, i + 1);
    if (j < k) slots[j] = stream[i].sample_id;
  }
  return {slots.begin(), slots.end()};
}

std::set<std::string> ids(const std::vector<TaskSample>& v) {
  std::set<std::string> out;
  for (const auto& s : v) out.insert(s.sample_id);
  return out;
}

}  // namespace

TEST_CASE("quota 5 from 100 samples") {
  const auto inputs = captions(100);
  const auto a = consolidate(one_entry(5), inputs, 1);
  const auto b = consolidate(one_entry(5), inputs, 4);
  CHECK(a.samples.size() == 5);
  CHECK(samples_jsonl(a.samples) == samples_jsonl(b.samples));
  CHECK(a.manifest.to_json() == b.manifest.to_json());
  CHECK(ids(a.samples) == reservoir_oracle(inputs, 5, derive_seed(7, std::uint64_t(0))));
  CHECK(a.manifest.entries[0].available == 100);
  CHECK(a.manifest.entries[0].emitted == 5);
  CHECK(a.manifest.entries[0].shortfall == 0);
  CHECK(a.manifest.content_hash == sha256_hex(samples_jsonl(a.samples)));
  CHECK(std::is_sorted(a.samples.begin(), a.samples.end(),
                       [](const TaskSample& x, const TaskSample& y) { return x.sample_id < y.sample_id; }));
  const auto other = consolidate(one_entry(5, 8), inputs, 1);
  CHECK(ids(other.samples) != ids(a.samples));
}

TEST_CASE("reservoir membership matches the oracle and is uniform") {
  const auto inputs = captions(20);
  std::vector<int> hits(20, 0);
  const int trials = 4000;
  for (int t = 0; t < trials; ++t) {
    const auto idx = reservoir_indices(20, 5, std::uint64_t(t));
    REQUIRE(idx.size() == 5);
    std::set<std::string> got;
    for (auto i : idx) {
      got.insert(inputs[i].sample_id);
      ++hits[i];
    }
    if (t < 200) CHECK(got == reservoir_oracle(inputs, 5, std::uint64_t(t)));
  }
  for (int h : hits) CHECK(std::abs(double(h) / trials - 0.25) < 0.03);
  CHECK(reservoir_indices(3, 5, 1) == std::vector<std::size_t>{0, 1, 2});
  CHECK(reservoir_indices(10, 0, 1).empty());
}

TEST_CASE("zero quota and oversubscription") {
  const auto inputs = captions(10);
  auto zero = consolidate(one_entry(0), inputs);
  CHECK(zero.samples.empty());
  CHECK(zero.manifest.warnings.empty());
  auto over = consolidate(one_entry(15), inputs);
  CHECK(over.samples.size() == 10);
  CHECK(over.manifest.entries[0].shortfall == 5);
  REQUIRE(over.manifest.warnings.size() == 1);
  CHECK(over.manifest.warnings[0].rfind("QuotaShortfall", 0) == 0);
}

TEST_CASE("fraction quotas are floored") {
  MixSpec mix = one_entry(0);
  mix.entries[0].quota.reset();
  mix.entries[0].fraction = 0.25;
  auto r = consolidate(mix, captions(11));
  CHECK(r.manifest.entries[0].quota == 2);
  CHECK(r.samples.size() == 2);
}

TEST_CASE("duplicates across entries are merged once") {
  std::vector<TaskSample> inputs = captions(6);
  MixSpec mix = one_entry(6);
  mix.entries.push_back({TaskKind::Caption, {}, 6, std::nullopt});
  auto r = consolidate(mix, inputs);
  CHECK(r.samples.size() == 6);
  CHECK(r.manifest.deduped == 6);
  CHECK(r.manifest.entries[1].emitted == 0);
  CHECK(r.manifest.entries[1].shortfall == 6);

  // Same content under a different sample id also collapses.
  TaskSample copy = inputs[0];
  copy.sample_id = "cap:copy";
  inputs.push_back(copy);
  auto d = consolidate(one_entry(7), inputs);
  CHECK(d.samples.size() == 6);
  CHECK(d.manifest.deduped == 1);
  CHECK(dedup_key(copy) == dedup_key(inputs[0]));
  CHECK(dedup_key(caption(1)) != dedup_key(caption(2)));
}

TEST_CASE("unresolved source") {
  MixSpec mix = one_entry(3);
  mix.entries[0].sources = {"objects365"};
  CHECK_THROWS_AS(consolidate(mix, captions(5)), Error);
  try {
    consolidate(mix, captions(5));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnresolvedSource);
  }
}

TEST_CASE("mix validation") {
  MixSpec bad = one_entry(1);
  bad.entries[0].kind = TaskKind::GeneralVQA;  // instruction-only kind
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = one_entry(1);
  bad.entries[0].fraction = 0.5;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = one_entry(1);
  bad.entries[0].sources = {"nowhere"};
  CHECK_THROWS_AS(bad.validate(), Error);
  const MixSpec ok = one_entry(4, 99);
  const MixSpec round = MixSpec::from_json(ok.to_json());
  CHECK(round.to_json() == ok.to_json());
}

TEST_CASE("quota monotonicity and unique ids on random mixes") {
  std::vector<TaskSample> inputs;
  for (int i = 0; i < 60; ++i) inputs.push_back(caption(i));
  for (int i = 0; i < 40; ++i) inputs.push_back(caption(i, Source::TextCaps));
  std::mt19937_64 rng(4);
  for (int t = 0; t < 200; ++t) {
    const std::size_t q1 = rng() % 70, q2 = q1 + rng() % 30;
    const std::uint64_t seed = rng();
    const auto a = consolidate(one_entry(q1, seed), inputs);
    const auto b = consolidate(one_entry(q2, seed), inputs);
    CHECK(a.samples.size() <= b.samples.size());
    CHECK(a.samples.size() == std::min<std::size_t>(q1, 60));
    CHECK(ids(b.samples).size() == b.samples.size());
  }
}

TEST_CASE("manifest round trip and files") {
  testutil::TempDir dir;
  const auto r = consolidate(one_entry(5), captions(30));
  write_consolidated(r, dir.path());
  CHECK(fs::exists(dir.path() / "manifest.json"));
  CHECK(sha256_file(dir.path() / "samples.jsonl") == r.manifest.content_hash);
  CHECK(samples_jsonl(load_samples(dir.path())) == samples_jsonl(r.samples));
  const auto m = SplitManifest::from_json(read_json_file(dir.path() / "manifest.json"));
  CHECK(m.to_json() == r.manifest.to_json());
  CHECK(load_samples(dir.path() / "missing").empty());
}

TEST_CASE("verify_manifest") {
  const auto r = consolidate(one_entry(5), captions(30));
  Json table = {{"rows", Json::array({{{"name", "Caption"}, {"kind", "Caption"}, {"expected", 5}, {"scale", "desk"}}})}};
  auto ok = verify_manifest(r.manifest, table);
  CHECK(ok.all_pass);
  REQUIRE(ok.rows.size() == 1);
  CHECK(ok.rows[0].delta() == 0);

  table["rows"].push_back({{"name", "REC"}, {"kind", "REC"}, {"expected", 4000000}, {"scale", "full"}});
  auto full = verify_manifest(r.manifest, table);
  CHECK(full.all_pass);
  CHECK_FALSE(full.rows[1].desk_verifiable);
  CHECK(full.to_json().dump().find("not desk-verifiable") != std::string::npos);

  table["rows"][0]["expected"] = 8;
  auto fail = verify_manifest(r.manifest, table);
  CHECK_FALSE(fail.all_pass);
  CHECK(fail.rows[0].delta() == -3);
  table["rows"][0]["tolerance"] = 3;
  CHECK(verify_manifest(r.manifest, table).all_pass);

  const Json bundle = {{"splits", {{"pretrain", table}}}};
  CHECK(verify_manifest(r.manifest, bundle).rows.size() == 2);
}

TEST_CASE("shipped mix files load") {
  const auto data = testutil::source_dir() / "data";
  const auto pre = MixSpec::load(data / "ccmd8m.mix", Split::Pretrain);
  const auto ins = MixSpec::load(data / "ccmd8m.mix", Split::Instruction);
  CHECK(pre.split == Split::Pretrain);
  CHECK(ins.split == Split::Instruction);
  CHECK_FALSE(pre.entries.empty());
  CHECK_FALSE(ins.entries.empty());
  CHECK_THROWS_AS(MixSpec::load(data / "ccmd8m.mix"), Error);
  const auto desk = MixSpec::load(data / "pretrain-1k.mix");
  std::size_t total = 0;
  for (const auto& e : desk.entries) total += e.quota.value_or(0);
  CHECK(total == 1246 + 428 + 411 + 2107);
  CHECK_THROWS_AS(MixSpec::load(data / "no-such.mix"), Error);
}
