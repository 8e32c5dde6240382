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

#include "forge/convo.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "forge/error.hpp"
#include "forge/geometry.hpp"
#include "forge/parallel.hpp"
#include "forge/rng.hpp"
#include "forge/text.hpp"

namespace forge {

// ---- templates -----------------------------------------------------------------

namespace {

const std::map<std::string, std::vector<std::string>>& required_placeholders() {
  static const std::map<std::string, std::vector<std::string>> req = {
      {"Caption", {}},
      {"REC", {"{expr}"}},
      {"REG", {"{box}"}},
      {"REG.detailed", {"{box}", "{phrase}"}},
      {"Detection", {"{labels}"}},
      {"Grounding", {"{labels}"}},
      {"Counting", {"{labels}"}},
      {"GeneralVQA", {"{question}"}},
      {"SceneTextVQA", {"{question}"}},
      {"DocVQA", {"{question}"}},
      {"LanguageOnly", {"{question}"}},
      {"VLInstruction", {"{question}"}},
  };
  return req;
}

std::string fill(std::string text, const std::string& key, const std::string& value) {
  for (std::size_t pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size()))
    text.replace(pos, key.size(), value);
  return text;
}

}  // namespace

TemplatePack TemplatePack::builtin() {
  TemplatePack pack;
  pack.templates = {
      {"Caption",
       {"Describe this image in detail.", "Provide a thorough description of the image.",
        "What is happening in this picture? Describe it comprehensively."}},
      {"REC",
       {"Where is {expr} in the image? Answer with its coordinates.",
        "Locate the region described as \"{expr}\" and output its bounding box.",
        "Give the bounding box of {expr}."}},
      {"REG",
       {"Provide a short description of the region {box}.", "What is in the region {box}? Answer concisely.",
        "Describe the object at {box} in a few words."}},
      {"REG.detailed",
       {"Provide a {phrase} description of the region {box}.",
        "Describe the object at {box} in a {phrase} way.",
        "Give a {phrase} caption for the region {box}."}},
      {"Detection",
       {"Examine the image for any objects from the category set {labels}. Report the coordinates of each "
        "detected object.",
        "Detect all instances of {labels} in the image and output their bounding boxes."}},
      {"Grounding",
       {"Locate every instance of {labels} in the image. Answer None for categories that are not present.",
        "Find all {labels} in the picture and give their coordinates; say None if a category is absent."}},
      {"Counting",
       {"How many {labels} are there in the image? Locate each one, then give the total.",
        "Count the {labels} in the image. Output the box of each instance followed by the number."}},
      {"GeneralVQA", {"{question}"}},
      {"SceneTextVQA", {"{question}"}},
      {"DocVQA", {"{question}"}},
      {"LanguageOnly", {"{question}"}},
      {"VLInstruction", {"{question}"}},
  };
  return pack;
}

TemplatePack TemplatePack::from_json(const Json& j) {
  TemplatePack pack;
  pack.templates.clear();
  if (!j.is_object() || !j.contains("templates") || !j.at("templates").is_object())
    throw Error(ErrorCode::Config, "template pack needs a 'templates' object");
  try {
    for (const auto& [kind, list] : j.at("templates").items())
      pack.templates[kind] = list.get<std::vector<std::string>>();
    if (j.contains("responsive_phrases"))
      pack.responsive_phrases = j.at("responsive_phrases").get<std::vector<std::string>>();
    pack.image_token = j.value("image_token", pack.image_token);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Config, std::string("malformed template pack: ") + e.what());
  }
  pack.validate();
  return pack;
}

TemplatePack TemplatePack::load(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::Config, "template pack not found", path.string());
  try {
    return from_json(read_json_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), e.what(), path.string());
  }
}

void TemplatePack::validate() const {
  for (const auto& [kind, placeholders] : required_placeholders()) {
    auto it = templates.find(kind);
    if (it == templates.end() || it->second.empty())
      throw Error(ErrorCode::MissingTemplate, "no template for kind " + kind);
    for (const auto& t : it->second)
      for (const auto& ph : placeholders)
        if (t.find(ph) == std::string::npos)
          throw Error(ErrorCode::MissingTemplate, "template for " + kind + " lacks " + ph + ": " + t);
  }
  if (responsive_phrases.empty()) throw Error(ErrorCode::Config, "responsive phrase list is empty");
}

Json TemplatePack::to_json() const {
  return {{"templates", templates}, {"responsive_phrases", responsive_phrases}, {"image_token", image_token}};
}

// ---- serialization ---------------------------------------------------------------

std::string serialize_box(const Box& b) {
  auto i = [](double v) { return std::to_string(static_cast<long long>(std::llround(v))); };
  return "[" + i(b.x1) + ", " + i(b.y1) + ", " + i(b.x2) + ", " + i(b.y2) + "]";
}

std::string serialize_localization(const std::vector<LabeledBoxes>& entries) {
  if (entries.empty()) return "None";
  std::string out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i) out += '\n';
    out += normalize_label(entries[i].label);
    out += '-';
    if (entries[i].boxes.empty()) {
      out += "None";
    } else {
      for (const auto& b : entries[i].boxes) out += serialize_box(b);
    }
  }
  return out;
}

namespace {

std::string pick(const std::vector<std::string>& options, Rng& rng) {
  return options[static_cast<std::size_t>(uniform_below(rng, options.size()))];
}

const std::vector<std::string>& templates_for(const TemplatePack& pack, const std::string& key) {
  auto it = pack.templates.find(key);
  if (it == pack.templates.end() || it->second.empty())
    throw Error(ErrorCode::MissingTemplate, "no template for kind " + key);
  return it->second;
}

std::vector<LabeledBoxes> to_grid_entries(const std::vector<LabeledBoxes>& entries, int w, int h, int bins) {
  std::vector<LabeledBoxes> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    LabeledBoxes g{e.label, {}};
    for (const auto& b : e.boxes) g.boxes.push_back(to_grid(b, w, h, bins));
    out.push_back(std::move(g));
  }
  return out;
}

std::string label_list(const std::vector<LabeledBoxes>& entries) {
  std::vector<std::string> labels;
  for (const auto& e : entries) labels.push_back(normalize_label(e.label));
  return join(labels, ", ");
}

}  // namespace

ConversationRecord serialize_sample(const TaskSample& s, const TemplatePack& pack, const RenderOptions& options) {
  Rng rng(derive_seed(options.seed, s.sample_id));
  const std::string kind(to_string(s.kind));
  const int bins = options.coord_bins;
  ConversationRecord rec;
  rec.sample_id = s.sample_id;
  rec.image_ref = s.image_ref;

  auto user = [&](std::string text) { rec.turns.push_back({Role::User, std::move(text)}); };
  auto assistant = [&](std::string text) { rec.turns.push_back({Role::Assistant, std::move(text)}); };

  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, CaptionPayload>) {
          user(pick(templates_for(pack, kind), rng));
          assistant(p.caption);
        } else if constexpr (std::is_same_v<P, RecPayload>) {
          user(fill(pick(templates_for(pack, kind), rng), "{expr}", p.expression));
          assistant(serialize_box(to_grid(p.box, p.width, p.height, bins)));
        } else if constexpr (std::is_same_v<P, RegPayload>) {
          const std::string box = serialize_box(to_grid(p.box, p.width, p.height, bins));
          if (p.detail == DetailLevel::Detailed) {
            std::string t = pick(templates_for(pack, "REG.detailed"), rng);
            user(fill(fill(t, "{box}", box), "{phrase}", pick(pack.responsive_phrases, rng)));
          } else {
            user(fill(pick(templates_for(pack, kind), rng), "{box}", box));
          }
          assistant(p.description);
        } else if constexpr (std::is_same_v<P, ObjectsPayload>) {
          const auto grid = to_grid_entries(p.objects, p.width, p.height, bins);
          user(fill(pick(templates_for(pack, kind), rng), "{labels}", label_list(p.objects)));
          assistant(serialize_localization(grid));
        } else if constexpr (std::is_same_v<P, CountingPayload>) {
          const auto grid = to_grid_entries({{p.label, p.boxes}}, p.width, p.height, bins);
          user(fill(pick(templates_for(pack, kind), rng), "{labels}", normalize_label(p.label)));
          assistant(serialize_localization(grid) + "\n" + std::to_string(p.boxes.size()));
        } else {
          const auto& turns = p.turns;
          if (turns.empty()) throw Error(ErrorCode::MalformedRecord, "dialogue has no turns", s.sample_id);
          for (std::size_t i = 0; i < turns.size(); ++i) {
            const Role expected = i % 2 == 0 ? Role::User : Role::Assistant;
            if (turns[i].role != expected)
              throw Error(ErrorCode::MalformedRecord, "dialogue turns must alternate starting with user",
                          s.sample_id);
          }
          rec.turns = turns;
          rec.turns.front().text = fill(pick(templates_for(pack, kind), rng), "{question}", turns.front().text);
        }
      },
      s.payload);

  if (s.image_ref && !pack.image_token.empty()) rec.turns.front().text = pack.image_token + "\n" + rec.turns.front().text;
  rec.token_estimate = estimate_length(rec);
  return rec;
}

// ---- parsing ------------------------------------------------------------------------

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ws(char c) { return c == ' ' || c == '\t'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool parse_uint(std::string_view s, std::size_t& pos, long long& out) {
  const std::size_t start = pos;
  while (pos < s.size() && is_digit(s[pos]) && pos - start < 10) ++pos;
  if (pos == start || (pos < s.size() && is_digit(s[pos]))) return false;
  out = std::stoll(std::string(s.substr(start, pos - start)));
  return true;
}

// Strict box list: "[" int ("," WS* int){3} "]" repeated, nothing else.
bool parse_boxlist_strict(std::string_view s, int bins, std::vector<Box>& out) {
  std::size_t pos = 0;
  std::vector<Box> boxes;
  while (pos < s.size()) {
    if (s[pos] != '[') return false;
    ++pos;
    long long v[4];
    for (int k = 0; k < 4; ++k) {
      if (k > 0) {
        if (pos >= s.size() || s[pos] != ',') return false;
        ++pos;
        while (pos < s.size() && is_ws(s[pos])) ++pos;
      }
      if (!parse_uint(s, pos, v[k])) return false;
    }
    if (pos >= s.size() || s[pos] != ']') return false;
    ++pos;
    boxes.push_back(Box{double(v[0]), double(v[1]), double(v[2]), double(v[3]), CoordSpace::grid(bins)});
  }
  if (boxes.empty()) return false;
  out = std::move(boxes);
  return true;
}

bool parse_entry_strict(std::string_view entry, int bins, LabeledBoxes& out) {
  static constexpr std::string_view kNone = "-None";
  if (entry.size() > kNone.size() && entry.substr(entry.size() - kNone.size()) == kNone) {
    auto label = trim(entry.substr(0, entry.size() - kNone.size()));
    if (label.empty()) return false;
    out = {std::string(label), {}};
    return true;
  }
  for (std::size_t i = entry.find("-["); i != std::string_view::npos; i = entry.find("-[", i + 1)) {
    std::vector<Box> boxes;
    if (parse_boxlist_strict(entry.substr(i + 1), bins, boxes)) {
      auto label = trim(entry.substr(0, i));
      if (label.empty()) return false;
      out = {std::string(label), std::move(boxes)};
      return true;
    }
  }
  return false;
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), is_digit);
}

std::optional<std::string> parse_strict(std::string_view text, int bins, ParsedLocalization& out) {
  std::vector<std::string_view> entries;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '\n' || text[i] == ';') {
      auto e = trim(text.substr(start, i - start));
      if (!e.empty()) entries.push_back(e);
      start = i + 1;
    }
  }
  if (entries.empty()) return "empty output";
  if (entries.size() >= 1 && all_digits(entries.back()) && entries.back().size() <= 9) {
    out.count = std::stoll(std::string(entries.back()));
    entries.pop_back();
  }
  if (entries.size() == 1 && entries.front() == "None") return std::nullopt;
  if (entries.empty() && !out.count) return "empty output";
  for (const auto& e : entries) {
    LabeledBoxes lb;
    if (!parse_entry_strict(e, bins, lb)) return "entry does not match grammar: \"" + std::string(e) + "\"";
    out.entries.push_back(std::move(lb));
  }
  return std::nullopt;
}

struct BracketGroup {
  std::size_t begin = 0, end = 0;  // [begin, end) in the source text
  double values[4] = {0, 0, 0, 0};
  bool integral = true;
};

// Tolerant scan for "[n, n, n, n]" groups (whitespace anywhere, optional
// sign and decimals).
std::vector<BracketGroup> scan_groups(std::string_view s) {
  std::vector<BracketGroup> out;
  for (std::size_t open = s.find('['); open != std::string_view::npos; open = s.find('[', open + 1)) {
    std::size_t pos = open + 1;
    BracketGroup g;
    g.begin = open;
    bool ok = true;
    for (int k = 0; k < 4 && ok; ++k) {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
      if (k > 0) {
        if (pos >= s.size() || s[pos] != ',') {
          ok = false;
          break;
        }
        ++pos;
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
      }
      const std::size_t num_start = pos;
      if (pos < s.size() && (s[pos] == '-' || s[pos] == '+')) ++pos;
      const std::size_t digits_start = pos;
      while (pos < s.size() && is_digit(s[pos])) ++pos;
      bool has_digits = pos > digits_start;
      if (pos < s.size() && s[pos] == '.') {
        g.integral = false;
        ++pos;
        const std::size_t frac = pos;
        while (pos < s.size() && is_digit(s[pos])) ++pos;
        has_digits = has_digits || pos > frac;
      }
      if (!has_digits || pos - num_start > 24) {
        ok = false;
        break;
      }
      if (s[num_start] == '-' || s[num_start] == '+') g.integral = g.integral && s[num_start] == '+';
      g.values[k] = std::stod(std::string(s.substr(num_start, pos - num_start)));
    }
    while (ok && pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (!ok || pos >= s.size() || s[pos] != ']') continue;
    g.end = pos + 1;
    out.push_back(g);
    open = pos;
  }
  return out;
}

const std::set<std::string>& filler_words() {
  static const std::set<std::string> words = {
      "a",       "an",   "the",    "is",     "are",    "was",      "were",   "at",      "in",     "on",
      "of",      "to",   "and",    "with",   "its",    "it",      "located", "location", "coordinates",
      "coordinate", "box", "boxes", "bounding", "position", "positioned", "sure", "here", "there", "found",
      "can",     "be",   "i",      "see",    "which",  "that",     "this",   "these",   "those",  "object",
      "objects", "region", "area",  "s",      "as",     "by",       "from",   "near",    "appears", "seen",
      "answer",  "output", "result", "results", "detected", "visible", "shown", "between", "around", "about"};
  return words;
}

struct WordSpan {
  std::string word;
  std::size_t end;
};

std::vector<WordSpan> words_before(std::string_view s, std::size_t limit) {
  std::vector<WordSpan> words;
  std::string current;
  std::size_t i = 0;
  for (; i < limit; ++i) {
    const auto u = static_cast<unsigned char>(s[i]);
    if (u >= 0x80 || std::isalpha(u)) {
      current.push_back(static_cast<char>(std::tolower(u)));
    } else if (!current.empty()) {
      words.push_back({std::move(current), i});
      current.clear();
    }
  }
  if (!current.empty()) words.push_back({std::move(current), i});
  return words;
}

bool is_word_boundary(std::string_view s, std::size_t pos) {
  if (pos >= s.size()) return true;
  const auto u = static_cast<unsigned char>(s[pos]);
  return !(std::isalnum(u) || u >= 0x80);
}

std::string attach_label(std::string_view text, std::size_t group_begin, const std::vector<std::string>& known) {
  if (!known.empty()) {
    const std::string lowered = to_lower(text.substr(0, group_begin));
    std::size_t best_end = 0;
    std::string best;
    for (const auto& raw : known) {
      const std::string label = normalize_label(raw);
      if (label.empty()) continue;
      for (std::size_t p = lowered.rfind(label); p != std::string::npos;
           p = p == 0 ? std::string::npos : lowered.rfind(label, p - 1)) {
        const std::size_t e = p + label.size();
        if ((p == 0 || is_word_boundary(lowered, p - 1)) && is_word_boundary(lowered, e)) {
          if (best.empty() || e > best_end || (e == best_end && label.size() > best.size())) {
            best_end = e;
            best = label;
          }
          break;
        }
      }
    }
    if (!best.empty()) return best;
  }
  const auto words = words_before(text, group_begin);
  for (auto it = words.rbegin(); it != words.rend(); ++it)
    if (!filler_words().count(it->word)) return it->word;
  return {};
}

}  // namespace

ParsedLocalization parse_localization(std::string_view text, int coord_bins,
                                      const std::vector<std::string>& known_labels) {
  ParsedLocalization strict;
  const auto failure = parse_strict(text, coord_bins, strict);
  if (!failure) return strict;

  ParsedLocalization out;
  out.recovered = true;
  out.diagnostics.push_back("strict grammar failed: " + *failure);
  std::map<std::string, std::size_t> slot;
  for (const auto& g : scan_groups(text)) {
    if (!g.integral) {
      out.diagnostics.push_back("skipped non-integer group at offset " + std::to_string(g.begin));
      continue;
    }
    const std::string label = attach_label(text, g.begin, known_labels);
    auto [it, fresh] = slot.emplace(label, out.entries.size());
    if (fresh) out.entries.push_back({label, {}});
    out.entries[it->second].boxes.push_back(
        Box{g.values[0], g.values[1], g.values[2], g.values[3], CoordSpace::grid(coord_bins)});
    out.diagnostics.push_back("recovered box at offset " + std::to_string(g.begin) + " attached to '" + label + "'");
  }
  if (out.entries.empty()) throw Error(ErrorCode::NoBoxesFound, "no coordinate groups in model output");
  return out;
}

// ---- length ------------------------------------------------------------------------

std::int64_t estimate_length(const ConversationRecord& record) {
  std::int64_t words = 0;
  for (const auto& t : record.turns) {
    bool in_word = false;
    for (char c : t.text) {
      const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
      if (!space && !in_word) ++words;
      in_word = !space;
    }
  }
  // Integer arithmetic keeps ceil(words * 1.3) exact.
  return (words * 13 + 9) / 10;
}

LengthCheck check_length(const ConversationRecord& record, std::int64_t budget) {
  if (budget != kStage1Budget && budget != kStage23Budget)
    throw Error(ErrorCode::InvalidArgument, "token budget must be 2048 or 4096");
  LengthCheck c;
  c.estimate = estimate_length(record);
  c.over_budget = c.estimate > budget;
  return c;
}

std::vector<std::string> check_conversation(const ConversationRecord& record, int coord_bins) {
  std::vector<std::string> violations;
  if (record.turns.empty()) violations.push_back("conversation has no turns");
  for (std::size_t i = 0; i < record.turns.size(); ++i) {
    const Role expected = i % 2 == 0 ? Role::User : Role::Assistant;
    if (record.turns[i].role != expected)
      violations.push_back("turn " + std::to_string(i) + " breaks user/assistant alternation");
    if (record.turns[i].role != Role::Assistant) continue;
    for (const auto& g : scan_groups(record.turns[i].text)) {
      const Box b{g.values[0], g.values[1], g.values[2], g.values[3], CoordSpace::grid(coord_bins)};
      if (auto err = check_box(b, coord_bins, coord_bins))
        violations.push_back("turn " + std::to_string(i) + " bracket group at offset " + std::to_string(g.begin) +
                             " is not a valid grid box (" + std::string(to_string(*err)) + ")");
    }
  }
  return violations;
}

// ---- batch render -------------------------------------------------------------------

Json RenderLedger::to_json() const {
  return {{"input", input}, {"rendered", rendered}, {"over_budget", over_budget}};
}

RenderResult render_samples(const std::vector<TaskSample>& samples, const TemplatePack& pack,
                            const RenderOptions& options, std::int64_t budget, int jobs) {
  std::vector<ConversationRecord> records(samples.size());
  std::vector<char> keep(samples.size(), 0);
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    records[i] = serialize_sample(samples[i], pack, options);
    keep[i] = check_length(records[i], budget).over_budget ? 0 : 1;
  });
  RenderResult result;
  result.ledger.input = samples.size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!keep[i]) {
      ++result.ledger.over_budget;
      continue;
    }
    result.records.push_back(std::move(records[i]));
  }
  result.ledger.rendered = result.records.size();
  return result;
}

}  // namespace forge
