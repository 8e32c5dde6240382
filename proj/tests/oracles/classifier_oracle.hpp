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

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <string>
#include <vector>

namespace oracle {

struct Lexicon {
  std::set<std::string> articles, positional, verbs;
};

// The rule cascade evaluated directly over regex word tokens.
inline std::string classify(const std::string& phrase, const Lexicon& lex) {
  static const std::regex word("[A-Za-z0-9]+");
  std::vector<std::string> w;
  for (auto it = std::sregex_iterator(phrase.begin(), phrase.end(), word); it != std::sregex_iterator(); ++it) {
    std::string t = it->str();
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    w.push_back(t);
  }
  std::size_t i = 0;
  while (i < w.size() && lex.articles.count(w[i])) ++i;
  w.erase(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(i));

  bool short_positional = w.size() <= 3;
  for (std::size_t j = 0; short_positional && j + 1 < w.size(); ++j)
    if (!lex.positional.count(w[j])) short_positional = false;
  if (short_positional) return "class_level";

  bool detailed = w.size() > 12;
  for (std::size_t j = 0; j < w.size() && !detailed; ++j)
    if (lex.verbs.count(w[j]) && w.size() - j - 1 >= 2) detailed = true;
  return detailed ? "detailed" : "concise";
}

}  // namespace oracle
