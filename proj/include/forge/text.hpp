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

#include <string>
#include <string_view>
#include <vector>

namespace forge {

// Trims and collapses runs of whitespace to a single space.
std::string normalize_whitespace(std::string_view text);

// Lowercased, whitespace-normalized label; ';' and newlines become spaces so
// labels survive the localization grammar.
std::string normalize_label(std::string_view text);

// Lowercased tokens: maximal runs of ASCII alphanumerics or non-ASCII bytes.
// Everything else (whitespace, punctuation) separates tokens.
std::vector<std::string> tokenize(std::string_view text);

std::string to_lower(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace forge
