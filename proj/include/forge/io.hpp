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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "forge/model.hpp"

namespace forge {

namespace fs = std::filesystem;

// Calls `fn(json, line_number)` for every non-blank line. Parse failures
// throw MalformedJson with "path:line".
void for_each_jsonl(const fs::path& path, const std::function<void(const Json&, std::size_t)>& fn);

Json read_json_file(const fs::path& path);

// Writes to a sibling temp file and renames over the destination on commit().
// An uncommitted writer removes its temp file on destruction.
class AtomicWriter {
 public:
  explicit AtomicWriter(fs::path destination);
  ~AtomicWriter();
  AtomicWriter(const AtomicWriter&) = delete;
  AtomicWriter& operator=(const AtomicWriter&) = delete;

  void write_line(std::string_view line);
  void write_json_line(const Json& j) { write_line(j.dump()); }
  std::ostream& stream() { return out_; }
  void commit();

 private:
  fs::path destination_;
  fs::path temp_;
  std::ofstream out_;
  bool committed_ = false;
};

void write_json_file(const fs::path& path, const Json& j);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const fs::path& path);

// Stable 64-bit FNV-1a, used for dedup keys and seed derivation.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace forge
