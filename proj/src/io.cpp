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

#include "forge/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <atomic>
#include <memory>
#include <sstream>

#include "forge/error.hpp"

namespace forge {

void for_each_jsonl(const fs::path& path, const std::function<void(const Json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw Error(ErrorCode::MalformedJson, e.what(), path.string() + ":" + std::to_string(line_no));
    }
    try {
      fn(j, line_no);
    } catch (const Error& e) {
      if (!e.locator().empty()) throw;
      throw Error(e.code(), e.what(), path.string() + ":" + std::to_string(line_no));
    }
  }
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::MalformedJson, e.what(), path.string() + ":byte " + std::to_string(e.byte));
  }
}

namespace {

fs::path temp_sibling(const fs::path& destination) {
  static std::atomic<unsigned> counter{0};
  auto name = destination.filename().string() + ".tmp." + std::to_string(counter.fetch_add(1));
  return destination.parent_path() / name;
}

}  // namespace

AtomicWriter::AtomicWriter(fs::path destination)
    : destination_(std::move(destination)), temp_(temp_sibling(destination_)) {
  if (destination_.has_parent_path()) fs::create_directories(destination_.parent_path());
  out_.open(temp_, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error(ErrorCode::Io, "cannot write " + temp_.string());
}

AtomicWriter::~AtomicWriter() {
  if (!committed_) {
    out_.close();
    std::error_code ec;
    fs::remove(temp_, ec);
  }
}

void AtomicWriter::write_line(std::string_view line) {
  out_ << line << '\n';
}

void AtomicWriter::commit() {
  out_.flush();
  if (!out_) throw Error(ErrorCode::Io, "write failed for " + temp_.string());
  out_.close();
  fs::rename(temp_, destination_);
  committed_ = true;
}

void write_json_file(const fs::path& path, const Json& j) {
  AtomicWriter w(path);
  w.stream() << j.dump(2) << '\n';
  w.commit();
}

namespace {

struct DigestCtx {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};
  DigestCtx() { EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr); }
  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx.get(), data, n); }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
      out.push_back(kHex[md[i] >> 4]);
      out.push_back(kHex[md[i] & 0xf]);
    }
    return out;
  }
};

}  // namespace

std::string sha256_hex(std::string_view data) {
  DigestCtx d;
  d.update(data.data(), data.size());
  return d.hex();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  DigestCtx d;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    d.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return d.hex();
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace forge
