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

#include <stdexcept>
#include <string>
#include <string_view>

namespace forge {

enum class ErrorCode {
  // geometry
  Inverted,
  OutOfBounds,
  NonIntegerGridCoordinate,
  ZeroArea,
  // ingest
  MalformedJson,
  MalformedRecord,
  DanglingCategoryId,
  DanglingImageId,
  EmptyExpression,
  HasImageInTextSource,
  // curate / consolidate / convo / eval
  NoRegions,
  UnresolvedSource,
  MissingTemplate,
  NoBoxesFound,
  MissingQuery,
  EmptyGroundTruth,
  // planner
  UnknownScale,
  NotDivisible,
  DegenerateGrid,
  // plumbing
  InvalidArgument,
  Config,
  Io,
};

std::string_view to_string(ErrorCode code);

// Config-class errors map to exit status 1, everything else to 2.
bool is_config_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string locator = {});

  ErrorCode code() const { return code_; }
  const std::string& message() const { return message_; }
  const std::string& locator() const { return locator_; }

 private:
  ErrorCode code_;
  std::string message_;
  std::string locator_;
};

}  // namespace forge
