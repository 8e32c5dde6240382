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

#include "forge/error.hpp"

namespace forge {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Inverted: return "Inverted";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::NonIntegerGridCoordinate: return "NonIntegerGridCoordinate";
    case ErrorCode::ZeroArea: return "ZeroArea";
    case ErrorCode::MalformedJson: return "MalformedJson";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::DanglingCategoryId: return "DanglingCategoryId";
    case ErrorCode::DanglingImageId: return "DanglingImageId";
    case ErrorCode::EmptyExpression: return "EmptyExpression";
    case ErrorCode::HasImageInTextSource: return "HasImageInTextSource";
    case ErrorCode::NoRegions: return "NoRegions";
    case ErrorCode::UnresolvedSource: return "UnresolvedSource";
    case ErrorCode::MissingTemplate: return "MissingTemplate";
    case ErrorCode::NoBoxesFound: return "NoBoxesFound";
    case ErrorCode::MissingQuery: return "MissingQuery";
    case ErrorCode::EmptyGroundTruth: return "EmptyGroundTruth";
    case ErrorCode::UnknownScale: return "UnknownScale";
    case ErrorCode::NotDivisible: return "NotDivisible";
    case ErrorCode::DegenerateGrid: return "DegenerateGrid";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

bool is_config_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config:
    case ErrorCode::UnresolvedSource:
    case ErrorCode::MissingTemplate:
    case ErrorCode::UnknownScale:
    case ErrorCode::InvalidArgument:
      return true;
    default:
      return false;
  }
}

namespace {

std::string compose(ErrorCode code, const std::string& message,
                    const std::string& locator) {
  std::string out(to_string(code));
  out += ": ";
  out += message;
  if (!locator.empty()) {
    out += " (at ";
    out += locator;
    out += ")";
  }
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message, std::string locator)
    : std::runtime_error(compose(code, message, locator)),
      code_(code),
      message_(message),
      locator_(std::move(locator)) {}

}  // namespace forge
