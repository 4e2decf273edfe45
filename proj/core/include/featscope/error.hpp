// Copyright 2026 The featscope Authors.
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

namespace featscope {

/// Failure categories shared by every module. The CLI maps them onto exit
/// codes and the HTTP layer onto status codes.
enum class ErrorCode {
  kInputShape,
  kInvalidCode,
  kData,
  kTraining,
  kParameter,
  kDegenerateHeatmap,
  kDegenerateFeature,
  kInsufficientAssets,
  kManifest,
  kProtocol,
  kValidation,
  kConfig,
  kConflict,
  kNotFound,
  kState,
  kGateway,
  kUndefinedSimilarity,
  kUndefinedCorrelation,
  kInsufficientData,
  kDependency,
  kIntegrity,
  kIo,
  kInternal,
};

std::string_view to_string(ErrorCode code);

/// 0 success, 1 validation/config, 2 I/O, 3 internal invariant violation.
int exit_code(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace featscope
