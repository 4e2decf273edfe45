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

#include "featscope/error.hpp"

namespace featscope {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInputShape: return "input-shape";
    case ErrorCode::kInvalidCode: return "invalid-code";
    case ErrorCode::kData: return "data";
    case ErrorCode::kTraining: return "training";
    case ErrorCode::kParameter: return "parameter";
    case ErrorCode::kDegenerateHeatmap: return "degenerate-heatmap";
    case ErrorCode::kDegenerateFeature: return "degenerate-feature";
    case ErrorCode::kInsufficientAssets: return "insufficient-assets";
    case ErrorCode::kManifest: return "manifest";
    case ErrorCode::kProtocol: return "protocol";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kState: return "state";
    case ErrorCode::kGateway: return "gateway";
    case ErrorCode::kUndefinedSimilarity: return "undefined-similarity";
    case ErrorCode::kUndefinedCorrelation: return "undefined-correlation";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kDependency: return "dependency";
    case ErrorCode::kIntegrity: return "integrity";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return 2;
    case ErrorCode::kInternal: return 3;
    default: return 1;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + " error: " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace featscope
