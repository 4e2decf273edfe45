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

#include "featscope/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "featscope/error.hpp"

namespace featscope {

Heatmap::Heatmap(std::size_t w, std::size_t h, std::vector<double> v)
    : width(w), height(h), values(std::move(v)) {
  validate_heatmap(*this);
}

double Heatmap::mean() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

bool Heatmap::is_constant() const {
  if (values.empty()) return true;
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return *lo == *hi;
}

bool Heatmap::all_zero() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

void validate_heatmap(const Heatmap& h) {
  if (h.width == 0 || h.height == 0) fail(ErrorCode::kInputShape, "heatmap has zero extent");
  if (h.values.size() != h.width * h.height) {
    fail(ErrorCode::kInputShape, "heatmap holds " + std::to_string(h.values.size()) + " values for " +
                                     std::to_string(h.width) + "x" + std::to_string(h.height));
  }
  for (double v : h.values) {
    if (!std::isfinite(v)) fail(ErrorCode::kData, "heatmap contains non-finite values");
    if (v < 0.0) fail(ErrorCode::kData, "heatmap contains negative values");
  }
}

}  // namespace featscope
