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

#include <cstddef>
#include <span>
#include <vector>

namespace featscope {

/// Non-negative activation map over a width x height grid, row-major.
struct Heatmap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;

  Heatmap() = default;
  Heatmap(std::size_t w, std::size_t h, std::vector<double> v);

  double at(std::size_t x, std::size_t y) const { return values[y * width + x]; }
  std::size_t size() const noexcept { return values.size(); }
  double mean() const;
  bool is_constant() const;
  bool all_zero() const;

  friend bool operator==(const Heatmap&, const Heatmap&) = default;
};

/// Throws kInputShape / kData unless the map is well formed, finite and
/// non-negative.
void validate_heatmap(const Heatmap& h);

}  // namespace featscope
