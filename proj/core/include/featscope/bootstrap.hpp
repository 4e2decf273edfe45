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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace featscope {

struct BootstrapSummary {
  double mean = 0.0;
  double sd = 0.0;  // sample SD of the resampled statistics
  std::vector<double> statistics;
};

/// Breadth design: resample m units with replacement, statistic = mean unit
/// score. Resample b draws from its own stream mix_seed(seed, b), so results
/// do not depend on `threads`.
BootstrapSummary bootstrap_breadth(std::span<const double> unit_scores, std::size_t m, std::size_t resamples,
                                   std::uint64_t seed, std::size_t threads = 1);

/// One pilot response. image_rank is 1-based.
struct PilotRecord {
  std::string feature;
  int image_rank = 1;
  int trial = 1;
  double score = 0.0;
};

/// Depth design: every feature kept; per feature, `trials` responses drawn
/// with replacement from those on its first `images` images; statistic =
/// mean of per-feature means.
BootstrapSummary bootstrap_depth(std::span<const PilotRecord> records, std::size_t images, std::size_t trials,
                                 std::size_t resamples, std::uint64_t seed, std::size_t threads = 1);

/// JSON lines {"feature":..,"image_rank":..,"trial":..,"score":..}.
std::vector<PilotRecord> parse_pilot_jsonl(const std::string& text);
std::vector<PilotRecord> load_pilot_jsonl(const std::filesystem::path& path);

}  // namespace featscope
