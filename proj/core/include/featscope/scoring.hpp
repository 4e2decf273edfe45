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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "featscope/heatmap.hpp"

namespace featscope {

/// Right-continuous empirical CDF.
class Ecdf {
 public:
  explicit Ecdf(std::span<const double> values);

  /// Fraction of values <= v.
  double rank(double v) const;
  std::size_t count_at_most(double v) const;
  std::size_t size() const noexcept { return sorted_.size(); }
  const std::vector<double>& sorted_values() const noexcept { return sorted_; }

 private:
  std::vector<double> sorted_;
};

double ecdf_rank(const Ecdf& e, double v);

/// Normalized click position on the displayed query image.
struct Click {
  double x = 0.0;
  double y = 0.0;
};

struct LocalizabilityResult {
  std::size_t pixel_x = 0;
  std::size_t pixel_y = 0;
  double value = 0.0;          // heatmap value under the click
  double percentile = 0.0;     // ECDF rank of that value
  double mean_percentile = 0.0;  // ECDF rank of the heatmap mean
  double score = 0.0;
};

/// Values within this fraction of the heatmap's peak above the mean count as
/// lying at the mean, so an exact tie with the mean survives rescaling.
inline constexpr double kMeanTieTolerance = 1e-12;

/// Heatmap mean widened by the tie tolerance; ECDF(mean_threshold) is the
/// chance anchor.
double mean_threshold(const Heatmap& h);

/// Chance-anchored localizability: the rank of the heatmap mean maps to 0.5,
/// the extremes to 0 and 1. Constant maps are unscorable (kDegenerateHeatmap).
LocalizabilityResult localizability_score(const Heatmap& smoothed, Click click);

/// Same transform on precomputed ranks.
double chance_anchored(double percentile, double mean_percentile);

/// Pixel under a normalized click (floor, clamped to the last row/column).
std::pair<std::size_t, std::size_t> click_to_pixel(Click click, std::size_t width, std::size_t height);

using EmbeddingVector = std::vector<double>;

/// u.v / (|u||v|). Zero vectors raise kUndefinedSimilarity.
double cosine(std::span<const double> u, std::span<const double> v);

struct NameabilityResult {
  std::array<double, 9> cosines{};
  double score = 0.0;
  int confidence = 0;  // 0 until a Likert value is attached
};

/// Mean cosine between the description embedding and nine crop embeddings.
NameabilityResult nameability_score(std::span<const double> text,
                                    std::span<const EmbeddingVector> crops);

struct FeatureEmbeddings {
  std::vector<EmbeddingVector> texts;
  std::vector<EmbeddingVector> crops;  // exactly nine
};

/// Mean nameability of mismatched pairs: a description of feature a scored
/// against the crops of a different feature b, over `pairs` seeded draws.
double chance_baseline(std::span<const FeatureEmbeddings> features, std::size_t pairs,
                       std::uint64_t seed);

}  // namespace featscope
