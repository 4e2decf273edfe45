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

#include "featscope/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "featscope/error.hpp"
#include "featscope/matrix.hpp"
#include "featscope/rng.hpp"

namespace featscope {

Ecdf::Ecdf(std::span<const double> values) : sorted_(values.begin(), values.end()) {
  if (sorted_.empty()) fail(ErrorCode::kData, "ECDF needs at least one value");
  for (double v : sorted_) {
    if (!std::isfinite(v)) fail(ErrorCode::kData, "ECDF values must be finite");
  }
  std::sort(sorted_.begin(), sorted_.end());
}

std::size_t Ecdf::count_at_most(double v) const {
  return static_cast<std::size_t>(std::upper_bound(sorted_.begin(), sorted_.end(), v) - sorted_.begin());
}

double Ecdf::rank(double v) const {
  return static_cast<double>(count_at_most(v)) / static_cast<double>(sorted_.size());
}

double ecdf_rank(const Ecdf& e, double v) { return e.rank(v); }

double chance_anchored(double p, double p_mu) {
  if (p < p_mu) return 0.5 - 0.5 * (p_mu - p) / p_mu;
  return 0.5 + 0.5 * (p - p_mu) / (1.0 - p_mu);
}

std::pair<std::size_t, std::size_t> click_to_pixel(Click click, std::size_t width, std::size_t height) {
  if (!(click.x >= 0.0 && click.x <= 1.0 && click.y >= 0.0 && click.y <= 1.0)) {
    fail(ErrorCode::kValidation, "click coordinates must lie in [0, 1]");
  }
  const auto px = std::min(width - 1, static_cast<std::size_t>(std::floor(click.x * static_cast<double>(width))));
  const auto py = std::min(height - 1, static_cast<std::size_t>(std::floor(click.y * static_cast<double>(height))));
  return {px, py};
}

double mean_threshold(const Heatmap& h) {
  double peak = 0.0;
  for (double v : h.values) peak = std::max(peak, std::abs(v));
  return h.mean() + kMeanTieTolerance * peak;
}

LocalizabilityResult localizability_score(const Heatmap& h, Click click) {
  validate_heatmap(h);
  const auto [px, py] = click_to_pixel(click, h.width, h.height);
  if (h.is_constant()) fail(ErrorCode::kDegenerateHeatmap, "constant heatmap cannot be scored");
  Ecdf ecdf(h.values);
  LocalizabilityResult r;
  r.pixel_x = px;
  r.pixel_y = py;
  r.value = h.at(px, py);
  r.percentile = ecdf.rank(r.value);
  r.mean_percentile = ecdf.rank(mean_threshold(h));
  if (r.mean_percentile >= 1.0 - 1e-12 || r.mean_percentile <= 0.0) {
    fail(ErrorCode::kDegenerateHeatmap, "heatmap mean sits at an extreme of its ECDF");
  }
  r.score = chance_anchored(r.percentile, r.mean_percentile);
  return r;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) fail(ErrorCode::kConfig, "embedding dimensionalities differ");
  const double nu = norm2(u), nv = norm2(v);
  if (nu == 0.0 || nv == 0.0) fail(ErrorCode::kUndefinedSimilarity, "cosine of a zero vector");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

NameabilityResult nameability_score(std::span<const double> text, std::span<const EmbeddingVector> crops) {
  if (crops.size() != 9) {
    fail(ErrorCode::kProtocol, "nameability needs 9 crop embeddings, got " + std::to_string(crops.size()));
  }
  NameabilityResult r;
  double sum = 0.0;
  for (std::size_t i = 0; i < 9; ++i) {
    r.cosines[i] = cosine(text, crops[i]);
    sum += r.cosines[i];
  }
  r.score = sum / 9.0;
  return r;
}

double chance_baseline(std::span<const FeatureEmbeddings> features, std::size_t pairs, std::uint64_t seed) {
  if (features.size() < 2) fail(ErrorCode::kProtocol, "chance baseline needs at least two features");
  if (pairs == 0) fail(ErrorCode::kParameter, "chance baseline needs at least one pair");
  for (const auto& f : features) {
    if (f.texts.empty()) fail(ErrorCode::kProtocol, "every feature needs at least one description embedding");
  }
  Rng rng(seed);
  double sum = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const std::size_t a = rng.uniform_index(features.size());
    std::size_t b = rng.uniform_index(features.size() - 1);
    if (b >= a) ++b;
    const auto& texts = features[a].texts;
    const auto& text = texts[rng.uniform_index(texts.size())];
    sum += nameability_score(text, features[b].crops).score;
  }
  return sum / static_cast<double>(pairs);
}

}  // namespace featscope
