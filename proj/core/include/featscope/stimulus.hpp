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
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "featscope/heatmap.hpp"
#include "featscope/probe.hpp"

namespace featscope {

/// Separable Gaussian blur, kernel truncated at 3 sigma, reflective border.
Heatmap smooth_heatmap(const Heatmap& h, double sigma);

/// Default blur width: 2% of the map diagonal.
double default_sigma(const Heatmap& h);

struct Box {
  std::size_t left = 0;
  std::size_t top = 0;
  std::size_t width = 0;
  std::size_t height = 0;

  friend bool operator==(const Box&, const Box&) = default;
};

/// Square crop of side `crop` centred on the heatmap argmax (lowest row-major
/// index on ties), with the heatmap mapped onto the image grid by
/// nearest-neighbour scaling and the box clamped inside the image.
Box peak_crop_box(const Heatmap& h, std::size_t image_width, std::size_t image_height,
                  std::size_t crop);

/// Union over images of the m features with largest |importance|; ties go to
/// the lower feature index.
std::set<std::uint32_t> select_features_for_images(const ImportanceTable& table, std::size_t m);

struct ScoredFeature {
  std::string id;
  double score = 0.0;
};

/// Ten fixed-width bins over [0, 1]; up to per_bin features drawn uniformly
/// without replacement from each. Output is ordered by bin, then by draw.
std::vector<std::string> decile_sample(std::span<const ScoredFeature> features, std::size_t per_bin,
                                       std::uint64_t seed);

/// Bin index (0..9) used by decile_sample.
std::size_t decile_bin(double score);

/// One activating image with its heatmap. Dimensions are metadata only; the
/// pipeline never decodes pixels.
struct AssetEntry {
  std::string image;
  std::string heatmap;
  double activation = 0.0;
  std::size_t width = 224;
  std::size_t height = 224;
  /// Optional pre-cut crop image for embedding.
  std::string crop;
};

struct FeatureAssets {
  std::string feature_id;
  std::string model;
  std::optional<std::string> visualization;
  std::vector<AssetEntry> images;  // descending activation
};

/// JSON document: feature id -> {"model", "visualization", "images": [...]}.
struct AssetManifest {
  std::map<std::string, FeatureAssets> features;
  std::filesystem::path base_dir;

  static AssetManifest load(const std::filesystem::path& path);
  static AssetManifest parse(const std::string& json_text, const std::filesystem::path& base_dir);
  std::string to_json() const;

  const FeatureAssets& at(const std::string& feature_id) const;
  std::filesystem::path resolve(const std::string& ref) const;
};

/// First ranked image (ranking in descending activation) that is not in the
/// panel. Needs at least ten ranked images.
std::string pick_query_image(std::span<const std::string> ranking,
                             std::span<const std::string> panel_images);

struct ExplanationPanel {
  std::string feature_id;
  std::optional<std::string> visualization;
  bool missing_visualization = false;
  std::array<AssetEntry, 9> items;

  std::vector<std::string> image_refs() const;
};

/// Top nine entries by activation.
ExplanationPanel assemble_panel(const std::string& feature_id, const AssetManifest& manifest);
ExplanationPanel assemble_panel(const FeatureAssets& assets);

enum class TrialKind { kLocalization, kNaming, kPractice, kCatch };

std::string to_string(TrialKind kind);
TrialKind trial_kind_from_string(const std::string& s);

/// A trial as stored by the study. Practice and catch trials are click
/// trials and carry a query plus a correctness threshold.
struct TrialSpec {
  std::string trial_id;
  TrialKind kind = TrialKind::kLocalization;
  std::string model;
  ExplanationPanel panel;
  std::optional<AssetEntry> query;
  double threshold = 0.0;

  const std::string& feature_id() const { return panel.feature_id; }
  bool is_click_trial() const { return kind != TrialKind::kNaming; }
};

/// Throws kProtocol if the query/panel invariants do not hold.
void validate_trial(const TrialSpec& trial);

TrialSpec make_click_trial(std::string trial_id, TrialKind kind, std::string model,
                           const FeatureAssets& assets, double threshold = 0.0);
TrialSpec make_naming_trial(std::string trial_id, std::string model, const FeatureAssets& assets);

}  // namespace featscope
