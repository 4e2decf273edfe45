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

#include "featscope/stimulus.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "featscope/binary_io.hpp"
#include "featscope/error.hpp"
#include "featscope/rng.hpp"

namespace featscope {

using nlohmann::json;

namespace {

std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - 1 - m;
  return static_cast<std::size_t>(m);
}

std::vector<AssetEntry> ranked(const FeatureAssets& assets) {
  std::vector<AssetEntry> entries = assets.images;
  std::stable_sort(entries.begin(), entries.end(),
                   [](const AssetEntry& a, const AssetEntry& b) { return a.activation > b.activation; });
  return entries;
}

}  // namespace

Heatmap smooth_heatmap(const Heatmap& h, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) fail(ErrorCode::kParameter, "sigma must be > 0");
  validate_heatmap(h);
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t j = -radius; j <= radius; ++j) {
    const double w = std::exp(-static_cast<double>(j * j) / (2.0 * sigma * sigma));
    kernel[static_cast<std::size_t>(j + radius)] = w;
    total += w;
  }
  for (double& w : kernel) w /= total;

  const std::size_t width = h.width, height = h.height;
  std::vector<double> tmp(h.size(), 0.0), out(h.size(), 0.0);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      double s = 0.0;
      for (std::ptrdiff_t j = -radius; j <= radius; ++j) {
        s += kernel[static_cast<std::size_t>(j + radius)] *
             h.values[y * width + reflect(static_cast<std::ptrdiff_t>(x) + j, width)];
      }
      tmp[y * width + x] = s;
    }
  }
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      double s = 0.0;
      for (std::ptrdiff_t j = -radius; j <= radius; ++j) {
        s += kernel[static_cast<std::size_t>(j + radius)] *
             tmp[reflect(static_cast<std::ptrdiff_t>(y) + j, height) * width + x];
      }
      out[y * width + x] = s;
    }
  }
  return Heatmap(width, height, std::move(out));
}

double default_sigma(const Heatmap& h) {
  return 0.02 * std::hypot(static_cast<double>(h.width), static_cast<double>(h.height));
}

Box peak_crop_box(const Heatmap& h, std::size_t image_width, std::size_t image_height,
                  std::size_t crop) {
  validate_heatmap(h);
  if (crop == 0 || crop > std::min(image_width, image_height)) {
    fail(ErrorCode::kParameter, "crop size must be in [1, min(image_w, image_h)]");
  }
  if (h.all_zero()) fail(ErrorCode::kDegenerateHeatmap, "cannot place a crop on an all-zero heatmap");
  const auto peak = static_cast<std::size_t>(std::max_element(h.values.begin(), h.values.end()) -
                                             h.values.begin());
  const std::size_t hx = peak % h.width, hy = peak / h.width;
  const auto ix = static_cast<std::ptrdiff_t>(std::floor((static_cast<double>(hx) + 0.5) *
                                                         static_cast<double>(image_width) /
                                                         static_cast<double>(h.width)));
  const auto iy = static_cast<std::ptrdiff_t>(std::floor((static_cast<double>(hy) + 0.5) *
                                                         static_cast<double>(image_height) /
                                                         static_cast<double>(h.height)));
  const auto half = static_cast<std::ptrdiff_t>(crop / 2);
  const auto max_left = static_cast<std::ptrdiff_t>(image_width - crop);
  const auto max_top = static_cast<std::ptrdiff_t>(image_height - crop);
  Box box;
  box.left = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(ix - half, 0, max_left));
  box.top = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(iy - half, 0, max_top));
  box.width = crop;
  box.height = crop;
  return box;
}

std::set<std::uint32_t> select_features_for_images(const ImportanceTable& table, std::size_t m) {
  if (m == 0) fail(ErrorCode::kParameter, "per-image feature count must be >= 1");
  std::map<std::string, std::vector<FeatureImportance>> per_image;
  for (const auto& [key, v] : table.entries()) per_image[key.first].push_back({key.second, v});
  std::set<std::uint32_t> selected;
  for (auto& [_, list] : per_image) {
    std::sort(list.begin(), list.end(), [](const FeatureImportance& a, const FeatureImportance& b) {
      const double x = std::abs(a.importance), y = std::abs(b.importance);
      return x > y || (x == y && a.feature < b.feature);
    });
    for (std::size_t i = 0; i < std::min(m, list.size()); ++i) selected.insert(list[i].feature);
  }
  return selected;
}

std::size_t decile_bin(double score) {
  if (!(score >= 0.0 && score <= 1.0)) fail(ErrorCode::kParameter, "decile scores must lie in [0, 1]");
  return std::min<std::size_t>(9, static_cast<std::size_t>(std::floor(score * 10.0)));
}

std::vector<std::string> decile_sample(std::span<const ScoredFeature> features, std::size_t per_bin,
                                       std::uint64_t seed) {
  std::array<std::vector<std::string>, 10> bins;
  for (const auto& f : features) bins[decile_bin(f.score)].push_back(f.id);
  std::vector<std::string> out;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    auto& bin = bins[b];
    std::sort(bin.begin(), bin.end());
    bin.erase(std::unique(bin.begin(), bin.end()), bin.end());
    Rng rng(mix_seed(seed, b));
    rng.shuffle(std::span<std::string>(bin));
    const std::size_t take = std::min(per_bin, bin.size());
    out.insert(out.end(), bin.begin(), bin.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return out;
}

AssetManifest AssetManifest::parse(const std::string& json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kManifest, std::string("asset manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorCode::kManifest, "asset manifest must be a JSON object");
  AssetManifest m;
  m.base_dir = base_dir;
  for (const auto& [id, node] : doc.items()) {
    if (id == "v") continue;
    if (!node.is_object() || !node.contains("images") || !node["images"].is_array()) {
      fail(ErrorCode::kManifest, "feature " + id + " lacks an images array");
    }
    FeatureAssets fa;
    fa.feature_id = id;
    fa.model = node.value("model", std::string());
    if (node.contains("visualization") && node["visualization"].is_string()) {
      fa.visualization = node["visualization"].get<std::string>();
    }
    for (const auto& e : node["images"]) {
      if (!e.is_object() || !e.contains("image") || !e.contains("heatmap") || !e["image"].is_string() ||
          !e["heatmap"].is_string()) {
        fail(ErrorCode::kManifest, "feature " + id + " has an image entry without an image/heatmap pair");
      }
      AssetEntry a;
      a.image = e["image"].get<std::string>();
      a.heatmap = e["heatmap"].get<std::string>();
      a.activation = e.value("activation", 0.0);
      a.width = e.value("width", std::size_t{224});
      a.height = e.value("height", std::size_t{224});
      a.crop = e.value("crop", std::string());
      fa.images.push_back(std::move(a));
    }
    m.features.emplace(id, std::move(fa));
  }
  return m;
}

AssetManifest AssetManifest::load(const std::filesystem::path& path) {
  return parse(io::read_file(path), path.parent_path());
}

std::string AssetManifest::to_json() const {
  json doc = json::object();
  for (const auto& [id, fa] : features) {
    json node;
    if (!fa.model.empty()) node["model"] = fa.model;
    node["visualization"] = fa.visualization ? json(*fa.visualization) : json(nullptr);
    node["images"] = json::array();
    for (const auto& a : fa.images) {
      json e{{"image", a.image}, {"heatmap", a.heatmap}, {"activation", a.activation},
             {"width", a.width}, {"height", a.height}};
      if (!a.crop.empty()) e["crop"] = a.crop;
      node["images"].push_back(std::move(e));
    }
    doc[id] = std::move(node);
  }
  return doc.dump(2);
}

const FeatureAssets& AssetManifest::at(const std::string& feature_id) const {
  auto it = features.find(feature_id);
  if (it == features.end()) fail(ErrorCode::kDependency, "asset manifest has no entry for feature " + feature_id);
  return it->second;
}

std::filesystem::path AssetManifest::resolve(const std::string& ref) const {
  std::filesystem::path p(ref);
  return p.is_absolute() ? p : base_dir / p;
}

std::string pick_query_image(std::span<const std::string> ranking,
                             std::span<const std::string> panel_images) {
  if (ranking.size() < 10) {
    fail(ErrorCode::kInsufficientAssets, "query selection needs >= 10 ranked images, got " +
                                             std::to_string(ranking.size()));
  }
  for (const auto& ref : ranking) {
    if (std::find(panel_images.begin(), panel_images.end(), ref) == panel_images.end()) return ref;
  }
  fail(ErrorCode::kInsufficientAssets, "every ranked image is already in the panel");
}

std::vector<std::string> ExplanationPanel::image_refs() const {
  std::vector<std::string> out;
  for (const auto& e : items) out.push_back(e.image);
  return out;
}

ExplanationPanel assemble_panel(const FeatureAssets& assets) {
  if (assets.images.size() < 9) {
    fail(ErrorCode::kInsufficientAssets, "feature " + assets.feature_id + " has " +
                                             std::to_string(assets.images.size()) + " image/heatmap pairs, need 9");
  }
  auto entries = ranked(assets);
  ExplanationPanel panel;
  panel.feature_id = assets.feature_id;
  panel.visualization = assets.visualization;
  panel.missing_visualization = !assets.visualization.has_value();
  std::set<std::string> seen;
  for (std::size_t i = 0; i < 9; ++i) {
    if (!seen.insert(entries[i].image).second) {
      fail(ErrorCode::kManifest, "feature " + assets.feature_id + " lists image " + entries[i].image + " twice");
    }
    panel.items[i] = entries[i];
  }
  return panel;
}

ExplanationPanel assemble_panel(const std::string& feature_id, const AssetManifest& manifest) {
  return assemble_panel(manifest.at(feature_id));
}

std::string to_string(TrialKind kind) {
  switch (kind) {
    case TrialKind::kLocalization: return "localization";
    case TrialKind::kNaming: return "naming";
    case TrialKind::kPractice: return "practice";
    case TrialKind::kCatch: return "catch";
  }
  return "localization";
}

TrialKind trial_kind_from_string(const std::string& s) {
  if (s == "localization") return TrialKind::kLocalization;
  if (s == "naming") return TrialKind::kNaming;
  if (s == "practice") return TrialKind::kPractice;
  if (s == "catch") return TrialKind::kCatch;
  fail(ErrorCode::kValidation, "unknown trial kind '" + s + "'");
}

void validate_trial(const TrialSpec& trial) {
  if (trial.is_click_trial()) {
    if (!trial.query) fail(ErrorCode::kProtocol, "click trial " + trial.trial_id + " has no query");
    for (const auto& e : trial.panel.items) {
      if (e.image == trial.query->image) {
        fail(ErrorCode::kProtocol, "trial " + trial.trial_id + " reuses a panel image as its query");
      }
    }
  } else if (trial.query) {
    fail(ErrorCode::kProtocol, "naming trial " + trial.trial_id + " must not carry a query");
  }
}

TrialSpec make_click_trial(std::string trial_id, TrialKind kind, std::string model,
                           const FeatureAssets& assets, double threshold) {
  if (kind == TrialKind::kNaming) fail(ErrorCode::kProtocol, "naming trials have no query");
  TrialSpec t;
  t.trial_id = std::move(trial_id);
  t.kind = kind;
  t.model = std::move(model);
  t.panel = assemble_panel(assets);
  t.threshold = threshold;
  auto entries = ranked(assets);
  std::vector<std::string> ranking;
  for (const auto& e : entries) ranking.push_back(e.image);
  const auto panel_refs = t.panel.image_refs();
  const std::string query = pick_query_image(ranking, panel_refs);
  for (const auto& e : entries) {
    if (e.image == query) {
      t.query = e;
      break;
    }
  }
  validate_trial(t);
  return t;
}

TrialSpec make_naming_trial(std::string trial_id, std::string model, const FeatureAssets& assets) {
  TrialSpec t;
  t.trial_id = std::move(trial_id);
  t.kind = TrialKind::kNaming;
  t.model = std::move(model);
  t.panel = assemble_panel(assets);
  return t;
}

}  // namespace featscope
