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

#include <cmath>
#include <numeric>

#include "doctest.h"
#include "expect_error.hpp"
#include "featscope/stimulus.hpp"
#include "featscope/synthetic.hpp"

using namespace featscope;

namespace {

FeatureAssets assets_with(std::size_t n, const std::string& id = "m/1") {
  FeatureAssets fa;
  fa.feature_id = id;
  fa.model = "m";
  for (std::size_t i = 0; i < n; ++i) {
    AssetEntry e;
    e.image = "img" + std::to_string(i) + ".png";
    e.heatmap = "hm" + std::to_string(i) + ".hm1";
    e.activation = static_cast<double>(i);  // ascending on purpose
    fa.images.push_back(e);
  }
  return fa;
}

}  // namespace

TEST_CASE("smoothing preserves the mean of a constant map and mass of a delta") {
  Heatmap flat(9, 7, std::vector<double>(63, 2.0));
  for (double v : smooth_heatmap(flat, 1.5).values) CHECK(v == doctest::Approx(2.0).epsilon(1e-12));

  std::vector<double> v(21 * 21, 0.0);
  v[10 * 21 + 10] = 1.0;
  const Heatmap s = smooth_heatmap(Heatmap(21, 21, v), 1.0);
  CHECK(std::accumulate(s.values.begin(), s.values.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  const auto peak = std::max_element(s.values.begin(), s.values.end()) - s.values.begin();
  CHECK(peak == 10 * 21 + 10);
  CHECK(s.at(9, 10) == doctest::Approx(s.at(11, 10)).epsilon(1e-15));
  CHECK(s.at(10, 9) == doctest::Approx(s.at(9, 10)).epsilon(1e-15));
}

TEST_CASE("smoothing rejects a non-positive sigma") {
  CHECK_ERROR_CODE(smooth_heatmap(Heatmap(2, 2, {1, 2, 3, 4}), 0.0), ErrorCode::kParameter);
}

TEST_CASE("heatmaps reject negative and non-finite values") {
  CHECK_ERROR_CODE(Heatmap(2, 1, {1.0, -0.5}), ErrorCode::kData);
  CHECK_ERROR_CODE(Heatmap(2, 1, {1.0, std::nan("")}), ErrorCode::kData);
  CHECK_ERROR_CODE(Heatmap(2, 2, {1.0}), ErrorCode::kInputShape);
}

TEST_CASE("default sigma scales with the map diagonal") {
  CHECK(default_sigma(Heatmap(30, 40, std::vector<double>(1200, 1.0))) == doctest::Approx(1.0));
}

TEST_CASE("peak crop is centered on the peak and clamped to the image") {
  std::vector<double> v(16, 0.0);
  v[1 * 4 + 2] = 1.0;  // heatmap pixel (2, 1) of 4x4
  const Heatmap h(4, 4, v);
  // 2.5/4 * 100 = 62, 1.5/4 * 100 = 37
  CHECK(peak_crop_box(h, 100, 100, 20) == Box{52, 27, 20, 20});
  std::vector<double> corner(16, 0.0);
  corner[0] = 1.0;
  CHECK(peak_crop_box(Heatmap(4, 4, corner), 100, 100, 40) == Box{0, 0, 40, 40});
  std::vector<double> far(16, 0.0);
  far[15] = 1.0;
  CHECK(peak_crop_box(Heatmap(4, 4, far), 100, 80, 40) == Box{60, 40, 40, 40});
  CHECK_ERROR_CODE(peak_crop_box(Heatmap(4, 4, std::vector<double>(16, 0.0)), 100, 100, 10),
                   ErrorCode::kDegenerateHeatmap);
  CHECK_ERROR_CODE(peak_crop_box(h, 100, 100, 101), ErrorCode::kParameter);
}

TEST_CASE("per-image selection keeps the top m by absolute importance") {
  ImportanceTable t;
  t.set("a", 1, 0.5);
  t.set("a", 2, -3.0);
  t.set("a", 3, 1.0);
  t.set("b", 4, 0.1);
  CHECK(select_features_for_images(t, 1) == std::set<std::uint32_t>{2, 4});
  CHECK(select_features_for_images(t, 2) == std::set<std::uint32_t>{2, 3, 4});
  CHECK_ERROR_CODE(select_features_for_images(t, 0), ErrorCode::kParameter);
}

TEST_CASE("decile sampling is stratified, seeded and capped per bin") {
  CHECK(decile_bin(0.0) == 0);
  CHECK(decile_bin(0.95) == 9);
  CHECK(decile_bin(1.0) == 9);
  CHECK_ERROR_CODE(decile_bin(1.5), ErrorCode::kParameter);
  std::vector<ScoredFeature> fs;
  for (int i = 0; i < 100; ++i) fs.push_back({"f" + std::to_string(i), i / 100.0});
  fs.push_back({"lonely", 0.999});
  const auto a = decile_sample(fs, 3, 42);
  CHECK(a == decile_sample(fs, 3, 42));
  CHECK(a.size() == 30);
  std::array<int, 10> per{};
  for (const auto& id : a) {
    for (const auto& f : fs) {
      if (f.id == id) ++per[decile_bin(f.score)];
    }
  }
  for (int n : per) CHECK(n == 3);
  CHECK(decile_sample(fs, 20, 1).size() == 101);
}

TEST_CASE("panels take the nine most active images and the query the tenth") {
  const FeatureAssets fa = assets_with(12);
  const ExplanationPanel p = assemble_panel(fa);
  CHECK(p.missing_visualization);
  CHECK(p.items[0].image == "img11.png");
  CHECK(p.items[8].image == "img3.png");
  const TrialSpec t = make_click_trial("t1", TrialKind::kLocalization, "m", fa);
  REQUIRE(t.query);
  CHECK(t.query->image == "img2.png");
  CHECK_ERROR_CODE(assemble_panel(assets_with(8)), ErrorCode::kInsufficientAssets);
  CHECK_ERROR_CODE(make_click_trial("t", TrialKind::kLocalization, "m", assets_with(9)), ErrorCode::kInsufficientAssets);
  const TrialSpec n = make_naming_trial("t2", "m", assets_with(9));
  CHECK(!n.query);
  CHECK_ERROR_CODE(make_click_trial("t", TrialKind::kNaming, "m", fa), ErrorCode::kProtocol);
}

TEST_CASE("query selection skips images already in the panel") {
  std::vector<std::string> ranking;
  for (int i = 0; i < 10; ++i) ranking.push_back("r" + std::to_string(i));
  std::vector<std::string> panel(ranking.begin(), ranking.begin() + 9);
  CHECK(pick_query_image(ranking, panel) == "r9");
  panel.push_back("r9");
  CHECK_ERROR_CODE(pick_query_image(ranking, panel), ErrorCode::kInsufficientAssets);
}

TEST_CASE("manifest round-trips and reports missing features") {
  AssetManifest m;
  m.base_dir = "/data";
  m.features["m/1"] = assets_with(10);
  m.features["m/1"].visualization = "viz.png";
  m.features["m/1"].images[0].crop = "crop0.png";
  const AssetManifest back = AssetManifest::parse(m.to_json(), "/data");
  CHECK(back.to_json() == m.to_json());
  CHECK(back.at("m/1").images.size() == 10);
  CHECK(back.resolve("a/b.png") == std::filesystem::path("/data/a/b.png"));
  CHECK(back.resolve("/abs.png") == std::filesystem::path("/abs.png"));
  CHECK_ERROR_CODE(back.at("m/2"), ErrorCode::kDependency);
  CHECK_ERROR_CODE(AssetManifest::parse("{\"x\": {\"images\": [{\"image\": \"a\"}]}}", "."), ErrorCode::kManifest);
  CHECK_ERROR_CODE(AssetManifest::parse("not json", "."), ErrorCode::kManifest);
}

TEST_CASE("duplicate panel images are a manifest error") {
  FeatureAssets fa = assets_with(10);
  fa.images[9].image = fa.images[8].image;
  CHECK_ERROR_CODE(assemble_panel(fa), ErrorCode::kManifest);
}
