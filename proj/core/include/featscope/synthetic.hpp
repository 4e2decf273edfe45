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
#include <string>
#include <vector>

#include "featscope/bootstrap.hpp"
#include "featscope/heatmap.hpp"
#include "featscope/matrix.hpp"
#include "featscope/metrics.hpp"
#include "featscope/study_config.hpp"
#include "featscope/study_service.hpp"

namespace featscope {

/// Samples that are non-negative combinations of exactly k of `atoms`
/// random unit directions.
struct DictionaryFixture {
  Matrix data;
  Matrix atoms;  // one unit row per ground-truth atom
};

DictionaryFixture make_dictionary_fixture(std::size_t atoms = 8, std::size_t dim = 16, std::size_t k = 2,
                                          std::size_t samples = 2048, std::uint64_t seed = 7);

/// Smooth separable cosine bump peaking at (cx, cy) plus tiny jitter, so all
/// values are distinct and their distribution is close to symmetric.
Heatmap make_pattern_heatmap(std::size_t width, std::size_t height, std::size_t cx, std::size_t cy,
                             std::uint64_t seed);

struct SyntheticStudyOptions {
  std::vector<std::string> models{"synthetic"};
  std::size_t study_features = 20;  // per model
  std::size_t dense_features = 0;   // per model, active on every token
  std::size_t images_per_feature = 10;
  std::size_t heatmap_size = 64;
  std::size_t tokens = 16;
  std::size_t trials_per_participant = 20;
  std::size_t per_image_m = 1;
  double dense_threshold = 0.5;
  Protocol protocol = Protocol::kLocalization;
  std::size_t per_bin = 2;  // naming: features drawn per localizability decile
  std::uint64_t seed = 1;
};

/// Writes a complete build-study workspace under `dir`: per-image ACT1
/// activations, an identity-like SAE and a probe per model, .hm1 heatmaps,
/// manifest.json and build.json (plus loc_scores.csv for naming). The first
/// model carries six practice and four catch features on top of its study
/// features. Returns the path of build.json.
std::filesystem::path write_synthetic_workspace(const std::filesystem::path& dir,
                                                const SyntheticStudyOptions& options);

struct PilotFixture {
  std::vector<double> unit_scores;  // population SD exactly sigma
  std::vector<PilotRecord> records;
  double sigma = 0.0;
};

/// `units` features whose true scores have SD sigma; each gets `images` x
/// `trials` responses with N(0, noise) added.
PilotFixture make_pilot(std::size_t units = 80, double sigma = 0.1, std::size_t images = 5, std::size_t trials = 3,
                        double noise = 0.15, std::uint64_t seed = 11);

struct ReportFixture {
  nlohmann::json localization_header;
  std::vector<ResponseRecord> localization;
  nlohmann::json naming_header;
  std::vector<ResponseRecord> naming;
  MetricTable metrics;
};

/// Scored responses for `models` synthetic models under both protocols plus
/// a per-model metric table. `constant_metric` adds a column with one value.
ReportFixture make_report_fixture(std::size_t models = 6, std::size_t features = 30, std::size_t responses = 3,
                                  std::uint64_t seed = 5, bool constant_metric = false);

}  // namespace featscope
