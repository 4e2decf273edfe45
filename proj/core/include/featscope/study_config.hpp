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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "featscope/stimulus.hpp"

namespace featscope {

enum class Protocol { kLocalization, kNaming };

std::string to_string(Protocol p);
Protocol protocol_from_string(const std::string& s);

struct GatewaySettings {
  std::string mode = "stub";  // "stub" | "live"
  std::string host;
  int port = 0;
  int timeout_ms = 2000;
  int max_retries = 2;
  std::size_t max_in_flight = 8;
};

/// One study, as a single JSON document with "v": 1. Relative paths resolve
/// against the document's directory.
struct StudyConfig {
  std::string study_id;
  Protocol protocol = Protocol::kLocalization;
  std::map<std::string, std::vector<std::string>> models;  // model -> feature ids
  std::vector<std::string> practice_trials;                 // exactly 6
  std::size_t practice_pass = 4;
  double practice_threshold = 0.5;
  std::vector<std::string> catch_trials;  // exactly 4
  double catch_threshold = 0.8;
  std::size_t trials_per_participant = 1;
  std::size_t embedding_dim = 512;
  std::optional<double> smoothing_sigma;  // heatmap pixels; default 2% of the diagonal
  std::size_t crop_size = 96;
  std::uint64_t seed = 0;
  std::filesystem::path trials_file = "trials.json";
  std::filesystem::path asset_root = ".";
  GatewaySettings gateway;

  /// Throws kConfig when an invariant is violated.
  void validate() const;

  std::vector<std::string> all_features() const;
  std::optional<std::string> model_of(const std::string& feature_id) const;

  nlohmann::json to_json() const;
  static StudyConfig from_json(const nlohmann::json& doc);
  static StudyConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Directory the config was loaded from (empty when built in memory).
  std::filesystem::path base_dir;
  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// All trials of a study keyed by id; main trials are also indexed by feature.
class TrialIndex {
 public:
  void add(TrialSpec trial);
  const TrialSpec& at(const std::string& trial_id) const;
  const TrialSpec* find(const std::string& trial_id) const;
  /// Main (localization or naming) trial for a feature.
  const TrialSpec& main_trial(const std::string& feature_id) const;
  const std::map<std::string, TrialSpec>& trials() const noexcept { return trials_; }

  nlohmann::json to_json() const;
  static TrialIndex from_json(const nlohmann::json& doc);
  static TrialIndex load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, TrialSpec> trials_;
  std::map<std::string, std::string> main_by_feature_;
};

nlohmann::json trial_to_json(const TrialSpec& t);
TrialSpec trial_from_json(const nlohmann::json& j);

/// Participant-facing payload: asset URLs under `url_prefix`, catch trials
/// presented as ordinary localization trials, no model or feature ids.
nlohmann::json participant_view(const TrialSpec& t, const std::string& url_prefix);

/// Checks config/trial-index consistency (every referenced trial exists, kinds
/// match, practice/catch features distinct).
void validate_study(const StudyConfig& config, const TrialIndex& trials);

}  // namespace featscope
