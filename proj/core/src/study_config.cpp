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

#include "featscope/study_config.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <set>

#include "featscope/binary_io.hpp"
#include "featscope/error.hpp"

namespace featscope {

using nlohmann::json;

namespace {

template <typename T>
T required(const json& doc, const char* key) {
  if (!doc.contains(key)) fail(ErrorCode::kConfig, std::string("missing field '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("field '") + key + "': " + e.what());
  }
}

json entry_to_json(const AssetEntry& e) {
  json j{{"image", e.image}, {"heatmap", e.heatmap}, {"activation", e.activation},
         {"width", e.width}, {"height", e.height}};
  if (!e.crop.empty()) j["crop"] = e.crop;
  return j;
}

AssetEntry entry_from_json(const json& j) {
  AssetEntry e;
  e.image = j.at("image").get<std::string>();
  e.heatmap = j.at("heatmap").get<std::string>();
  e.activation = j.value("activation", 0.0);
  e.width = j.value("width", std::size_t{224});
  e.height = j.value("height", std::size_t{224});
  e.crop = j.value("crop", std::string());
  return e;
}

json parse_document(const std::filesystem::path& path) {
  json doc = json::parse(io::read_file(path), nullptr, false);
  if (doc.is_discarded()) fail(ErrorCode::kConfig, path.string() + " is not valid JSON");
  return doc;
}

}  // namespace

std::string to_string(Protocol p) { return p == Protocol::kNaming ? "naming" : "localization"; }

Protocol protocol_from_string(const std::string& s) {
  if (s == "localization") return Protocol::kLocalization;
  if (s == "naming") return Protocol::kNaming;
  fail(ErrorCode::kConfig, "unknown protocol '" + s + "'");
}

void StudyConfig::validate() const {
  if (study_id.empty()) fail(ErrorCode::kConfig, "study_id must be set");
  if (practice_trials.size() != 6) fail(ErrorCode::kConfig, "a study needs exactly 6 practice trials");
  if (catch_trials.size() != 4) fail(ErrorCode::kConfig, "a study needs exactly 4 catch trials");
  if (trials_per_participant < 1) fail(ErrorCode::kConfig, "trials_per_participant must be >= 1");
  if (practice_pass > practice_trials.size()) fail(ErrorCode::kConfig, "practice_pass exceeds the practice count");
  if (embedding_dim == 0) fail(ErrorCode::kConfig, "embedding_dim must be >= 1");
  if (smoothing_sigma && !(*smoothing_sigma > 0.0)) fail(ErrorCode::kConfig, "smoothing_sigma must be > 0");
  if (gateway.mode != "stub" && gateway.mode != "live") fail(ErrorCode::kConfig, "gateway.mode must be stub or live");
  std::set<std::string> seen;
  for (const auto& [model, features] : models) {
    for (const auto& f : features) {
      if (!seen.insert(f).second) fail(ErrorCode::kConfig, "feature " + f + " listed twice");
    }
  }
  if (seen.empty()) fail(ErrorCode::kConfig, "study lists no features");
}

std::vector<std::string> StudyConfig::all_features() const {
  std::vector<std::string> out;
  for (const auto& [_, features] : models) out.insert(out.end(), features.begin(), features.end());
  return out;
}

std::optional<std::string> StudyConfig::model_of(const std::string& feature_id) const {
  for (const auto& [model, features] : models) {
    if (std::find(features.begin(), features.end(), feature_id) != features.end()) return model;
  }
  return std::nullopt;
}

json StudyConfig::to_json() const {
  json j;
  j["v"] = 1;
  j["study_id"] = study_id;
  j["protocol"] = to_string(protocol);
  j["models"] = models;
  j["practice_trials"] = practice_trials;
  j["practice_pass"] = practice_pass;
  j["practice_threshold"] = practice_threshold;
  j["catch_trials"] = catch_trials;
  j["catch_threshold"] = catch_threshold;
  j["trials_per_participant"] = trials_per_participant;
  j["embedding_dim"] = embedding_dim;
  j["smoothing_sigma"] = smoothing_sigma ? json(*smoothing_sigma) : json(nullptr);
  j["crop_size"] = crop_size;
  j["seed"] = seed;
  j["trials_file"] = trials_file.generic_string();
  j["asset_root"] = asset_root.generic_string();
  j["gateway"] = {{"mode", gateway.mode},           {"host", gateway.host},
                  {"port", gateway.port},           {"timeout_ms", gateway.timeout_ms},
                  {"max_retries", gateway.max_retries}, {"max_in_flight", gateway.max_in_flight}};
  return j;
}

StudyConfig StudyConfig::from_json(const json& doc) {
  if (!doc.is_object()) fail(ErrorCode::kConfig, "study config must be a JSON object");
  if (doc.value("v", 0) != 1) fail(ErrorCode::kConfig, "study config needs schema version \"v\": 1");
  StudyConfig c;
  c.study_id = required<std::string>(doc, "study_id");
  c.protocol = protocol_from_string(required<std::string>(doc, "protocol"));
  c.models = required<std::map<std::string, std::vector<std::string>>>(doc, "models");
  c.practice_trials = required<std::vector<std::string>>(doc, "practice_trials");
  c.catch_trials = required<std::vector<std::string>>(doc, "catch_trials");
  c.trials_per_participant = required<std::size_t>(doc, "trials_per_participant");
  c.practice_pass = doc.value("practice_pass", c.practice_pass);
  c.practice_threshold = doc.value("practice_threshold", c.practice_threshold);
  c.catch_threshold = doc.value("catch_threshold", c.catch_threshold);
  c.embedding_dim = doc.value("embedding_dim", c.embedding_dim);
  if (doc.contains("smoothing_sigma") && !doc["smoothing_sigma"].is_null()) {
    c.smoothing_sigma = doc["smoothing_sigma"].get<double>();
  }
  c.crop_size = doc.value("crop_size", c.crop_size);
  c.seed = doc.value("seed", std::uint64_t{0});
  c.trials_file = doc.value("trials_file", std::string("trials.json"));
  c.asset_root = doc.value("asset_root", std::string("."));
  if (doc.contains("gateway")) {
    const auto& g = doc["gateway"];
    c.gateway.mode = g.value("mode", c.gateway.mode);
    c.gateway.host = g.value("host", c.gateway.host);
    c.gateway.port = g.value("port", c.gateway.port);
    c.gateway.timeout_ms = g.value("timeout_ms", c.gateway.timeout_ms);
    c.gateway.max_retries = g.value("max_retries", c.gateway.max_retries);
    c.gateway.max_in_flight = g.value("max_in_flight", c.gateway.max_in_flight);
  }
  c.validate();
  return c;
}

StudyConfig StudyConfig::load(const std::filesystem::path& path) {
  StudyConfig c = from_json(parse_document(path));
  c.base_dir = path.parent_path();
  return c;
}

void StudyConfig::save(const std::filesystem::path& path) const { io::write_file(path, to_json().dump(2) + "\n"); }

std::filesystem::path StudyConfig::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

json trial_to_json(const TrialSpec& t) {
  json j;
  j["trial_id"] = t.trial_id;
  j["kind"] = to_string(t.kind);
  j["model"] = t.model;
  j["feature_id"] = t.panel.feature_id;
  j["threshold"] = t.threshold;
  json panel;
  panel["visualization"] = t.panel.visualization ? json(*t.panel.visualization) : json(nullptr);
  panel["images"] = json::array();
  for (const auto& e : t.panel.items) panel["images"].push_back(entry_to_json(e));
  j["panel"] = std::move(panel);
  j["query"] = t.query ? entry_to_json(*t.query) : json(nullptr);
  return j;
}

TrialSpec trial_from_json(const json& j) {
  try {
    TrialSpec t;
    t.trial_id = j.at("trial_id").get<std::string>();
    t.kind = trial_kind_from_string(j.at("kind").get<std::string>());
    t.model = j.value("model", std::string());
    t.threshold = j.value("threshold", 0.0);
    t.panel.feature_id = j.at("feature_id").get<std::string>();
    const auto& panel = j.at("panel");
    if (panel.contains("visualization") && panel["visualization"].is_string()) {
      t.panel.visualization = panel["visualization"].get<std::string>();
    }
    t.panel.missing_visualization = !t.panel.visualization.has_value();
    const auto& images = panel.at("images");
    if (!images.is_array() || images.size() != 9) {
      fail(ErrorCode::kManifest, "trial " + t.trial_id + " panel must hold 9 images");
    }
    for (std::size_t i = 0; i < 9; ++i) t.panel.items[i] = entry_from_json(images[i]);
    if (j.contains("query") && !j["query"].is_null()) t.query = entry_from_json(j["query"]);
    validate_trial(t);
    return t;
  } catch (const json::exception& e) {
    fail(ErrorCode::kManifest, std::string("malformed trial: ") + e.what());
  }
}

json participant_view(const TrialSpec& t, const std::string& url_prefix) {
  json j;
  j["trial_id"] = t.trial_id;
  switch (t.kind) {
    case TrialKind::kPractice: j["kind"] = "practice"; break;
    case TrialKind::kNaming: j["kind"] = "naming"; break;
    default: j["kind"] = "localization"; break;
  }
  json panel;
  panel["visualization"] = t.panel.visualization ? json(url_prefix + *t.panel.visualization) : json(nullptr);
  panel["images"] = json::array();
  for (const auto& e : t.panel.items) {
    panel["images"].push_back({{"image", url_prefix + e.image}, {"heatmap", url_prefix + e.heatmap}});
  }
  j["panel"] = std::move(panel);
  j["query"] = t.query ? json{{"image", url_prefix + t.query->image}, {"width", t.query->width}, {"height", t.query->height}}
                       : json(nullptr);
  return j;
}

void TrialIndex::add(TrialSpec trial) {
  validate_trial(trial);
  const std::string id = trial.trial_id;
  if (trials_.count(id)) fail(ErrorCode::kConfig, "duplicate trial id " + id);
  if (trial.kind == TrialKind::kLocalization || trial.kind == TrialKind::kNaming) {
    if (!main_by_feature_.emplace(trial.feature_id(), id).second) {
      fail(ErrorCode::kConfig, "feature " + trial.feature_id() + " has two main trials");
    }
  }
  trials_.emplace(id, std::move(trial));
}

const TrialSpec* TrialIndex::find(const std::string& trial_id) const {
  auto it = trials_.find(trial_id);
  return it == trials_.end() ? nullptr : &it->second;
}

const TrialSpec& TrialIndex::at(const std::string& trial_id) const {
  const TrialSpec* t = find(trial_id);
  if (!t) fail(ErrorCode::kNotFound, "unknown trial " + trial_id);
  return *t;
}

const TrialSpec& TrialIndex::main_trial(const std::string& feature_id) const {
  auto it = main_by_feature_.find(feature_id);
  if (it == main_by_feature_.end()) fail(ErrorCode::kConfig, "no main trial for feature " + feature_id);
  return trials_.at(it->second);
}

json TrialIndex::to_json() const {
  json j;
  j["v"] = 1;
  j["trials"] = json::array();
  for (const auto& [_, t] : trials_) j["trials"].push_back(trial_to_json(t));
  return j;
}

TrialIndex TrialIndex::from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("trials") || !doc["trials"].is_array()) {
    fail(ErrorCode::kConfig, "trial index needs a trials array");
  }
  TrialIndex idx;
  for (const auto& t : doc["trials"]) idx.add(trial_from_json(t));
  return idx;
}

TrialIndex TrialIndex::load(const std::filesystem::path& path) { return from_json(parse_document(path)); }

void TrialIndex::save(const std::filesystem::path& path) const { io::write_file(path, to_json().dump(2) + "\n"); }

void validate_study(const StudyConfig& config, const TrialIndex& trials) {
  config.validate();
  const TrialKind main_kind = config.protocol == Protocol::kNaming ? TrialKind::kNaming : TrialKind::kLocalization;
  for (const auto& f : config.all_features()) {
    const auto& t = trials.main_trial(f);
    if (t.kind != main_kind) fail(ErrorCode::kConfig, "trial " + t.trial_id + " does not match the study protocol");
  }
  std::set<std::string> features;
  auto check = [&](const std::vector<std::string>& ids, TrialKind kind) {
    for (const auto& id : ids) {
      const TrialSpec* t = trials.find(id);
      if (!t) fail(ErrorCode::kConfig, "config references missing trial " + id);
      if (t->kind != kind) fail(ErrorCode::kConfig, "trial " + id + " has kind " + to_string(t->kind));
      if (!features.insert(t->feature_id()).second) {
        fail(ErrorCode::kConfig, "practice/catch trials reuse feature " + t->feature_id());
      }
    }
  };
  check(config.practice_trials, TrialKind::kPractice);
  check(config.catch_trials, TrialKind::kCatch);
  for (const auto& f : config.all_features()) {
    if (features.count(f)) fail(ErrorCode::kConfig, "feature " + f + " is both a study feature and a practice/catch feature");
  }
}

}  // namespace featscope
