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

#include <algorithm>
#include <set>
#include <sstream>

#include "featscope/binary_io.hpp"
#include "featscope/cli/commands.hpp"
#include "featscope/error.hpp"
#include "featscope/probe.hpp"
#include "featscope/sae.hpp"
#include "featscope/stimulus.hpp"

namespace featscope::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct ModelInputs {
  std::string id;
  fs::path sae;
  fs::path probe;
  std::vector<fs::path> activations;
};

fs::path resolve(const fs::path& base, const std::string& ref) {
  fs::path p(ref);
  return p.is_absolute() ? p : base / p;
}

std::vector<ScoredFeature> read_scores_csv(const fs::path& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  std::getline(in, line);
  if (line.rfind("feature,score", 0) != 0) fail(ErrorCode::kData, path.string() + ": expected header feature,score");
  std::vector<ScoredFeature> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) fail(ErrorCode::kData, path.string() + ": malformed row '" + line + "'");
    out.push_back({line.substr(0, comma), std::stod(line.substr(comma + 1))});
  }
  return out;
}

std::uint32_t feature_index(const std::string& fid) {
  return static_cast<std::uint32_t>(std::stoul(fid.substr(fid.rfind('/') + 1)));
}

/// Rewrites manifest-relative refs so they resolve against the study's asset root.
FeatureAssets rebase(FeatureAssets a, const AssetManifest& manifest, const fs::path& asset_root) {
  auto move_ref = [&](std::string& ref) {
    if (ref.empty()) return;
    ref = fs::weakly_canonical(manifest.resolve(ref)).lexically_relative(asset_root).generic_string();
  };
  if (a.visualization) move_ref(*a.visualization);
  for (auto& e : a.images) {
    move_ref(e.image);
    move_ref(e.heatmap);
    move_ref(e.crop);
  }
  return a;
}

}  // namespace

RunManifest cmd_build_study(const CommandContext& ctx) {
  RunManifest m;
  m.command = "build-study";
  const json& c = ctx.config;
  const Protocol protocol = protocol_from_string(c.value("protocol", std::string("localization")));

  // Dependency check first, so one error lists everything that is missing.
  std::vector<std::string> missing;
  auto need = [&](const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) missing.push_back(what + " " + p.generic_string());
    m.inputs.push_back(p.generic_string());
  };
  if (!c.contains("models") || !c["models"].is_array() || c["models"].empty()) {
    fail(ErrorCode::kConfig, "config needs a non-empty 'models' list");
  }
  std::vector<ModelInputs> models;
  for (const auto& mj : c["models"]) {
    ModelInputs mi;
    mi.id = mj.at("id").get<std::string>();
    if (!mj.contains("sae")) missing.push_back("SAE checkpoint for model " + mi.id);
    else need(mi.sae = resolve(ctx.base_dir, mj["sae"].get<std::string>()), "SAE checkpoint");
    if (!mj.contains("probe")) missing.push_back("probe checkpoint for model " + mi.id);
    else need(mi.probe = resolve(ctx.base_dir, mj["probe"].get<std::string>()), "probe checkpoint");
    for (const auto& a : mj.value("activations", json::array())) {
      mi.activations.push_back(resolve(ctx.base_dir, a.get<std::string>()));
      need(mi.activations.back(), "activations");
    }
    if (mi.activations.empty()) missing.push_back("activation files for model " + mi.id);
    models.push_back(std::move(mi));
  }
  const auto manifest_path = ctx.optional_path("manifest");
  if (!manifest_path) missing.push_back("asset manifest");
  else need(*manifest_path, "asset manifest");
  const auto scores_path = ctx.optional_path("localizability_scores");
  if (protocol == Protocol::kNaming) {
    if (!scores_path) missing.push_back("localizability scores (decile input for a naming study)");
    else need(*scores_path, "localizability scores");
  }
  if (!missing.empty()) {
    std::string msg = "missing dependencies:";
    for (const auto& s : missing) msg += "\n  - " + s;
    fail(ErrorCode::kDependency, msg);
  }

  const AssetManifest manifest = AssetManifest::load(*manifest_path);
  const std::size_t per_image_m = c.value("per_image_m", std::size_t{1});
  const double dense_threshold = c.value("dense_threshold", 0.5);
  const std::uint64_t seed = ctx.seed_or(0);
  m.seeds["study"] = seed;

  json selection = json::object();
  std::vector<std::pair<std::string, std::string>> selected;  // (model, feature id)
  for (const auto& mi : models) {
    const SaeModel sae = io::load_sae(mi.sae);
    const LinearProbe probe = io::load_probe(mi.probe);
    ImportanceTable table;
    std::vector<ActivationMatrix> images;
    for (const auto& p : mi.activations) {
      images.push_back(io::load_activations(p));
      table.add_image(p.stem().string(), image_importance(images.back(), sae, probe));
    }
    const auto chosen = select_features_for_images(table, per_image_m);
    const auto keep = filter_dense(activation_frequency(sae, images), dense_threshold);
    std::size_t dense = 0;
    for (auto f : chosen) {
      if (!keep[f]) {
        ++dense;
        continue;
      }
      selected.emplace_back(mi.id, mi.id + "/" + std::to_string(f));
    }
    selection[mi.id] = {{"images", images.size()}, {"selected", chosen.size()}, {"dense_removed", dense}};
  }

  const auto practice = c.value("practice_features", std::vector<std::string>{});
  const auto catches = c.value("catch_features", std::vector<std::string>{});
  const std::set<std::string> reserved = [&] {
    std::set<std::string> s(practice.begin(), practice.end());
    s.insert(catches.begin(), catches.end());
    return s;
  }();
  std::erase_if(selected, [&](const auto& p) { return reserved.count(p.second) > 0; });

  if (protocol == Protocol::kNaming) {
    std::map<std::string, double> loc;
    for (const auto& s : read_scores_csv(*scores_path)) loc[s.id] = s.score;
    std::vector<ScoredFeature> pool;
    for (const auto& [_, fid] : selected) {
      if (auto it = loc.find(fid); it != loc.end()) pool.push_back({fid, it->second});
    }
    const auto sampled = decile_sample(pool, c.value("per_bin", std::size_t{5}), seed);
    const std::set<std::string> keep(sampled.begin(), sampled.end());
    std::erase_if(selected, [&](const auto& p) { return keep.count(p.second) == 0; });
  }

  std::vector<std::string> absent;
  for (const auto& [_, fid] : selected) {
    if (!manifest.features.count(fid)) absent.push_back(fid);
  }
  for (const auto& fid : reserved) {
    if (!manifest.features.count(fid)) absent.push_back(fid);
  }
  if (!absent.empty()) {
    std::string msg = "asset manifest lacks features:";
    for (const auto& f : absent) msg += " " + f;
    fail(ErrorCode::kDependency, msg);
  }
  if (selected.empty()) fail(ErrorCode::kData, "pipeline selected no study features");
  std::sort(selected.begin(), selected.end(), [](const auto& a, const auto& b) {
    return std::make_pair(a.first, feature_index(a.second)) < std::make_pair(b.first, feature_index(b.second));
  });

  fs::create_directories(ctx.out_dir);
  const fs::path asset_root = fs::weakly_canonical(ctx.optional_path("asset_root").value_or(ctx.base_dir));
  const fs::path out_abs = fs::weakly_canonical(ctx.out_dir);

  StudyConfig sc;
  sc.study_id = c.value("study_id", std::string("study"));
  sc.protocol = protocol;
  sc.trials_per_participant = c.value("trials_per_participant", selected.size());
  sc.practice_pass = c.value("practice_pass", sc.practice_pass);
  sc.practice_threshold = c.value("practice_threshold", sc.practice_threshold);
  sc.catch_threshold = c.value("catch_threshold", sc.catch_threshold);
  sc.embedding_dim = c.value("embedding_dim", sc.embedding_dim);
  if (c.contains("smoothing_sigma") && !c["smoothing_sigma"].is_null()) sc.smoothing_sigma = c["smoothing_sigma"].get<double>();
  sc.crop_size = c.value("crop_size", sc.crop_size);
  sc.seed = seed;
  sc.asset_root = asset_root.lexically_relative(out_abs);
  if (sc.asset_root.empty()) sc.asset_root = ".";
  if (c.contains("gateway")) {
    const auto& g = c["gateway"];
    sc.gateway.mode = g.value("mode", sc.gateway.mode);
    sc.gateway.host = g.value("host", sc.gateway.host);
    sc.gateway.port = g.value("port", sc.gateway.port);
    sc.gateway.timeout_ms = g.value("timeout_ms", sc.gateway.timeout_ms);
    sc.gateway.max_retries = g.value("max_retries", sc.gateway.max_retries);
  }

  TrialIndex trials;
  std::size_t next = 1;
  auto trial_id = [&] {
    char buf[16];
    std::snprintf(buf, sizeof buf, "t%04zu", next++);
    return std::string(buf);
  };
  auto assets_of = [&](const std::string& fid) { return rebase(manifest.at(fid), manifest, asset_root); };
  auto model_of = [&](const std::string& fid) {
    const auto& a = manifest.at(fid);
    return a.model.empty() ? fid.substr(0, fid.rfind('/')) : a.model;
  };
  for (const auto& fid : practice) {
    auto t = make_click_trial(trial_id(), TrialKind::kPractice, model_of(fid), assets_of(fid), sc.practice_threshold);
    sc.practice_trials.push_back(t.trial_id);
    trials.add(std::move(t));
  }
  for (const auto& fid : catches) {
    auto t = make_click_trial(trial_id(), TrialKind::kCatch, model_of(fid), assets_of(fid), sc.catch_threshold);
    sc.catch_trials.push_back(t.trial_id);
    trials.add(std::move(t));
  }
  for (const auto& [model, fid] : selected) {
    sc.models[model].push_back(fid);
    trials.add(protocol == Protocol::kNaming ? make_naming_trial(trial_id(), model, assets_of(fid))
                                             : make_click_trial(trial_id(), TrialKind::kLocalization, model, assets_of(fid)));
  }
  sc.validate();
  validate_study(sc, trials);

  const auto study_path = ctx.out_dir / "study.json";
  const auto trials_path = ctx.out_dir / "trials.json";
  const auto selection_path = ctx.out_dir / "selection.json";
  sc.save(study_path);
  trials.save(trials_path);
  io::write_file(selection_path, selection.dump(2) + "\n");
  for (const auto& p : {study_path, trials_path, selection_path}) m.add_output(ctx.out_dir, p);
  m.details["features"] = selected.size();
  m.details["selection"] = selection;
  ctx.note("study " + sc.study_id + ": " + std::to_string(selected.size()) + " features");
  return m;
}

}  // namespace featscope::cli
