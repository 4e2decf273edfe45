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

#include <chrono>
#include <iostream>

#include "featscope/binary_io.hpp"
#include "featscope/checksum.hpp"
#include "featscope/cli/commands.hpp"
#include "featscope/embedding.hpp"
#include "featscope/error.hpp"

namespace featscope::cli {

using nlohmann::json;

void RunManifest::add_output(const std::filesystem::path& out_dir, const std::filesystem::path& file) {
  outputs[file.lexically_relative(out_dir).generic_string()] = sha256_file(file);
}

json RunManifest::to_json() const {
  return {{"v", 1},
          {"command", command},
          {"config_path", config_path},
          {"seeds", seeds},
          {"inputs", inputs},
          {"outputs", outputs},
          {"warnings", warnings},
          {"duration_s", duration_s},
          {"details", details}};
}

void RunManifest::write(const std::filesystem::path& out_dir) const {
  io::write_file(out_dir / "run_manifest.json", to_json().dump(2) + "\n");
}

std::filesystem::path CommandContext::path(const std::string& key) const {
  auto p = optional_path(key);
  if (!p) fail(ErrorCode::kConfig, "config needs '" + key + "'");
  return *p;
}

std::optional<std::filesystem::path> CommandContext::optional_path(const std::string& key) const {
  if (!config.contains(key) || config[key].is_null()) return std::nullopt;
  if (!config[key].is_string()) fail(ErrorCode::kConfig, "'" + key + "' must be a path string");
  std::filesystem::path p(config[key].get<std::string>());
  return p.is_absolute() ? p : base_dir / p;
}

std::uint64_t CommandContext::seed_or(std::uint64_t fallback) const {
  if (seed) return *seed;
  if (config.contains("seed")) return config["seed"].get<std::uint64_t>();
  return fallback;
}

void CommandContext::note(const std::string& line) const {
  if (log) *log << line << '\n';
}

json load_config(const std::filesystem::path& path) {
  json doc = json::parse(io::read_file(path), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) fail(ErrorCode::kConfig, path.string() + " is not a JSON object");
  if (!doc.contains("v") || doc["v"] != 1) fail(ErrorCode::kConfig, path.string() + " needs schema version \"v\": 1");
  return doc;
}

LoadedStudy load_study(const std::filesystem::path& study_json) {
  LoadedStudy s{StudyConfig::load(study_json), {}};
  s.trials = TrialIndex::load(s.config.resolve(s.config.trials_file));
  validate_study(s.config, s.trials);
  return s;
}

std::shared_ptr<Embedder> make_embedder(const StudyConfig& config, bool require_reachable) {
  if (config.gateway.mode == "stub") return make_stub_embedder(config.embedding_dim, config.seed);
  if (config.gateway.host.empty() || config.gateway.port <= 0) {
    fail(ErrorCode::kConfig, "live embedding gateway required but no host/port is configured");
  }
  GatewayConfig g;
  g.host = config.gateway.host;
  g.port = config.gateway.port;
  g.dim = config.embedding_dim;
  g.timeout = std::chrono::milliseconds(config.gateway.timeout_ms);
  g.max_retries = config.gateway.max_retries;
  g.max_in_flight = config.gateway.max_in_flight;
  auto e = std::make_shared<HttpEmbedder>(g);
  if (require_reachable) {
    try {
      e->embed_text("ping");
    } catch (const Error& err) {
      if (err.code() != ErrorCode::kGateway) throw;
      fail(ErrorCode::kConfig, "live embedding gateway required but absent: " + std::string(err.what()));
    }
  }
  return e;
}

std::vector<ResponseScore> main_scores(const std::vector<ResponseRecord>& records) {
  std::vector<ResponseScore> out;
  for (const auto& r : records) {
    if (r.kind != TrialKind::kLocalization && r.kind != TrialKind::kNaming) continue;
    if (!r.score || r.pending) continue;
    ResponseScore s{r.model, r.feature_id, *r.score, std::nullopt};
    if (r.kind == TrialKind::kNaming) s.confidence = r.payload.confidence;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace featscope::cli
