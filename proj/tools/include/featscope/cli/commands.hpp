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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "featscope/stats.hpp"
#include "featscope/study_config.hpp"
#include "featscope/study_service.hpp"

namespace featscope::cli {

/// Provenance record written as run_manifest.json by every command.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::map<std::string, std::uint64_t> seeds;
  std::vector<std::string> inputs;
  std::map<std::string, std::string> outputs;  // path relative to --out -> sha256
  std::vector<std::string> warnings;
  double duration_s = 0.0;
  nlohmann::json details = nlohmann::json::object();

  void add_output(const std::filesystem::path& out_dir, const std::filesystem::path& file);
  nlohmann::json to_json() const;
  void write(const std::filesystem::path& out_dir) const;
};

/// Everything a command needs: the merged JSON config (file plus flag
/// overrides), the directory relative config paths resolve against, and the
/// global flags.
struct CommandContext {
  nlohmann::json config = nlohmann::json::object();
  std::filesystem::path config_path;
  std::filesystem::path base_dir = ".";
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir = ".";
  std::ostream* log = nullptr;

  std::filesystem::path path(const std::string& key) const;
  std::optional<std::filesystem::path> optional_path(const std::string& key) const;
  std::uint64_t seed_or(std::uint64_t fallback) const;
  void note(const std::string& line) const;
};

/// Loads a "v": 1 JSON config; kConfig on schema problems, kIo if unreadable.
nlohmann::json load_config(const std::filesystem::path& path);

RunManifest cmd_train_sae(const CommandContext& ctx);
RunManifest cmd_build_study(const CommandContext& ctx);
RunManifest cmd_serve(const CommandContext& ctx);
RunManifest cmd_simulate(const CommandContext& ctx);
RunManifest cmd_score(const CommandContext& ctx);
RunManifest cmd_report(const CommandContext& ctx);
RunManifest cmd_gates(const CommandContext& ctx);
RunManifest cmd_make_fixture(const CommandContext& ctx);

/// Loaded study: config plus trial index (from the config's trials_file).
struct LoadedStudy {
  StudyConfig config;
  TrialIndex trials;
};
LoadedStudy load_study(const std::filesystem::path& study_json);

/// Embedder selected by the study's gateway settings. Live mode without a
/// host/port is a kConfig error, as is an unreachable endpoint when
/// `require_reachable` is set.
std::shared_ptr<Embedder> make_embedder(const StudyConfig& config, bool require_reachable = false);

/// Main-trial scores for the export's protocol: scorable, resolved
/// localization or naming responses.
std::vector<ResponseScore> main_scores(const std::vector<ResponseRecord>& records);

enum class RaterKind { kArgmax, kRandom, kMeanClick, kTemplateNamer };
std::string to_string(RaterKind r);
RaterKind rater_from_string(const std::string& s);

struct SimulationOptions {
  std::filesystem::path study;
  RaterKind rater = RaterKind::kArgmax;
  std::size_t participants = 20;
  std::uint64_t seed = 0;
  std::int64_t think_min_ms = 2000;
  std::int64_t think_max_ms = 8000;
  std::filesystem::path log;  // empty: in memory
};

struct SimulationResult {
  std::string export_all;
  std::string export_included;  // empty when gates are undefined
  std::optional<QualityGateReport> gates;
  std::vector<ResponseRecord> responses;
  nlohmann::json snapshot;
  std::size_t http_requests = 0;
};

/// Runs scripted raters through the real HTTP API of an in-process server,
/// one participant after another, on a simulated clock.
SimulationResult simulate_study(const SimulationOptions& options);

/// Parses argv, dispatches a verb and maps errors to exit codes:
/// 0 success, 1 validation/config, 2 I/O, 3 internal.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace featscope::cli
