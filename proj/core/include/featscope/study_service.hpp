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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "featscope/embedding.hpp"
#include "featscope/gates.hpp"
#include "featscope/heatmap.hpp"
#include "featscope/response_log.hpp"
#include "featscope/scoring.hpp"
#include "featscope/study_config.hpp"

namespace featscope {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() const = 0;
};

class SystemClock final : public Clock {
 public:
  std::int64_t now_ms() const override;
};

/// Clock driven by the caller; used by tests and the rater simulator.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(std::int64_t start_ms = 0) : now_(start_ms) {}
  std::int64_t now_ms() const override { return now_.load(); }
  void set(std::int64_t ms) { now_.store(ms); }
  void advance(std::int64_t ms) { now_.fetch_add(ms); }

 private:
  std::atomic<std::int64_t> now_;
};

enum class SessionState { kRegistered, kPractice, kMain, kCompleted, kExcluded };

std::string to_string(SessionState s);
SessionState session_state_from_string(const std::string& s);

struct ParticipantSession {
  std::string session_id;
  std::string participant_id;
  std::string study_id;
  SessionState state = SessionState::kRegistered;
  std::string exclusion_reason;
  std::size_t practice_correct = 0;
  std::size_t practice_answered = 0;
  std::size_t catch_correct = 0;
  std::size_t catch_answered = 0;
  std::size_t block_length = 0;  // main-block positions, catch trials included
  std::size_t block_served = 0;
  std::vector<std::string> served;  // trial ids in serving order
  std::set<std::string> served_features;
  std::optional<std::string> pending;  // served but unanswered
  std::size_t answered = 0;
  std::int64_t start_ms = 0;
  std::optional<std::int64_t> end_ms;

  bool active() const { return state == SessionState::kPractice || state == SessionState::kMain; }
  nlohmann::json to_json() const;
};

struct ResponsePayload {
  std::optional<Click> click;
  std::string text;
  int confidence = 0;

  /// {"click":{"x","y"}} or {"text","confidence"}; anything else is kValidation.
  static ResponsePayload from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct ResponseRecord {
  std::string response_id;
  std::string session_id;
  std::string participant_id;
  std::string trial_id;
  std::string feature_id;
  std::string model;
  TrialKind kind = TrialKind::kLocalization;
  std::size_t seq_in_session = 0;
  ResponsePayload payload;
  std::optional<double> score;
  bool scorable = true;
  bool pending = false;
  std::optional<bool> correct;  // practice and catch trials
  std::int64_t received_ms = 0;
  std::string idempotency_key;

  nlohmann::json to_json() const;
  static ResponseRecord from_json(const nlohmann::json& j);
};

struct ScoreOutcome {
  std::optional<double> score;
  bool scorable = true;
  bool pending = false;
  std::string note;  // error text when unscorable or pending
};

/// Scores responses against the study's assets. Shared by the online service
/// and offline rescoring so both produce identical numbers. Heatmaps are
/// loaded and smoothed once; crop embeddings are computed once per trial.
class TrialScorer {
 public:
  TrialScorer(StudyConfig config, std::shared_ptr<Embedder> embedder);

  const StudyConfig& config() const noexcept { return config_; }
  std::filesystem::path asset_path(const std::string& ref) const;

  std::shared_ptr<const Heatmap> smoothed(const std::string& heatmap_ref);
  LocalizabilityResult localize(const TrialSpec& trial, Click click);
  NameabilityResult name(const TrialSpec& trial, const std::string& text);

  /// Bytes sent to the embedder for a panel image: the asset's crop file if
  /// present, otherwise a descriptor naming the image and the crop box.
  std::string crop_payload(const AssetEntry& entry);
  std::vector<EmbeddingVector> crop_embeddings(const TrialSpec& trial);

  /// Degenerate assets make a response unscorable; gateway failures leave a
  /// naming response pending.
  ScoreOutcome score(const TrialSpec& trial, const ResponsePayload& payload);

 private:
  StudyConfig config_;
  std::shared_ptr<Embedder> embedder_;
  std::filesystem::path root_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const Heatmap>> heatmaps_;
  std::map<std::string, std::vector<EmbeddingVector>> crops_;
};

struct NextTrial {
  SessionState state = SessionState::kPractice;
  std::string reason;  // exclusion reason
  std::optional<TrialSpec> trial;
};

/// Event-sourced study server. Every mutation is a log event; the in-memory
/// state is the fold of the log, so replaying any prefix of the log rebuilds
/// the state reached at that point.
class StudyService {
 public:
  /// When `log_path` names an existing log, its events are replayed first and
  /// new events are appended to it. `scorer` may be null for read-only use.
  StudyService(StudyConfig config, TrialIndex trials, std::shared_ptr<TrialScorer> scorer,
               std::shared_ptr<const Clock> clock, std::filesystem::path log_path = {});

  /// In-memory service rebuilt from `events` (no scorer).
  static std::unique_ptr<StudyService> replay(StudyConfig config, TrialIndex trials,
                                              const std::vector<nlohmann::json>& events);

  const StudyConfig& config() const noexcept { return config_; }
  const TrialIndex& trials() const noexcept { return trials_; }
  const std::string& study_id() const noexcept { return config_.study_id; }

  ParticipantSession create_session(const std::string& participant_id, const std::string& study_id);
  ParticipantSession create_session(const std::string& participant_id) {
    return create_session(participant_id, config_.study_id);
  }
  NextTrial next_trial(const std::string& session_id);
  ResponseRecord submit_response(const std::string& session_id, const std::string& trial_id,
                                 const ResponsePayload& payload, const std::string& idempotency_key = {});
  /// Retries pending naming scores; returns how many were resolved.
  std::size_t process_deferred();

  QualityGateReport apply_quality_gates() const;
  /// JSON lines: a header (study, protocol, gate report) then responses ordered
  /// by session id and position within the session.
  std::string export_results(bool included_only) const;

  bool has_session(const std::string& session_id) const;
  ParticipantSession session(const std::string& session_id) const;
  std::vector<ParticipantSession> sessions() const;
  std::vector<ResponseRecord> responses() const;
  std::map<std::string, std::size_t> served_counts() const;
  std::vector<nlohmann::json> events() const { return log_.events(); }
  nlohmann::json snapshot_json() const;

 private:
  struct SessionSlot {
    ParticipantSession session;
    std::mutex mu;  // serializes mutations of this session
  };

  SessionSlot& slot(const std::string& session_id);
  std::int64_t now() const;
  void append(nlohmann::json event);
  void apply(const nlohmann::json& event);
  std::string pick_feature(const ParticipantSession& s) const;
  std::size_t main_pool_size() const;
  bool is_catch_position(std::size_t block_length, std::size_t position, std::size_t* catch_index) const;
  NextTrial serve(const ParticipantSession& s, const std::string& trial_id);

  StudyConfig config_;
  TrialIndex trials_;
  std::shared_ptr<TrialScorer> scorer_;
  std::shared_ptr<const Clock> clock_;
  ResponseLog log_;

  std::mutex id_mu_;  // held while a new session or response id is claimed
  mutable std::shared_mutex state_mu_;
  std::map<std::string, std::unique_ptr<SessionSlot>> sessions_;
  std::map<std::string, std::size_t> served_counts_;
  std::vector<ResponseRecord> responses_;
  std::map<std::string, std::size_t> response_index_;
  std::size_t next_session_ = 1;
  std::size_t next_response_ = 1;
};

/// Rescores exported response lines with `scorer`; returns the lines with
/// "score", "scorable" and "pending" recomputed. A record whose trial or
/// feature does not match the trial index is a kIntegrity error.
std::vector<ResponseRecord> rescore(const std::vector<ResponseRecord>& records, const TrialIndex& trials,
                                    TrialScorer& scorer);

struct ExportData {
  nlohmann::json header;
  std::vector<ResponseRecord> records;
};

ExportData parse_export(const std::string& jsonl);
/// Header line followed by one line per record, in the order given.
std::string format_export(const nlohmann::json& header, const std::vector<ResponseRecord>& records);

}  // namespace featscope
