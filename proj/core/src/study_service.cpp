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

#include "featscope/study_service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "featscope/binary_io.hpp"
#include "featscope/error.hpp"
#include "featscope/rng.hpp"
#include "featscope/stimulus.hpp"

namespace featscope {

using nlohmann::json;

namespace {

std::string numbered(char prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%06zu", prefix, n);
  return buf;
}

bool is_main_kind(TrialKind k) { return k == TrialKind::kLocalization || k == TrialKind::kNaming; }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::int64_t SystemClock::now_ms() const {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string to_string(SessionState s) {
  switch (s) {
    case SessionState::kRegistered: return "registered";
    case SessionState::kPractice: return "practice";
    case SessionState::kMain: return "main";
    case SessionState::kCompleted: return "completed";
    case SessionState::kExcluded: return "excluded";
  }
  return "unknown";
}

SessionState session_state_from_string(const std::string& s) {
  for (auto st : {SessionState::kRegistered, SessionState::kPractice, SessionState::kMain,
                  SessionState::kCompleted, SessionState::kExcluded}) {
    if (to_string(st) == s) return st;
  }
  fail(ErrorCode::kData, "unknown session state '" + s + "'");
}

json ParticipantSession::to_json() const {
  return {{"session_id", session_id},
          {"participant_id", participant_id},
          {"study_id", study_id},
          {"state", to_string(state)},
          {"exclusion_reason", exclusion_reason},
          {"practice_correct", practice_correct},
          {"practice_answered", practice_answered},
          {"catch_correct", catch_correct},
          {"catch_answered", catch_answered},
          {"block_length", block_length},
          {"block_served", block_served},
          {"served", served},
          {"pending", pending ? json(*pending) : json(nullptr)},
          {"answered", answered},
          {"start_ms", start_ms},
          {"end_ms", end_ms ? json(*end_ms) : json(nullptr)}};
}

ResponsePayload ResponsePayload::from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::kValidation, "response body must be a JSON object");
  const bool has_click = j.contains("click");
  const bool has_text = j.contains("text") || j.contains("confidence");
  if (has_click == has_text) fail(ErrorCode::kValidation, "response needs either click or text+confidence");
  ResponsePayload p;
  if (has_click) {
    const auto& c = j["click"];
    if (!c.is_object() || !c.contains("x") || !c.contains("y") || !c["x"].is_number() || !c["y"].is_number()) {
      fail(ErrorCode::kValidation, "click needs numeric x and y");
    }
    p.click = Click{c["x"].get<double>(), c["y"].get<double>()};
    return p;
  }
  if (!j.contains("text") || !j["text"].is_string()) fail(ErrorCode::kValidation, "text must be a string");
  if (!j.contains("confidence") || !j["confidence"].is_number_integer()) {
    fail(ErrorCode::kValidation, "confidence must be an integer");
  }
  p.text = j["text"].get<std::string>();
  p.confidence = j["confidence"].get<int>();
  return p;
}

json ResponsePayload::to_json() const {
  if (click) return {{"click", {{"x", click->x}, {"y", click->y}}}};
  return {{"text", text}, {"confidence", confidence}};
}

json ResponseRecord::to_json() const {
  json j{{"response_id", response_id},
         {"session_id", session_id},
         {"participant_id", participant_id},
         {"trial_id", trial_id},
         {"feature_id", feature_id},
         {"model", model},
         {"kind", featscope::to_string(kind)},
         {"seq_in_session", seq_in_session},
         {"received_ms", received_ms},
         {"score", optional_json(score)},
         {"scorable", scorable},
         {"pending", pending},
         {"correct", correct ? json(*correct) : json(nullptr)}};
  j.update(payload.to_json());
  if (!idempotency_key.empty()) j["idempotency_key"] = idempotency_key;
  return j;
}

ResponseRecord ResponseRecord::from_json(const json& j) {
  try {
    ResponseRecord r;
    r.response_id = j.at("response_id").get<std::string>();
    r.session_id = j.at("session_id").get<std::string>();
    r.participant_id = j.value("participant_id", std::string());
    r.trial_id = j.at("trial_id").get<std::string>();
    r.feature_id = j.at("feature_id").get<std::string>();
    r.model = j.value("model", std::string());
    r.kind = trial_kind_from_string(j.at("kind").get<std::string>());
    r.seq_in_session = j.at("seq_in_session").get<std::size_t>();
    r.received_ms = j.value("received_ms", std::int64_t{0});
    if (!j.at("score").is_null()) r.score = j["score"].get<double>();
    r.scorable = j.at("scorable").get<bool>();
    r.pending = j.at("pending").get<bool>();
    if (j.contains("correct") && !j["correct"].is_null()) r.correct = j["correct"].get<bool>();
    r.idempotency_key = j.value("idempotency_key", std::string());
    json payload;
    if (j.contains("click")) payload["click"] = j["click"];
    if (j.contains("text")) payload["text"] = j["text"];
    if (j.contains("confidence")) payload["confidence"] = j["confidence"];
    r.payload = ResponsePayload::from_json(payload);
    return r;
  } catch (const json::exception& e) {
    fail(ErrorCode::kData, std::string("malformed response record: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

TrialScorer::TrialScorer(StudyConfig config, std::shared_ptr<Embedder> embedder)
    : config_(std::move(config)), embedder_(std::move(embedder)), root_(config_.resolve(config_.asset_root)) {}

std::filesystem::path TrialScorer::asset_path(const std::string& ref) const {
  std::filesystem::path p(ref);
  return p.is_absolute() ? p : root_ / p;
}

std::shared_ptr<const Heatmap> TrialScorer::smoothed(const std::string& heatmap_ref) {
  {
    std::lock_guard lock(mu_);
    if (auto it = heatmaps_.find(heatmap_ref); it != heatmaps_.end()) return it->second;
  }
  Heatmap raw = io::load_heatmap(asset_path(heatmap_ref));
  const double sigma = config_.smoothing_sigma.value_or(default_sigma(raw));
  auto h = std::make_shared<const Heatmap>(smooth_heatmap(raw, sigma));
  std::lock_guard lock(mu_);
  return heatmaps_.emplace(heatmap_ref, std::move(h)).first->second;
}

LocalizabilityResult TrialScorer::localize(const TrialSpec& trial, Click click) {
  if (!trial.query) fail(ErrorCode::kProtocol, "trial " + trial.trial_id + " has no query image");
  return localizability_score(*smoothed(trial.query->heatmap), click);
}

std::string TrialScorer::crop_payload(const AssetEntry& entry) {
  if (!entry.crop.empty()) return io::read_file(asset_path(entry.crop));
  const Box b = peak_crop_box(*smoothed(entry.heatmap), entry.width, entry.height, config_.crop_size);
  std::ostringstream out;
  out << "crop:" << entry.image << '@' << b.left << ',' << b.top << ',' << b.width << ',' << b.height;
  return out.str();
}

std::vector<EmbeddingVector> TrialScorer::crop_embeddings(const TrialSpec& trial) {
  {
    std::lock_guard lock(mu_);
    if (auto it = crops_.find(trial.trial_id); it != crops_.end()) return it->second;
  }
  if (!embedder_) fail(ErrorCode::kConfig, "naming scores need an embedder");
  std::vector<EmbedRequest> requests;
  for (const auto& e : trial.panel.items) requests.push_back({EmbedKind::kImage, crop_payload(e)});
  auto vectors = embedder_->embed_many(requests);
  std::lock_guard lock(mu_);
  return crops_.emplace(trial.trial_id, std::move(vectors)).first->second;
}

NameabilityResult TrialScorer::name(const TrialSpec& trial, const std::string& text) {
  if (!embedder_) fail(ErrorCode::kConfig, "naming scores need an embedder");
  const auto crops = crop_embeddings(trial);
  const auto t = embedder_->embed_text(text);
  return nameability_score(t, crops);
}

ScoreOutcome TrialScorer::score(const TrialSpec& trial, const ResponsePayload& payload) {
  ScoreOutcome out;
  try {
    if (trial.is_click_trial()) {
      if (!payload.click) fail(ErrorCode::kValidation, "trial " + trial.trial_id + " expects a click");
      out.score = localize(trial, *payload.click).score;
    } else {
      if (payload.click) fail(ErrorCode::kValidation, "trial " + trial.trial_id + " expects text");
      out.score = name(trial, payload.text).score;
    }
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::kDegenerateHeatmap:
      case ErrorCode::kUndefinedSimilarity:
        out.scorable = false;
        out.note = e.what();
        break;
      case ErrorCode::kGateway:
        out.pending = true;
        out.note = e.what();
        break;
      default:
        throw;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

StudyService::StudyService(StudyConfig config, TrialIndex trials, std::shared_ptr<TrialScorer> scorer,
                           std::shared_ptr<const Clock> clock, std::filesystem::path log_path)
    : config_(std::move(config)),
      trials_(std::move(trials)),
      scorer_(std::move(scorer)),
      clock_(clock ? std::move(clock) : std::make_shared<SystemClock>()),
      log_(log_path) {
  validate_study(config_, trials_);
  if (!log_path.empty()) {
    auto existing = ResponseLog::read(log_path);
    for (const auto& e : existing) apply(e);
    log_.adopt(std::move(existing));
  }
}

std::unique_ptr<StudyService> StudyService::replay(StudyConfig config, TrialIndex trials,
                                                   const std::vector<json>& events) {
  auto svc = std::make_unique<StudyService>(std::move(config), std::move(trials), nullptr,
                                            std::make_shared<ManualClock>());
  for (const auto& e : events) svc->apply(e);
  svc->log_.adopt(events);
  return svc;
}

std::int64_t StudyService::now() const { return clock_->now_ms(); }

void StudyService::append(json event) {
  event["t_ms"] = now();
  log_.append(std::move(event), [this](const json& e) { apply(e); });
}

StudyService::SessionSlot& StudyService::slot(const std::string& session_id) {
  std::shared_lock lock(state_mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) fail(ErrorCode::kNotFound, "unknown session " + session_id);
  return *it->second;
}

void StudyService::apply(const json& e) {
  std::unique_lock lock(state_mu_);
  const std::string type = e.at("type").get<std::string>();
  const std::int64_t t = e.at("t_ms").get<std::int64_t>();
  if (type == "session_created") {
    auto sl = std::make_unique<SessionSlot>();
    auto& s = sl->session;
    s.session_id = e.at("session_id").get<std::string>();
    s.participant_id = e.at("participant_id").get<std::string>();
    s.study_id = e.at("study_id").get<std::string>();
    s.state = SessionState::kPractice;
    s.start_ms = t;
    if (sessions_.count(s.session_id)) fail(ErrorCode::kData, "session " + s.session_id + " created twice");
    sessions_.emplace(s.session_id, std::move(sl));
    ++next_session_;
    return;
  }
  if (type == "deferred_score") {
    const auto id = e.at("response_id").get<std::string>();
    auto it = response_index_.find(id);
    if (it == response_index_.end()) fail(ErrorCode::kData, "deferred score for unknown response " + id);
    auto& r = responses_[it->second];
    r.pending = false;
    r.scorable = e.at("scorable").get<bool>();
    if (!e.at("score").is_null()) r.score = e["score"].get<double>();
    return;
  }
  auto it = sessions_.find(e.at("session_id").get<std::string>());
  if (it == sessions_.end()) fail(ErrorCode::kData, "event for unknown session in " + type);
  auto& s = it->second->session;
  if (type == "trial_served") {
    const auto trial_id = e.at("trial_id").get<std::string>();
    const auto feature = e.at("feature_id").get<std::string>();
    const auto kind = trial_kind_from_string(e.at("kind").get<std::string>());
    if (s.pending) fail(ErrorCode::kData, "trial served while another is pending");
    if (!s.served_features.insert(feature).second) fail(ErrorCode::kData, "feature " + feature + " served twice");
    s.served.push_back(trial_id);
    s.pending = trial_id;
    if (s.state == SessionState::kMain) ++s.block_served;
    if (is_main_kind(kind)) ++served_counts_[feature];
  } else if (type == "response") {
    ResponseRecord r = ResponseRecord::from_json(e);
    if (!s.pending || *s.pending != r.trial_id) fail(ErrorCode::kData, "response to unserved trial " + r.trial_id);
    s.pending.reset();
    ++s.answered;
    if (r.kind == TrialKind::kPractice) {
      ++s.practice_answered;
      if (r.correct.value_or(false)) ++s.practice_correct;
    } else if (r.kind == TrialKind::kCatch) {
      ++s.catch_answered;
      if (r.correct.value_or(false)) ++s.catch_correct;
    }
    response_index_[r.response_id] = responses_.size();
    responses_.push_back(std::move(r));
    ++next_response_;
  } else if (type == "state") {
    const auto next = session_state_from_string(e.at("state").get<std::string>());
    if (static_cast<int>(next) <= static_cast<int>(s.state) || s.state == SessionState::kCompleted ||
        s.state == SessionState::kExcluded) {
      fail(ErrorCode::kInternal, "backward state transition for " + s.session_id);
    }
    s.state = next;
    s.exclusion_reason = e.value("reason", std::string());
    if (next == SessionState::kMain) s.block_length = e.at("block_length").get<std::size_t>();
    if (next == SessionState::kCompleted || next == SessionState::kExcluded) s.end_ms = t;
  } else {
    fail(ErrorCode::kData, "unknown event type '" + type + "'");
  }
}

ParticipantSession StudyService::create_session(const std::string& participant_id, const std::string& study_id) {
  if (study_id != config_.study_id) fail(ErrorCode::kNotFound, "unknown study " + study_id);
  if (participant_id.empty()) fail(ErrorCode::kValidation, "participant id must not be empty");
  std::lock_guard guard(id_mu_);
  std::string id;
  {
    std::shared_lock lock(state_mu_);
    for (const auto& [_, sl] : sessions_) {
      if (sl->session.participant_id == participant_id && sl->session.active()) {
        fail(ErrorCode::kConflict, "participant " + participant_id + " already has an active session");
      }
    }
    id = numbered('s', next_session_);
  }
  append({{"type", "session_created"},
          {"session_id", id},
          {"participant_id", participant_id},
          {"study_id", study_id}});
  return session(id);
}

std::size_t StudyService::main_pool_size() const {
  std::set<std::string> reserved;
  for (const auto& ids : {config_.practice_trials, config_.catch_trials}) {
    for (const auto& id : ids) reserved.insert(trials_.at(id).feature_id());
  }
  std::size_t n = 0;
  for (const auto& f : config_.all_features()) n += reserved.count(f) ? 0 : 1;
  return n;
}

bool StudyService::is_catch_position(std::size_t block_length, std::size_t position,
                                     std::size_t* catch_index) const {
  const std::size_t c = config_.catch_trials.size();
  for (std::size_t i = 0; i < c; ++i) {
    if ((i + 1) * (block_length + 1) / (c + 1) - 1 == position) {
      if (catch_index) *catch_index = i;
      return true;
    }
  }
  return false;
}

std::string StudyService::pick_feature(const ParticipantSession& s) const {
  std::vector<std::string> minima;
  std::size_t best = 0;
  {
    std::shared_lock lock(state_mu_);
    for (const auto& f : config_.all_features()) {
      if (s.served_features.count(f)) continue;
      auto it = served_counts_.find(f);
      const std::size_t n = it == served_counts_.end() ? 0 : it->second;
      if (minima.empty() || n < best) {
        minima.assign(1, f);
        best = n;
      } else if (n == best) {
        minima.push_back(f);
      }
    }
  }
  if (minima.empty()) fail(ErrorCode::kInternal, "no eligible feature left for " + s.session_id);
  std::sort(minima.begin(), minima.end());
  Rng rng(mix_seed(mix_seed(config_.seed, fnv1a64(s.session_id)), s.block_served));
  return minima[rng.uniform_index(minima.size())];
}

NextTrial StudyService::serve(const ParticipantSession& s, const std::string& trial_id) {
  const TrialSpec& t = trials_.at(trial_id);
  append({{"type", "trial_served"},
          {"session_id", s.session_id},
          {"trial_id", trial_id},
          {"feature_id", t.feature_id()},
          {"kind", to_string(t.kind)}});
  return NextTrial{s.state, {}, t};
}

NextTrial StudyService::next_trial(const std::string& session_id) {
  auto& sl = slot(session_id);
  std::lock_guard guard(sl.mu);
  auto snapshot = [&] {
    std::shared_lock lock(state_mu_);
    return sl.session;
  };
  ParticipantSession s = snapshot();
  if (!s.active()) fail(ErrorCode::kState, "session " + session_id + " is " + to_string(s.state));
  if (s.pending) return NextTrial{s.state, {}, trials_.at(*s.pending)};

  if (s.state == SessionState::kPractice) {
    if (s.served.size() < config_.practice_trials.size()) return serve(s, config_.practice_trials[s.served.size()]);
    if (s.practice_correct < config_.practice_pass) {
      append({{"type", "state"}, {"session_id", session_id}, {"state", "excluded"}, {"reason", "practice"}});
      return NextTrial{SessionState::kExcluded, "practice", std::nullopt};
    }
    const std::size_t block = std::min(config_.trials_per_participant, main_pool_size()) + config_.catch_trials.size();
    append({{"type", "state"}, {"session_id", session_id}, {"state", "main"}, {"block_length", block}});
    s = snapshot();
  }

  if (s.block_served >= s.block_length) {
    append({{"type", "state"}, {"session_id", session_id}, {"state", "completed"}});
    return NextTrial{SessionState::kCompleted, {}, std::nullopt};
  }
  std::size_t catch_index = 0;
  if (is_catch_position(s.block_length, s.block_served, &catch_index)) {
    return serve(s, config_.catch_trials[catch_index]);
  }
  return serve(s, trials_.main_trial(pick_feature(s)).trial_id);
}

ResponseRecord StudyService::submit_response(const std::string& session_id, const std::string& trial_id,
                                             const ResponsePayload& payload, const std::string& idempotency_key) {
  auto& sl = slot(session_id);
  std::lock_guard guard(sl.mu);
  ParticipantSession s;
  {
    std::shared_lock lock(state_mu_);
    s = sl.session;
    if (!idempotency_key.empty()) {
      for (const auto& r : responses_) {
        if (r.session_id == session_id && r.idempotency_key == idempotency_key) {
          if (r.trial_id != trial_id) fail(ErrorCode::kProtocol, "idempotency key reused for another trial");
          return r;
        }
      }
    }
  }
  if (!s.active()) fail(ErrorCode::kState, "session " + session_id + " is " + to_string(s.state));
  if (!s.pending || *s.pending != trial_id) {
    const bool answered = std::find(s.served.begin(), s.served.end(), trial_id) != s.served.end();
    fail(ErrorCode::kProtocol, "trial " + trial_id + (answered ? " was already answered" : " was not served") +
                                   " in session " + session_id);
  }
  const TrialSpec& trial = trials_.at(trial_id);
  if (trial.is_click_trial()) {
    if (!payload.click) fail(ErrorCode::kValidation, "trial expects a click payload");
    const auto [x, y] = *payload.click;
    if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) fail(ErrorCode::kValidation, "click outside [0,1]^2");
  } else {
    if (payload.click) fail(ErrorCode::kValidation, "trial expects text and confidence");
    if (trim(payload.text).empty()) fail(ErrorCode::kValidation, "description must not be empty");
    if (payload.confidence < 1 || payload.confidence > 5) {
      fail(ErrorCode::kValidation, "confidence must be on the 1-5 Likert scale");
    }
  }
  if (!scorer_) fail(ErrorCode::kState, "service has no scorer");
  const ScoreOutcome outcome = scorer_->score(trial, payload);

  ResponseRecord r;
  r.session_id = session_id;
  r.participant_id = s.participant_id;
  r.trial_id = trial_id;
  r.feature_id = trial.feature_id();
  r.model = trial.model;
  r.kind = trial.kind;
  r.seq_in_session = s.answered + 1;
  r.payload = payload;
  r.score = outcome.score;
  r.scorable = outcome.scorable;
  r.pending = outcome.pending;
  if (trial.kind == TrialKind::kPractice || trial.kind == TrialKind::kCatch) {
    r.correct = outcome.score.has_value() && *outcome.score >= trial.threshold;
  }
  r.idempotency_key = idempotency_key;

  std::lock_guard id_guard(id_mu_);
  {
    std::shared_lock lock(state_mu_);
    r.response_id = numbered('r', next_response_);
  }
  r.received_ms = now();
  json e = r.to_json();
  e["type"] = "response";
  e["t_ms"] = r.received_ms;
  log_.append(std::move(e), [this](const json& ev) { apply(ev); });
  return r;
}

std::size_t StudyService::process_deferred() {
  if (!scorer_) return 0;
  std::vector<ResponseRecord> pending;
  {
    std::shared_lock lock(state_mu_);
    for (const auto& r : responses_) {
      if (r.pending) pending.push_back(r);
    }
  }
  std::size_t resolved = 0;
  for (const auto& r : pending) {
    const ScoreOutcome o = scorer_->score(trials_.at(r.trial_id), r.payload);
    if (o.pending) continue;
    append({{"type", "deferred_score"},
            {"response_id", r.response_id},
            {"score", optional_json(o.score)},
            {"scorable", o.scorable}});
    ++resolved;
  }
  return resolved;
}

QualityGateReport StudyService::apply_quality_gates() const {
  std::vector<GateInput> inputs;
  for (const auto& s : sessions()) {
    if (s.active() || s.state == SessionState::kRegistered) continue;
    GateInput in;
    in.session_id = s.session_id;
    in.participant_id = s.participant_id;
    in.practice_correct = s.practice_correct;
    in.catch_correct = s.catch_correct;
    in.completed = s.state == SessionState::kCompleted;
    in.duration_s = static_cast<double>(s.end_ms.value_or(s.start_ms) - s.start_ms) / 1000.0;
    inputs.push_back(std::move(in));
  }
  GateRules rules;
  rules.practice_pass = config_.practice_pass;
  rules.catch_total = config_.catch_trials.size();
  return evaluate_gates(config_.study_id, inputs, rules);
}

std::string StudyService::export_results(bool included_only) const {
  std::optional<QualityGateReport> report;
  json header{{"type", "header"},
              {"v", 1},
              {"study_id", config_.study_id},
              {"protocol", to_string(config_.protocol)},
              {"included_only", included_only}};
  try {
    report = apply_quality_gates();
    header["gates"] = report->to_json();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kInsufficientData) throw;
    header["gates"] = nullptr;
    header["gates_note"] = e.what();
  }
  auto records = responses();
  std::sort(records.begin(), records.end(), [](const ResponseRecord& a, const ResponseRecord& b) {
    return std::tie(a.session_id, a.seq_in_session) < std::tie(b.session_id, b.seq_in_session);
  });
  if (included_only) {
    std::erase_if(records, [&](const ResponseRecord& r) {
      const GateDecision* d = report ? report->find(r.session_id) : nullptr;
      return !d || !d->included;
    });
  }
  return format_export(header, records);
}

bool StudyService::has_session(const std::string& session_id) const {
  std::shared_lock lock(state_mu_);
  return sessions_.count(session_id) > 0;
}

ParticipantSession StudyService::session(const std::string& session_id) const {
  std::shared_lock lock(state_mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) fail(ErrorCode::kNotFound, "unknown session " + session_id);
  return it->second->session;
}

std::vector<ParticipantSession> StudyService::sessions() const {
  std::shared_lock lock(state_mu_);
  std::vector<ParticipantSession> out;
  for (const auto& [_, sl] : sessions_) out.push_back(sl->session);
  return out;
}

std::vector<ResponseRecord> StudyService::responses() const {
  std::shared_lock lock(state_mu_);
  return responses_;
}

std::map<std::string, std::size_t> StudyService::served_counts() const {
  std::shared_lock lock(state_mu_);
  return served_counts_;
}

json StudyService::snapshot_json() const {
  std::shared_lock lock(state_mu_);
  json j;
  j["study_id"] = config_.study_id;
  j["sessions"] = json::array();
  for (const auto& [_, sl] : sessions_) j["sessions"].push_back(sl->session.to_json());
  j["responses"] = json::array();
  for (const auto& r : responses_) j["responses"].push_back(r.to_json());
  j["served_counts"] = served_counts_;
  j["next_session"] = next_session_;
  j["next_response"] = next_response_;
  return j;
}

// ---------------------------------------------------------------------------

std::vector<ResponseRecord> rescore(const std::vector<ResponseRecord>& records, const TrialIndex& trials,
                                    TrialScorer& scorer) {
  std::vector<ResponseRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const TrialSpec* t = trials.find(r.trial_id);
    if (!t) fail(ErrorCode::kIntegrity, "response " + r.response_id + " names unknown trial " + r.trial_id);
    if (t->feature_id() != r.feature_id || t->kind != r.kind) {
      fail(ErrorCode::kIntegrity, "trial " + r.trial_id + " does not match the recorded feature or kind");
    }
    ScoreOutcome o;
    try {
      o = scorer.score(*t, r.payload);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kIo) throw;
      fail(ErrorCode::kIntegrity, "trial " + r.trial_id + ": " + e.what());
    }
    ResponseRecord copy = r;
    copy.score = o.score;
    copy.scorable = o.scorable;
    copy.pending = o.pending;
    out.push_back(std::move(copy));
  }
  return out;
}

std::string format_export(const json& header, const std::vector<ResponseRecord>& records) {
  std::string out = header.dump() + "\n";
  for (const auto& r : records) {
    json line = r.to_json();
    line["type"] = "response";
    out += line.dump() + "\n";
  }
  return out;
}

ExportData parse_export(const std::string& jsonl) {
  ExportData d;
  for (auto& line : ResponseLog::parse(jsonl)) {
    const auto type = line.value("type", std::string());
    if (type == "header") {
      d.header = std::move(line);
    } else if (type == "response") {
      d.records.push_back(ResponseRecord::from_json(line));
    } else {
      fail(ErrorCode::kData, "unexpected export line type '" + type + "'");
    }
  }
  if (d.header.is_null()) fail(ErrorCode::kData, "export has no header line");
  return d;
}

}  // namespace featscope
