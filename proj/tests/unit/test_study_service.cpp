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

#include <atomic>
#include <nlohmann/json.hpp>

#include "doctest.h"
#include "expect_error.hpp"
#include "study_fixture.hpp"

using namespace featscope;
using nlohmann::json;

namespace {

struct Harness {
  std::unique_ptr<testing::BuiltStudy> built;
  std::shared_ptr<TrialScorer> scorer;
  std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>(1'000'000);
  std::unique_ptr<StudyService> svc;

  explicit Harness(const SyntheticStudyOptions& opts = {}, std::shared_ptr<Embedder> embedder = nullptr)
      : built(testing::build_synthetic_study(opts)) {
    if (!embedder) embedder = cli::make_embedder(built->study.config);
    scorer = std::make_shared<TrialScorer>(built->study.config, embedder);
    svc = std::make_unique<StudyService>(built->study.config, built->study.trials, scorer, clock);
  }
  const StudyConfig& config() const { return built->study.config; }

  ResponseRecord answer_peak(const std::string& sid, const TrialSpec& t) {
    ResponsePayload p;
    if (t.is_click_trial()) {
      p.click = testing::peak_click(*scorer, t);
    } else {
      p.text = "something";
      p.confidence = 3;
    }
    clock->advance(1000);
    return svc->submit_response(sid, t.trial_id, p);
  }

  void finish_practice(const std::string& sid) {
    for (int i = 0; i < 6; ++i) answer_peak(sid, *svc->next_trial(sid).trial);
  }
};

/// Stub embedder that can be switched off to simulate a gateway outage.
class SwitchableEmbedder final : public Embedder {
 public:
  explicit SwitchableEmbedder(std::size_t dim) : inner_(dim, 0) {}
  std::size_t dim() const override { return inner_.dim(); }
  EmbeddingVector embed(const EmbedRequest& r) override {
    if (down) fail(ErrorCode::kGateway, "gateway down");
    return inner_.embed(r);
  }
  std::atomic<bool> down{false};

 private:
  StubEmbedder inner_;
};

SyntheticStudyOptions small(std::size_t features, std::size_t t) {
  SyntheticStudyOptions o;
  o.study_features = features;
  o.trials_per_participant = t;
  return o;
}

}  // namespace

TEST_CASE("a session walks practice, main block and completion") {
  Harness h(small(8, 5));
  const auto s = h.svc->create_session("p1");
  CHECK(s.state == SessionState::kPractice);
  CHECK(s.session_id == "s000001");
  std::vector<std::string> practice;
  for (int i = 0; i < 6; ++i) {
    const NextTrial n = h.svc->next_trial(s.session_id);
    REQUIRE(n.trial);
    CHECK(n.trial->kind == TrialKind::kPractice);
    practice.push_back(n.trial->trial_id);
    const auto r = h.answer_peak(s.session_id, *n.trial);
    CHECK(r.correct == true);
  }
  CHECK(practice == h.config().practice_trials);

  std::size_t mains = 0, catches = 0;
  std::set<std::string> features;
  for (;;) {
    const NextTrial n = h.svc->next_trial(s.session_id);
    if (!n.trial) {
      CHECK(n.state == SessionState::kCompleted);
      break;
    }
    if (n.trial->kind == TrialKind::kCatch) {
      ++catches;
    } else {
      ++mains;
      CHECK(features.insert(n.trial->feature_id()).second);
    }
    h.answer_peak(s.session_id, *n.trial);
  }
  CHECK(mains == 5);
  CHECK(catches == 4);
  const auto done = h.svc->session(s.session_id);
  CHECK(done.state == SessionState::kCompleted);
  CHECK(done.catch_correct == 4);
  CHECK(done.block_length == 9);
  CHECK(done.end_ms.has_value());
  CHECK_ERROR_CODE(h.svc->next_trial(s.session_id), ErrorCode::kState);
}

TEST_CASE("catch trials sit at evenly spaced block positions") {
  Harness h(small(20, 20));
  const auto sid = h.svc->create_session("p").session_id;
  h.finish_practice(sid);
  std::vector<std::size_t> catch_positions;
  for (std::size_t pos = 0;; ++pos) {
    const NextTrial n = h.svc->next_trial(sid);
    if (!n.trial) break;
    if (n.trial->kind == TrialKind::kCatch) catch_positions.push_back(pos);
    h.answer_peak(sid, *n.trial);
  }
  // L = 24: (i + 1) * 25 / 5 - 1
  CHECK(catch_positions == std::vector<std::size_t>{4, 9, 14, 19});
}

TEST_CASE("failing practice excludes the session on the seventh call") {
  Harness h(small(4, 2));
  const auto sid = h.svc->create_session("p").session_id;
  for (int i = 0; i < 6; ++i) {
    const NextTrial n = h.svc->next_trial(sid);
    ResponsePayload p;
    p.click = i < 3 ? testing::peak_click(*h.scorer, *n.trial) : testing::trough_click(*h.scorer, *n.trial);
    h.svc->submit_response(sid, n.trial->trial_id, p);
  }
  CHECK(h.svc->session(sid).state == SessionState::kPractice);
  const NextTrial seventh = h.svc->next_trial(sid);
  CHECK(!seventh.trial);
  CHECK(seventh.state == SessionState::kExcluded);
  CHECK(seventh.reason == "practice");
  CHECK(h.svc->session(sid).exclusion_reason == "practice");
  CHECK(h.svc->session(sid).practice_correct == 3);
}

TEST_CASE("assignment goes to the least-served feature") {
  Harness h(small(2, 1));
  const auto a = h.svc->create_session("a").session_id;
  h.finish_practice(a);
  NextTrial n = h.svc->next_trial(a);
  while (n.trial->kind == TrialKind::kCatch) {
    h.answer_peak(a, *n.trial);
    n = h.svc->next_trial(a);
  }
  const std::string first = n.trial->feature_id();
  h.answer_peak(a, *n.trial);
  CHECK(h.svc->served_counts().at(first) == 1);

  const auto b = h.svc->create_session("b").session_id;
  h.finish_practice(b);
  n = h.svc->next_trial(b);
  while (n.trial->kind == TrialKind::kCatch) {
    h.answer_peak(b, *n.trial);
    n = h.svc->next_trial(b);
  }
  CHECK(n.trial->feature_id() != first);
}

TEST_CASE("service errors map to the documented codes") {
  Harness h(small(4, 2));
  CHECK_ERROR_CODE(h.svc->create_session("p", "other-study"), ErrorCode::kNotFound);
  CHECK_ERROR_CODE(h.svc->create_session(""), ErrorCode::kValidation);
  const auto sid = h.svc->create_session("p").session_id;
  CHECK_ERROR_CODE(h.svc->create_session("p"), ErrorCode::kConflict);
  CHECK_ERROR_CODE(h.svc->next_trial("s999999"), ErrorCode::kNotFound);

  const NextTrial n = h.svc->next_trial(sid);
  CHECK(h.svc->next_trial(sid).trial->trial_id == n.trial->trial_id);  // unanswered trial is re-served
  ResponsePayload good;
  good.click = Click{0.5, 0.5};
  CHECK_ERROR_CODE(h.svc->submit_response(sid, h.config().practice_trials[1], good), ErrorCode::kProtocol);
  ResponsePayload outside;
  outside.click = Click{1.5, 0.5};
  CHECK_ERROR_CODE(h.svc->submit_response(sid, n.trial->trial_id, outside), ErrorCode::kValidation);
  ResponsePayload text;
  text.text = "a dog";
  text.confidence = 3;
  CHECK_ERROR_CODE(h.svc->submit_response(sid, n.trial->trial_id, text), ErrorCode::kValidation);
  h.svc->submit_response(sid, n.trial->trial_id, good);
  CHECK_ERROR_CODE(h.svc->submit_response(sid, n.trial->trial_id, good), ErrorCode::kProtocol);
}

TEST_CASE("naming payloads are validated") {
  SyntheticStudyOptions o = small(10, 3);
  o.protocol = Protocol::kNaming;
  o.per_bin = 10;
  Harness h(o);
  const auto sid = h.svc->create_session("p").session_id;
  h.finish_practice(sid);
  NextTrial n = h.svc->next_trial(sid);
  while (n.trial->kind != TrialKind::kNaming) {
    h.answer_peak(sid, *n.trial);
    n = h.svc->next_trial(sid);
  }
  ResponsePayload p;
  p.text = "stripes";
  p.confidence = 7;
  CHECK_ERROR_CODE(h.svc->submit_response(sid, n.trial->trial_id, p), ErrorCode::kValidation);
  p.text = "   ";
  p.confidence = 3;
  CHECK_ERROR_CODE(h.svc->submit_response(sid, n.trial->trial_id, p), ErrorCode::kValidation);
  p.text = "stripes";
  const auto r = h.svc->submit_response(sid, n.trial->trial_id, p);
  REQUIRE(r.score);
  CHECK(*r.score == doctest::Approx(h.scorer->name(*n.trial, "stripes").score));
  CHECK(!r.correct);
}

TEST_CASE("payload JSON parsing") {
  const auto click = ResponsePayload::from_json(json{{"click", {{"x", 0.25}, {"y", 1.0}}}});
  CHECK(click.click->x == 0.25);
  const auto text = ResponsePayload::from_json(json{{"text", "a dog"}, {"confidence", 4}});
  CHECK(text.text == "a dog");
  CHECK(ResponsePayload::from_json(text.to_json()).confidence == 4);
  CHECK_ERROR_CODE(ResponsePayload::from_json(json{{"click", "here"}}), ErrorCode::kValidation);
  CHECK_ERROR_CODE(ResponsePayload::from_json(json::object()), ErrorCode::kValidation);
  CHECK_ERROR_CODE(ResponsePayload::from_json(json{{"text", "x"}, {"confidence", 2.5}}), ErrorCode::kValidation);
}

TEST_CASE("idempotency keys return the original record") {
  Harness h(small(4, 2));
  const auto sid = h.svc->create_session("p").session_id;
  const NextTrial n = h.svc->next_trial(sid);
  ResponsePayload p;
  p.click = testing::peak_click(*h.scorer, *n.trial);
  const auto first = h.svc->submit_response(sid, n.trial->trial_id, p, "k1");
  const auto again = h.svc->submit_response(sid, n.trial->trial_id, p, "k1");
  CHECK(again.response_id == first.response_id);
  CHECK(h.svc->responses().size() == 1);
}

TEST_CASE("replaying every prefix of the log rebuilds the live state") {
  Harness h(small(6, 3));
  std::vector<std::pair<std::size_t, json>> checkpoints;
  auto mark = [&] { checkpoints.emplace_back(h.svc->events().size(), h.svc->snapshot_json()); };
  mark();
  for (const std::string pid : {"a", "b", "c"}) {
    const auto sid = h.svc->create_session(pid).session_id;
    mark();
    for (;;) {
      const NextTrial n = h.svc->next_trial(sid);
      mark();
      if (!n.trial) break;
      h.answer_peak(sid, *n.trial);
      mark();
    }
  }
  const auto events = h.svc->events();
  for (const auto& [count, snap] : checkpoints) {
    const std::vector<json> prefix(events.begin(), events.begin() + static_cast<std::ptrdiff_t>(count));
    const auto replayed = StudyService::replay(h.config(), h.built->study.trials, prefix);
    CHECK(replayed->snapshot_json() == snap);
  }
}

TEST_CASE("a service reopened on its log continues where it stopped") {
  Harness h(small(4, 2));
  testing::TempDir dir;
  const auto log = dir / "responses.log";
  std::string sid;
  json before;
  {
    StudyService svc(h.config(), h.built->study.trials, h.scorer, h.clock, log);
    sid = svc.create_session("p").session_id;
    const NextTrial n = svc.next_trial(sid);
    ResponsePayload p;
    p.click = testing::peak_click(*h.scorer, *n.trial);
    svc.submit_response(sid, n.trial->trial_id, p);
    before = svc.snapshot_json();
  }
  StudyService again(h.config(), h.built->study.trials, h.scorer, h.clock, log);
  CHECK(again.snapshot_json() == before);
  const auto next = again.create_session("q");
  CHECK(next.session_id == "s000002");
  CHECK(ResponseLog::read(log).back()["seq"] == 4);
}

TEST_CASE("naming scores wait out a gateway outage") {
  SyntheticStudyOptions o = small(10, 3);
  o.protocol = Protocol::kNaming;
  o.per_bin = 10;
  auto embedder = std::make_shared<SwitchableEmbedder>(512);
  Harness h(o, embedder);
  embedder->down = true;
  const auto sid = h.svc->create_session("p").session_id;
  std::size_t naming = 0;
  for (;;) {
    const NextTrial n = h.svc->next_trial(sid);
    if (!n.trial) break;
    const auto r = h.answer_peak(sid, *n.trial);
    if (n.trial->kind == TrialKind::kNaming) {
      ++naming;
      CHECK(r.pending);
      CHECK(!r.score);
    } else {
      CHECK(!r.pending);
    }
  }
  CHECK(naming == 3);
  CHECK(h.svc->process_deferred() == 0);
  embedder->down = false;
  CHECK(h.svc->process_deferred() == 3);
  for (const auto& r : h.svc->responses()) {
    CHECK(!r.pending);
    CHECK(r.score.has_value());
  }
  CHECK(h.svc->process_deferred() == 0);
}

TEST_CASE("export is ordered, deterministic and filtered by the gates") {
  Harness h(small(6, 3));
  CHECK(h.svc->export_results(false).find("\"gates\":null") != std::string::npos);  // no sessions yet
  testing::Script fail_catch;
  fail_catch.catch_correct = 2;
  const auto bad = testing::run_script(*h.svc, *h.clock, *h.scorer, "bad", fail_catch);
  testing::run_script(*h.svc, *h.clock, *h.scorer, "ok1", {});
  testing::run_script(*h.svc, *h.clock, *h.scorer, "ok2", {});

  const std::string all = h.svc->export_results(false);
  CHECK(all == h.svc->export_results(false));
  const ExportData data = parse_export(all);
  CHECK(data.header["type"] == "header");
  CHECK(data.header["included_only"] == false);
  CHECK(data.records.size() == 3 * (6 + 3 + 4));
  for (std::size_t i = 1; i < data.records.size(); ++i) {
    const auto& a = data.records[i - 1];
    const auto& b = data.records[i];
    CHECK(std::tie(a.session_id, a.seq_in_session) < std::tie(b.session_id, b.seq_in_session));
  }
  CHECK(format_export(data.header, data.records) == all);

  const ExportData inc = parse_export(h.svc->export_results(true));
  CHECK(inc.records.size() == 2 * 13);
  for (const auto& r : inc.records) CHECK(r.session_id != bad);
  CHECK(inc.header["gates"]["participants"].size() == 3);
}

TEST_CASE("offline rescoring reproduces online scores and catches tampering") {
  Harness h(small(6, 3));
  testing::run_script(*h.svc, *h.clock, *h.scorer, "a", {});
  testing::run_script(*h.svc, *h.clock, *h.scorer, "b", {});
  const std::string text = h.svc->export_results(false);
  ExportData d = parse_export(text);
  TrialScorer fresh(h.config(), cli::make_embedder(h.config()));
  CHECK(format_export(d.header, rescore(d.records, h.built->study.trials, fresh)) == text);
  d.records[0].feature_id = "synthetic/9999";
  CHECK_ERROR_CODE(rescore(d.records, h.built->study.trials, fresh), ErrorCode::kIntegrity);
}
