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

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "expect_error.hpp"
#include "featscope/http_api.hpp"
#include "httplib.h"
#include "study_fixture.hpp"

using namespace featscope;
using nlohmann::json;

namespace {

struct Served {
  std::unique_ptr<testing::BuiltStudy> built = [] {
    SyntheticStudyOptions o;
    o.study_features = 4;
    o.trials_per_participant = 2;
    return testing::build_synthetic_study(o);
  }();
  std::shared_ptr<TrialScorer> scorer =
      std::make_shared<TrialScorer>(built->study.config, cli::make_embedder(built->study.config));
  StudyService svc{built->study.config, built->study.trials, scorer, std::make_shared<ManualClock>(0)};
  StudyHttpServer server{{&svc}, built->study.config.resolve(built->study.config.asset_root)};
  std::unique_ptr<httplib::Client> client;

  Served() {
    const int port = server.bind("127.0.0.1", 0);
    server.start();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }

  httplib::Result post(const std::string& path, const json& body) {
    return client->Post(path, body.dump(), "application/json");
  }
};

}  // namespace

TEST_CASE("status mapping") {
  CHECK(http_status(ErrorCode::kNotFound) == 404);
  CHECK(http_status(ErrorCode::kConflict) == 409);
  CHECK(http_status(ErrorCode::kState) == 409);
  CHECK(http_status(ErrorCode::kProtocol) == 409);
  CHECK(http_status(ErrorCode::kValidation) == 400);
  CHECK(http_status(ErrorCode::kInternal) == 500);
}

TEST_CASE("a participant runs a session over HTTP") {
  Served s;
  const std::string study = s.svc.study_id();
  auto res = s.post("/studies/" + study + "/sessions", {{"participant_id", "p1"}});
  REQUIRE(res);
  CHECK(res->status == 201);
  const std::string sid = json::parse(res->body)["session_id"];
  CHECK(json::parse(res->body)["state"] == "practice");

  CHECK(s.post("/studies/" + study + "/sessions", {{"participant_id", "p1"}})->status == 409);
  CHECK(s.post("/studies/nope/sessions", {{"participant_id", "p2"}})->status == 404);
  CHECK(s.post("/studies/" + study + "/sessions", {{"participant", "p2"}})->status == 400);
  CHECK(s.client->Post("/studies/" + study + "/sessions", "not json", "application/json")->status == 400);
  CHECK(s.client->Get("/sessions/s424242/next-trial")->status == 404);

  int served = 0;
  for (;;) {
    res = s.client->Get("/sessions/" + sid + "/next-trial");
    REQUIRE(res);
    REQUIRE(res->status == 200);
    const json body = json::parse(res->body);
    if (body["status"] != "trial") {
      CHECK(body["status"] == "completed");
      break;
    }
    ++served;
    const json& view = body["trial"];
    const std::string tid = view["trial_id"];
    const TrialSpec& spec = s.svc.trials().at(tid);
    CHECK(body.dump().find(spec.feature_id()) == std::string::npos);
    CHECK(view["kind"] != "catch");

    const Click c = testing::peak_click(*s.scorer, spec);
    const json answer{{"trial_id", tid}, {"click", {{"x", c.x}, {"y", c.y}}}, {"idempotency_key", "k" + tid}};
    res = s.post("/sessions/" + sid + "/responses", answer);
    REQUIRE(res);
    CHECK(res->status == 201);
    const json created = json::parse(res->body);
    CHECK(created["pending"] == false);
    CHECK(created.contains("feedback") == (spec.kind == TrialKind::kPractice));
    if (spec.kind == TrialKind::kPractice) CHECK(created["feedback"] == "correct");

    res = s.post("/sessions/" + sid + "/responses", answer);  // retried delivery
    CHECK(res->status == 201);
    CHECK(json::parse(res->body)["response_id"] == created["response_id"]);
    json dup = answer;
    dup.erase("idempotency_key");
    CHECK(s.post("/sessions/" + sid + "/responses", dup)->status == 409);
  }
  CHECK(served == 6 + 2 + 4);
  CHECK(s.client->Get("/sessions/" + sid + "/next-trial")->status == 409);

  res = s.client->Get("/studies/" + study + "/export?included_only=false");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->body == s.svc.export_results(false));
  CHECK(s.client->Get("/studies/" + study + "/export?included_only=maybe")->status == 400);
}

TEST_CASE("bad payloads are rejected with 400") {
  Served s;
  const std::string sid =
      json::parse(s.post("/studies/" + s.svc.study_id() + "/sessions", {{"participant_id", "p"}})->body)["session_id"];
  const json view = json::parse(s.client->Get("/sessions/" + sid + "/next-trial")->body)["trial"];
  const std::string tid = view["trial_id"];
  CHECK(s.post("/sessions/" + sid + "/responses", {{"trial_id", tid}, {"click", {{"x", 2.0}, {"y", 0.5}}}})->status == 400);
  CHECK(s.post("/sessions/" + sid + "/responses", {{"trial_id", tid}})->status == 400);
  CHECK(s.post("/sessions/" + sid + "/responses", {{"click", {{"x", 0.5}, {"y", 0.5}}}})->status == 400);
  CHECK(s.post("/sessions/" + sid + "/responses", {{"trial_id", "t9999"}, {"click", {{"x", 0.5}, {"y", 0.5}}}})->status == 409);
}

TEST_CASE("assets are served under /assets") {
  Served s;
  const std::string sid =
      json::parse(s.post("/studies/" + s.svc.study_id() + "/sessions", {{"participant_id", "p"}})->body)["session_id"];
  const json view = json::parse(s.client->Get("/sessions/" + sid + "/next-trial")->body)["trial"];
  const std::string url = view["panel"]["images"][0]["heatmap"];
  auto res = s.client->Get(url);
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->body.rfind("HMAP1\n", 0) == 0);
}
