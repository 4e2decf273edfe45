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

#include <httplib.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "featscope/binary_io.hpp"
#include "featscope/cli/commands.hpp"
#include "featscope/error.hpp"
#include "featscope/http_api.hpp"
#include "featscope/rng.hpp"

namespace featscope::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(RaterKind r) {
  switch (r) {
    case RaterKind::kArgmax: return "argmax";
    case RaterKind::kRandom: return "random";
    case RaterKind::kMeanClick: return "mean-click";
    case RaterKind::kTemplateNamer: return "template-namer";
  }
  return "unknown";
}

RaterKind rater_from_string(const std::string& s) {
  for (auto r : {RaterKind::kArgmax, RaterKind::kRandom, RaterKind::kMeanClick, RaterKind::kTemplateNamer}) {
    if (to_string(r) == s) return r;
  }
  fail(ErrorCode::kConfig, "unknown rater '" + s + "' (argmax, random, mean-click, template-namer)");
}

namespace {

constexpr std::array<const char*, 12> kWords = {"dog",   "stripes", "wheel", "sky",  "grass", "face",
                                                "water", "text",    "fur",   "edge", "metal", "leaf"};

Click pixel_center(std::size_t x, std::size_t y, const Heatmap& h) {
  return {(static_cast<double>(x) + 0.5) / static_cast<double>(h.width),
          (static_cast<double>(y) + 0.5) / static_cast<double>(h.height)};
}

/// Scripted participant. It reads the trial index directly (an oracle view
/// that includes the query heatmap), which real participants never see.
class ScriptedRater {
 public:
  ScriptedRater(RaterKind kind, TrialScorer& scorer, const TrialIndex& trials)
      : kind_(kind), scorer_(scorer), trials_(trials) {}

  json respond(const std::string& trial_id, Rng& rng) {
    const TrialSpec& t = trials_.at(trial_id);
    json body{{"trial_id", trial_id}};
    if (!t.is_click_trial()) {
      if (kind_ == RaterKind::kRandom) {
        std::string text = kWords[rng.uniform_index(kWords.size())];
        text += std::string(" ") + kWords[rng.uniform_index(kWords.size())];
        body["text"] = text;
        body["confidence"] = 1 + static_cast<int>(rng.uniform_index(5));
      } else {
        body["text"] = "a photo of an object";
        body["confidence"] = 3;
      }
      return body;
    }
    const Heatmap& h = *scorer_.smoothed(t.query->heatmap);
    Click c;
    if (kind_ == RaterKind::kRandom && t.kind != TrialKind::kPractice) {
      c = {rng.uniform(), rng.uniform()};
    } else if (kind_ == RaterKind::kMeanClick && t.kind != TrialKind::kPractice) {
      const double mu = h.mean();
      std::size_t best = 0;
      for (std::size_t i = 1; i < h.size(); ++i) {
        if (std::abs(h.values[i] - mu) < std::abs(h.values[best] - mu)) best = i;
      }
      c = pixel_center(best % h.width, best / h.width, h);
    } else {
      const auto best = static_cast<std::size_t>(std::max_element(h.values.begin(), h.values.end()) - h.values.begin());
      c = pixel_center(best % h.width, best / h.width, h);
    }
    body["click"] = {{"x", c.x}, {"y", c.y}};
    return body;
  }

 private:
  RaterKind kind_;
  TrialScorer& scorer_;
  const TrialIndex& trials_;
};

json checked(const httplib::Result& res, const std::string& what) {
  if (!res) fail(ErrorCode::kInternal, what + ": " + httplib::to_string(res.error()));
  json body = json::parse(res->body, nullptr, false);
  if (res->status >= 300) {
    fail(ErrorCode::kInternal, what + " returned " + std::to_string(res->status) + ": " + res->body);
  }
  return body;
}

}  // namespace

SimulationResult simulate_study(const SimulationOptions& o) {
  LoadedStudy study = load_study(o.study);
  if (o.think_min_ms < 0 || o.think_max_ms < o.think_min_ms) fail(ErrorCode::kConfig, "invalid think-time range");
  auto embedder = make_embedder(study.config, true);
  auto scorer = std::make_shared<TrialScorer>(study.config, embedder);
  auto clock = std::make_shared<ManualClock>(0);
  if (!o.log.empty() && fs::exists(o.log)) fs::remove(o.log);
  StudyService service(study.config, study.trials, scorer, clock, o.log);
  StudyHttpServer server({&service}, scorer->asset_path("."));
  const int port = server.bind("127.0.0.1", 0);
  server.start();

  SimulationResult result;
  httplib::Client client("127.0.0.1", port);
  client.set_keep_alive(true);
  client.set_tcp_nodelay(true);
  ScriptedRater rater(o.rater, *scorer, study.trials);
  const std::string study_id = study.config.study_id;
  for (std::size_t p = 0; p < o.participants; ++p) {
    Rng rng(mix_seed(o.seed, p));
    char pid[16];
    std::snprintf(pid, sizeof pid, "p%04zu", p + 1);
    clock->advance(1000);
    const json created = checked(client.Post("/studies/" + study_id + "/sessions", json{{"participant_id", pid}}.dump(),
                                             "application/json"),
                                 "create session");
    ++result.http_requests;
    const std::string sid = created.at("session_id").get<std::string>();
    for (;;) {
      const json next = checked(client.Get("/sessions/" + sid + "/next-trial"), "next trial");
      ++result.http_requests;
      if (next.at("status") != "trial") break;
      const std::string tid = next["trial"].at("trial_id").get<std::string>();
      const auto span = static_cast<std::uint64_t>(o.think_max_ms - o.think_min_ms + 1);
      clock->advance(o.think_min_ms + static_cast<std::int64_t>(rng.uniform_index(span)));
      checked(client.Post("/sessions/" + sid + "/responses", rater.respond(tid, rng).dump(), "application/json"),
              "submit response");
      ++result.http_requests;
    }
  }
  server.stop();
  service.process_deferred();

  result.export_all = service.export_results(false);
  try {
    result.gates = service.apply_quality_gates();
    result.export_included = service.export_results(true);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kInsufficientData) throw;
  }
  result.responses = service.responses();
  result.snapshot = service.snapshot_json();
  return result;
}

RunManifest cmd_simulate(const CommandContext& ctx) {
  RunManifest m;
  m.command = "simulate";
  SimulationOptions o;
  o.study = ctx.path("study");
  o.rater = rater_from_string(ctx.config.value("rater", std::string("argmax")));
  o.participants = ctx.config.value("participants", o.participants);
  o.seed = ctx.seed_or(0);
  o.think_min_ms = ctx.config.value("think_min_ms", o.think_min_ms);
  o.think_max_ms = ctx.config.value("think_max_ms", o.think_max_ms);
  fs::create_directories(ctx.out_dir);
  o.log = ctx.out_dir / "responses.log";
  m.inputs.push_back(o.study.generic_string());
  m.seeds["raters"] = o.seed;

  const SimulationResult r = simulate_study(o);
  const auto export_path = ctx.out_dir / "export.jsonl";
  io::write_file(export_path, r.export_all);
  m.add_output(ctx.out_dir, o.log);
  m.add_output(ctx.out_dir, export_path);
  if (r.gates) {
    const auto gates_path = ctx.out_dir / "gates.json";
    io::write_file(gates_path, r.gates->to_json().dump(2) + "\n");
    m.add_output(ctx.out_dir, gates_path);
  } else {
    m.warnings.push_back("fewer than 2 completed sessions; quality gates undefined");
  }

  const auto protocol = load_study(o.study).config.protocol;
  const Measure measure = protocol == Protocol::kNaming ? Measure::kNameability : Measure::kLocalizability;
  json summary = json::array();
  for (const auto& s : model_score(main_scores(r.responses), measure)) {
    summary.push_back({{"model", s.model}, {"features", s.feature_scores.size()}, {"responses", s.responses},
                       {"median", s.median}, {"reported", s.reported}});
  }
  m.details["rater"] = to_string(o.rater);
  m.details["participants"] = o.participants;
  m.details["responses"] = r.responses.size();
  m.details["model_scores"] = summary;
  ctx.note("simulated " + std::to_string(o.participants) + " participants, " + std::to_string(r.responses.size()) +
           " responses");
  return m;
}

}  // namespace featscope::cli
