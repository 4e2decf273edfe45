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

#include <csignal>
#include <pthread.h>
#include <thread>

#include "featscope/binary_io.hpp"
#include "featscope/cli/commands.hpp"
#include "featscope/error.hpp"
#include "featscope/http_api.hpp"

namespace featscope::cli {

using nlohmann::json;
namespace fs = std::filesystem;

RunManifest cmd_serve(const CommandContext& ctx) {
  RunManifest m;
  m.command = "serve";
  const auto study_path = ctx.path("study");
  m.inputs.push_back(study_path.generic_string());
  LoadedStudy study = load_study(study_path);
  fs::create_directories(ctx.out_dir);
  const fs::path log = ctx.optional_path("log").value_or(ctx.out_dir / "responses.log");
  auto scorer = std::make_shared<TrialScorer>(study.config, make_embedder(study.config));
  StudyService service(study.config, study.trials, scorer, std::make_shared<SystemClock>(), log);
  StudyHttpServer server({&service}, scorer->asset_path("."));
  const std::string host = ctx.config.value("host", std::string("127.0.0.1"));
  const int port = server.bind(host, ctx.config.value("port", 8080));

  // SIGINT/SIGTERM are taken synchronously by a watcher thread that stops the server.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  std::thread watcher([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  ctx.note("serving study " + study.config.study_id + " on http://" + host + ":" + std::to_string(port));
  server.run();
  pthread_kill(watcher.native_handle(), SIGTERM);
  watcher.join();
  pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);

  service.process_deferred();
  m.add_output(ctx.out_dir, log);
  m.details["sessions"] = service.sessions().size();
  m.details["responses"] = service.responses().size();
  return m;
}

RunManifest cmd_score(const CommandContext& ctx) {
  RunManifest m;
  m.command = "score";
  const auto study_path = ctx.path("study");
  m.inputs.push_back(study_path.generic_string());
  LoadedStudy study = load_study(study_path);

  std::string text;
  if (auto log = ctx.optional_path("log")) {
    m.inputs.push_back(log->generic_string());
    auto svc = StudyService::replay(study.config, study.trials, ResponseLog::read(*log));
    text = svc->export_results(false);
  } else {
    const auto exp = ctx.path("export");
    m.inputs.push_back(exp.generic_string());
    text = io::read_file(exp);
  }
  const ExportData data = parse_export(text);
  if (data.header.value("study_id", std::string()) != study.config.study_id) {
    fail(ErrorCode::kIntegrity, "export belongs to study " + data.header.value("study_id", std::string("?")) +
                                    ", not " + study.config.study_id);
  }
  TrialScorer scorer(study.config, make_embedder(study.config));
  const auto rescored = rescore(data.records, study.trials, scorer);

  std::size_t changed = 0;
  for (std::size_t i = 0; i < rescored.size(); ++i) {
    if (rescored[i].to_json()["score"].dump() != data.records[i].to_json()["score"].dump()) ++changed;
  }
  if (changed) m.warnings.push_back(std::to_string(changed) + " scores differ from the recorded online scores");

  fs::create_directories(ctx.out_dir);
  const auto out = ctx.out_dir / "scored.jsonl";
  io::write_file(out, format_export(data.header, rescored));
  m.add_output(ctx.out_dir, out);
  m.details["records"] = rescored.size();
  m.details["changed"] = changed;
  return m;
}

RunManifest cmd_gates(const CommandContext& ctx) {
  RunManifest m;
  m.command = "gates";
  const auto study_path = ctx.path("study");
  const auto log = ctx.path("log");
  m.inputs = {study_path.generic_string(), log.generic_string()};
  LoadedStudy study = load_study(study_path);
  auto svc = StudyService::replay(study.config, study.trials, ResponseLog::read(log));
  const QualityGateReport report = svc->apply_quality_gates();
  fs::create_directories(ctx.out_dir);
  const auto csv = ctx.out_dir / "gates.csv";
  const auto js = ctx.out_dir / "gates.json";
  io::write_file(csv, report.to_csv());
  io::write_file(js, report.to_json().dump(2) + "\n");
  m.add_output(ctx.out_dir, csv);
  m.add_output(ctx.out_dir, js);
  std::size_t included = 0;
  for (const auto& d : report.participants) included += d.included ? 1 : 0;
  m.details["participants"] = report.participants.size();
  m.details["included"] = included;
  return m;
}

}  // namespace featscope::cli
