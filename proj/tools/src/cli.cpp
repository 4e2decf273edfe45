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

#include <CLI11.hpp>

#include <chrono>
#include <functional>

#include "featscope/binary_io.hpp"
#include "featscope/cli/commands.hpp"
#include "featscope/error.hpp"
#include "featscope/synthetic.hpp"

namespace featscope::cli {

using nlohmann::json;
namespace fs = std::filesystem;

RunManifest cmd_make_fixture(const CommandContext& ctx) {
  RunManifest m;
  m.command = "make-fixture";
  const std::string kind = ctx.config.value("kind", std::string("workspace"));
  const std::uint64_t seed = ctx.seed_or(1);
  m.seeds["fixture"] = seed;
  fs::create_directories(ctx.out_dir);
  if (kind == "workspace") {
    SyntheticStudyOptions o;
    o.protocol = protocol_from_string(ctx.config.value("protocol", std::string("localization")));
    o.study_features = ctx.config.value("features", o.study_features);
    o.dense_features = ctx.config.value("dense", o.dense_features);
    o.per_image_m = ctx.config.value("per_image_m", o.per_image_m);
    o.trials_per_participant = ctx.config.value("trials_per_participant", o.study_features);
    if (ctx.config.contains("models")) o.models = ctx.config["models"].get<std::vector<std::string>>();
    o.seed = seed;
    m.add_output(ctx.out_dir, write_synthetic_workspace(ctx.out_dir, o));
  } else if (kind == "report") {
    const auto fx = make_report_fixture(ctx.config.value("models", std::size_t{6}), 30, 3, seed,
                                        ctx.config.value("constant_metric", false));
    const auto loc = ctx.out_dir / "localization.jsonl";
    const auto nam = ctx.out_dir / "naming.jsonl";
    const auto met = ctx.out_dir / "metrics.csv";
    const auto cfg = ctx.out_dir / "report.json";
    io::write_file(loc, format_export(fx.localization_header, fx.localization));
    io::write_file(nam, format_export(fx.naming_header, fx.naming));
    io::write_file(met, fx.metrics.to_csv());
    io::write_file(cfg, json{{"v", 1}, {"inputs", {"localization.jsonl", "naming.jsonl"}}, {"metrics", "metrics.csv"}}
                            .dump(2) + "\n");
    for (const auto& p : {loc, nam, met, cfg}) m.add_output(ctx.out_dir, p);
  } else if (kind == "pilot") {
    const auto fx = make_pilot(80, 0.1, 5, 3, 0.15, seed);
    std::string text;
    for (const auto& r : fx.records) {
      text += json{{"feature", r.feature}, {"image_rank", r.image_rank}, {"trial", r.trial}, {"score", r.score}}.dump() +
              "\n";
    }
    const auto p = ctx.out_dir / "pilot.jsonl";
    io::write_file(p, text);
    m.add_output(ctx.out_dir, p);
  } else {
    fail(ErrorCode::kConfig, "unknown fixture kind '" + kind + "' (workspace, report, pilot)");
  }
  return m;
}

namespace {

struct Verb {
  CLI::App* app = nullptr;
  std::function<RunManifest(const CommandContext&)> run;
  json overrides = json::object();
};

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().generic_string(); }

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"featscope: interpretability studies for vision-model features"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  bool quiet = false;
  app.add_option("--config", config_path, "JSON config (\"v\": 1)");
  app.add_option("--seed", seed, "Seed overriding the config");
  app.add_option("--out", out_dir, "Output directory");
  app.add_flag("-q,--quiet", quiet, "Suppress progress output");

  std::map<std::string, Verb> verbs;
  auto verb = [&](const std::string& name, const std::string& help, auto fn) -> Verb& {
    Verb& v = verbs[name];
    v.app = app.add_subcommand(name, help);
    v.run = fn;
    return v;
  };

  // Flag values land in per-verb overrides merged over the config file.
  std::vector<std::string> activations, inputs;
  std::string study, rater, log, exp, metrics, host, kind, protocol;
  std::size_t participants = 0, features = 0, dense = 0;
  int port = 0, k = 0, epochs = 0;

  auto& train = verb("train-sae", "Train a TopK SAE (and optionally a probe) on activations", cmd_train_sae);
  train.app->add_option("--activations", activations, "ACT1 activation files");
  train.app->add_option("--k", k, "Active features per token");
  train.app->add_option("--epochs", epochs, "Training epochs");

  verb("build-study", "Select features and assemble study trials", cmd_build_study);

  auto& serve = verb("serve", "Run the study HTTP server", cmd_serve);
  serve.app->add_option("--study", study, "study.json");
  serve.app->add_option("--host", host, "Bind address");
  serve.app->add_option("--port", port, "Port");
  serve.app->add_option("--log", log, "Response log path");

  auto& sim = verb("simulate", "Run scripted raters through the HTTP API", cmd_simulate);
  sim.app->add_option("--study", study, "study.json");
  sim.app->add_option("--rater", rater, "argmax | random | mean-click | template-namer");
  sim.app->add_option("--participants", participants, "Number of simulated participants");

  auto& score = verb("score", "Rescore an export or response log offline", cmd_score);
  score.app->add_option("--study", study, "study.json");
  score.app->add_option("--export", exp, "Export JSON lines");
  score.app->add_option("--log", log, "Response log (replayed, all sessions)");

  auto& report = verb("report", "Tables, tests, correlations and scatterplots", cmd_report);
  report.app->add_option("--inputs", inputs, "Scored exports");
  report.app->add_option("--metrics", metrics, "Metric table CSV (model,metric,value)");

  auto& gates = verb("gates", "Apply participant quality gates to a response log", cmd_gates);
  gates.app->add_option("--study", study, "study.json");
  gates.app->add_option("--log", log, "Response log");

  auto& fixture = verb("make-fixture", "", cmd_make_fixture);
  fixture.app->add_option("--kind", kind, "workspace | report | pilot");
  fixture.app->add_option("--protocol", protocol, "localization | naming");
  fixture.app->add_option("--features", features, "Study features per model");
  fixture.app->add_option("--dense", dense, "Dense features per model");
  fixture.app->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  const auto t0 = std::chrono::steady_clock::now();
  try {
    for (auto& [name, v] : verbs) {
      if (!v.app->parsed()) continue;
      CommandContext ctx;
      if (!config_path.empty()) {
        ctx.config = load_config(config_path);
        ctx.config_path = config_path;
        ctx.base_dir = fs::path(config_path).parent_path();
        if (ctx.base_dir.empty()) ctx.base_dir = ".";
      }
      auto set = [&](const char* key, const json& value) { ctx.config[key] = value; };
      if (!activations.empty()) {
        std::vector<std::string> abs;
        for (const auto& a : activations) abs.push_back(absolute(a));
        set("activations", abs);
      }
      if (!inputs.empty()) {
        std::vector<std::string> abs;
        for (const auto& a : inputs) abs.push_back(absolute(a));
        set("inputs", abs);
      }
      if (!study.empty()) set("study", absolute(study));
      if (!log.empty()) set("log", absolute(log));
      if (!exp.empty()) set("export", absolute(exp));
      if (!metrics.empty()) set("metrics", absolute(metrics));
      if (!rater.empty()) set("rater", rater);
      if (!host.empty()) set("host", host);
      if (!kind.empty()) set("kind", kind);
      if (!protocol.empty()) set("protocol", protocol);
      if (participants) set("participants", participants);
      if (features) set("features", features);
      if (dense) set("dense", dense);
      if (port) set("port", port);
      if (k) set("k", k);
      if (epochs) set("epochs", epochs);
      ctx.seed = seed;
      ctx.out_dir = out_dir;
      ctx.log = quiet ? nullptr : &out;

      RunManifest m = v.run(ctx);
      m.config_path = config_path;
      m.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      fs::create_directories(ctx.out_dir);
      m.write(ctx.out_dir);
      for (const auto& w : m.warnings) err << "warning: " << w << '\n';
    }
    return 0;
  } catch (const Error& e) {
    err << e.what() << '\n';
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "io error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace featscope::cli
