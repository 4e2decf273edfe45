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

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "doctest.h"
#include "featscope/binary_io.hpp"
#include "featscope/checksum.hpp"
#include "featscope/cli/commands.hpp"
#include "httplib.h"
#include "temp_dir.hpp"

using namespace featscope;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "featscope");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

json read_json(const fs::path& p) { return json::parse(io::read_file(p)); }

void write_json(const fs::path& p, const json& j) { io::write_file(p, j.dump(2)); }

fs::path make_workspace(const testing::TempDir& dir, int features, int dense) {
  const auto r = run_cli({"make-fixture", "--kind", "workspace", "--features", std::to_string(features), "--dense",
                          std::to_string(dense), "--out", (dir / "ws").string(), "-q"});
  REQUIRE(r.code == 0);
  return dir / "ws" / "build.json";
}

std::size_t study_feature_count(const fs::path& study_json) {
  const json study = read_json(study_json);
  std::size_t n = 0;
  for (const auto& [_, features] : study["models"].items()) n += features.size();
  return n;
}

}  // namespace

TEST_CASE("train-sae is reproducible and records checksums") {
  testing::TempDir dir;
  const auto build = make_workspace(dir, 4, 0);
  const json b = read_json(build);
  json cfg{{"v", 1}, {"activations", json::array()}, {"expansion_factor", 1}, {"k", 2}, {"epochs", 3}};
  for (const auto& a : b["models"][0]["activations"]) cfg["activations"].push_back((build.parent_path() / a.get<std::string>()).string());
  write_json(dir / "train.json", cfg);
  std::vector<std::string> sums;
  for (const std::string out : {"run1", "run2"}) {
    const auto r = run_cli({"train-sae", "--config", (dir / "train.json").string(), "--out", (dir / out).string(), "-q"});
    REQUIRE(r.code == 0);
    const json m = read_json(dir / out / "run_manifest.json");
    CHECK(m["command"] == "train-sae");
    sums.push_back(m["outputs"].dump());
    CHECK(sha256_file(dir / out / "sae.bin") == sha256_hex(io::read_file(dir / out / "sae.bin")));
  }
  CHECK(sums[0] == sums[1]);
  CHECK(io::read_file(dir / "run1" / "sae.bin") == io::read_file(dir / "run2" / "sae.bin"));
}

TEST_CASE("a missing input file exits 2 and names the path") {
  testing::TempDir dir;
  write_json(dir / "train.json", {{"v", 1}, {"activations", {(dir / "nowhere.act").string()}}});
  const auto r = run_cli({"train-sae", "--config", (dir / "train.json").string(), "--out", (dir / "o").string(), "-q"});
  CHECK(r.code == 2);
  CHECK(r.err.find("nowhere.act") != std::string::npos);
}

TEST_CASE("command-line errors exit 1") {
  CHECK(run_cli({"no-such-verb"}).code == 1);
  CHECK(run_cli({"simulate", "--participants", "many"}).code == 1);
  testing::TempDir dir;
  write_json(dir / "bad.json", {{"v", 7}});
  CHECK(run_cli({"gates", "--config", (dir / "bad.json").string()}).code == 1);
}

TEST_CASE("dense features never reach the study") {
  testing::TempDir dir;
  const auto build = make_workspace(dir, 10, 2);
  for (int m : {1, 3}) {
    json b = read_json(build);
    b["per_image_m"] = m;
    const auto cfg = build.parent_path() / ("build_m" + std::to_string(m) + ".json");
    write_json(cfg, b);
    const auto out = dir / ("study_m" + std::to_string(m));
    const auto r = run_cli({"build-study", "--config", cfg.string(), "--out", out.string(), "-q"});
    REQUIRE(r.code == 0);
    CHECK(study_feature_count(out / "study.json") == 10);
    const json sel = read_json(out / "selection.json");
    if (m == 3) CHECK(sel["synthetic"]["dense_removed"] == 2);
  }
}

TEST_CASE("build-study lists every missing dependency at once") {
  testing::TempDir dir;
  const auto build = make_workspace(dir, 4, 0);
  json b = read_json(build);
  b["models"][0]["sae"] = "missing/sae.bin";
  b["models"][0]["probe"] = "missing/probe.bin";
  write_json(build, b);
  const auto r = run_cli({"build-study", "--config", build.string(), "--out", (dir / "st").string(), "-q"});
  CHECK(r.code == 1);
  CHECK(r.err.find("sae.bin") != std::string::npos);
  CHECK(r.err.find("probe.bin") != std::string::npos);
}

TEST_CASE("simulate, score and gates agree end to end") {
  testing::TempDir dir;
  const auto build = make_workspace(dir, 6, 0);
  REQUIRE(run_cli({"build-study", "--config", build.string(), "--out", (dir / "st").string(), "-q"}).code == 0);
  const auto study = (dir / "st" / "study.json").string();
  auto r = run_cli({"simulate", "--study", study, "--rater", "argmax", "--participants", "4", "--out", (dir / "sim").string(), "-q"});
  REQUIRE(r.code == 0);
  const json m = read_json(dir / "sim" / "run_manifest.json");
  REQUIRE(m["details"]["model_scores"].size() == 1);
  CHECK(m["details"]["model_scores"][0]["model"] == "synthetic");
  CHECK(m["details"]["model_scores"][0]["reported"] == 100.0);

  r = run_cli({"score", "--study", study, "--export", (dir / "sim" / "export.jsonl").string(), "--out", (dir / "scored").string(), "-q"});
  REQUIRE(r.code == 0);
  CHECK(io::read_file(dir / "scored" / "scored.jsonl") == io::read_file(dir / "sim" / "export.jsonl"));

  r = run_cli({"gates", "--study", study, "--log", (dir / "sim" / "responses.log").string(), "--out", (dir / "g").string(), "-q"});
  REQUIRE(r.code == 0);
  CHECK(read_json(dir / "g" / "gates.json")["completed"] == 4);
}

TEST_CASE("an absent live gateway is a configuration error") {
  testing::TempDir dir;
  const auto build = make_workspace(dir, 4, 0);
  REQUIRE(run_cli({"build-study", "--config", build.string(), "--out", (dir / "st").string(), "-q"}).code == 0);
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  json s = read_json(dir / "st" / "study.json");
  s["gateway"] = {{"mode", "live"}, {"host", "127.0.0.1"}, {"port", port}, {"timeout_ms", 200}, {"max_retries", 0}};
  write_json(dir / "st" / "study.json", s);
  const auto r = run_cli({"simulate", "--study", (dir / "st" / "study.json").string(), "--participants", "1",
                          "--out", (dir / "sim").string(), "-q"});
  CHECK(r.code == 1);
  CHECK(r.err.find("gateway") != std::string::npos);
}

TEST_CASE("report warns on an undefined correlation and still succeeds") {
  testing::TempDir dir;
  write_json(dir / "fx.json", {{"v", 1}, {"kind", "report"}, {"constant_metric", true}});
  REQUIRE(run_cli({"make-fixture", "--config", (dir / "fx.json").string(), "--out", (dir / "fx").string(), "-q"}).code == 0);
  const auto r = run_cli({"report", "--config", (dir / "fx" / "report.json").string(), "--out", (dir / "rep").string()});
  CHECK(r.code == 0);
  CHECK(r.err.find("undefined-correlation") != std::string::npos);
  const std::string corr = io::read_file(dir / "rep" / "correlations.csv");
  CHECK(corr.find("input_resolution") != std::string::npos);
  CHECK(corr.find("undefined-correlation") != std::string::npos);
  for (const char* f : {"table1.csv", "kruskal_wallis.csv", "dunn.csv", "run_manifest.json"}) CHECK(fs::exists(dir / "rep" / f));
  const std::string kw = io::read_file(dir / "rep" / "kruskal_wallis.csv");
  CHECK(kw.find("localization") != std::string::npos);
}
