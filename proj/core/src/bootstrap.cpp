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

#include "featscope/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "featscope/binary_io.hpp"
#include "featscope/error.hpp"
#include "featscope/rng.hpp"

namespace featscope {

namespace {

template <typename Fn>
BootstrapSummary run_resamples(std::size_t resamples, std::uint64_t seed, std::size_t threads, Fn&& statistic) {
  if (resamples < 2) fail(ErrorCode::kParameter, "bootstrap needs at least two resamples");
  BootstrapSummary s;
  s.statistics.resize(resamples);
  threads = std::clamp<std::size_t>(threads, 1, resamples);
  auto work = [&](std::size_t worker) {
    for (std::size_t b = worker; b < resamples; b += threads) {
      Rng rng(mix_seed(seed, b));
      s.statistics[b] = statistic(rng);
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(work, w);
  }
  double sum = 0.0;
  for (double v : s.statistics) sum += v;
  s.mean = sum / static_cast<double>(resamples);
  double ss = 0.0;
  for (double v : s.statistics) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(resamples - 1));
  return s;
}

}  // namespace

BootstrapSummary bootstrap_breadth(std::span<const double> unit_scores, std::size_t m, std::size_t resamples,
                                   std::uint64_t seed, std::size_t threads) {
  if (unit_scores.empty()) fail(ErrorCode::kData, "breadth bootstrap needs at least one unit");
  if (m == 0) fail(ErrorCode::kParameter, "breadth bootstrap needs m >= 1");
  return run_resamples(resamples, seed, threads, [&](Rng& rng) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) sum += unit_scores[rng.uniform_index(unit_scores.size())];
    return sum / static_cast<double>(m);
  });
}

BootstrapSummary bootstrap_depth(std::span<const PilotRecord> records, std::size_t images, std::size_t trials,
                                 std::size_t resamples, std::uint64_t seed, std::size_t threads) {
  if (images == 0 || trials == 0) fail(ErrorCode::kParameter, "depth bootstrap needs images >= 1 and trials >= 1");
  std::map<std::string, std::vector<double>> per_feature;
  std::map<std::string, bool> seen;
  for (const auto& r : records) {
    if (r.image_rank < 1 || r.trial < 1 || !std::isfinite(r.score)) {
      fail(ErrorCode::kData, "malformed pilot record for feature " + r.feature);
    }
    seen[r.feature] = true;
    if (static_cast<std::size_t>(r.image_rank) <= images) per_feature[r.feature].push_back(r.score);
  }
  if (seen.empty()) fail(ErrorCode::kData, "depth bootstrap needs pilot records");
  std::vector<std::vector<double>> pools;
  for (const auto& [feature, _] : seen) {
    auto it = per_feature.find(feature);
    const std::size_t available = it == per_feature.end() ? 0 : it->second.size();
    if (available < trials) {
      fail(ErrorCode::kData, "feature " + feature + " has " + std::to_string(available) + " responses on its first " +
                                 std::to_string(images) + " images, design asks for " + std::to_string(trials));
    }
    pools.push_back(it->second);
  }
  return run_resamples(resamples, seed, threads, [&](Rng& rng) {
    double total = 0.0;
    for (const auto& pool : pools) {
      double sum = 0.0;
      for (std::size_t t = 0; t < trials; ++t) sum += pool[rng.uniform_index(pool.size())];
      total += sum / static_cast<double>(trials);
    }
    return total / static_cast<double>(pools.size());
  });
}

std::vector<PilotRecord> parse_pilot_jsonl(const std::string& text) {
  std::vector<PilotRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto doc = nlohmann::json::parse(line, nullptr, false);
    try {
      if (doc.is_discarded()) throw std::invalid_argument("not JSON");
      PilotRecord r;
      r.feature = doc.at("feature").is_string() ? doc.at("feature").get<std::string>() : doc.at("feature").dump();
      r.image_rank = doc.at("image_rank").get<int>();
      r.trial = doc.at("trial").get<int>();
      r.score = doc.at("score").get<double>();
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      fail(ErrorCode::kData, "pilot line " + std::to_string(line_no) + " is malformed: " + e.what());
    }
  }
  return out;
}

std::vector<PilotRecord> load_pilot_jsonl(const std::filesystem::path& path) {
  return parse_pilot_jsonl(io::read_file(path));
}

}  // namespace featscope
