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

#include "featscope/gates.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "featscope/error.hpp"

namespace featscope {

using nlohmann::json;

QualityGateReport evaluate_gates(const std::string& study_id, const std::vector<GateInput>& inputs,
                                 const GateRules& rules) {
  QualityGateReport report;
  report.study_id = study_id;
  double sum = 0.0;
  for (const auto& in : inputs) {
    if (in.completed) {
      ++report.completed;
      sum += in.duration_s;
    }
  }
  if (report.completed < 2) {
    fail(ErrorCode::kInsufficientData, "quality gates need at least 2 completed sessions, got " +
                                           std::to_string(report.completed));
  }
  const double n = static_cast<double>(report.completed);
  report.mean_duration_s = sum / n;
  double ss = 0.0;
  for (const auto& in : inputs) {
    if (in.completed) ss += (in.duration_s - report.mean_duration_s) * (in.duration_s - report.mean_duration_s);
  }
  report.sd_duration_s = std::sqrt(ss / (n - 1.0));

  for (const auto& in : inputs) {
    GateDecision d;
    d.session_id = in.session_id;
    d.participant_id = in.participant_id;
    d.practice_pass = in.practice_correct >= rules.practice_pass;
    if (!d.practice_pass) d.reasons.push_back("practice");
    if (in.completed) {
      d.catch_pass = in.catch_correct >= rules.catch_total;
      d.duration_z = report.sd_duration_s > 0.0
                         ? (in.duration_s - report.mean_duration_s) / report.sd_duration_s
                         : 0.0;
      if (!*d.catch_pass) d.reasons.push_back("catch");
      if (std::abs(*d.duration_z) > rules.max_abs_z) d.reasons.push_back("duration");
    }
    d.included = d.practice_pass && d.catch_pass.value_or(false) && d.duration_z &&
                 std::abs(*d.duration_z) <= rules.max_abs_z;
    report.participants.push_back(std::move(d));
  }
  return report;
}

const GateDecision* QualityGateReport::find(const std::string& session_id) const {
  for (const auto& d : participants) {
    if (d.session_id == session_id) return &d;
  }
  return nullptr;
}

json QualityGateReport::to_json() const {
  json j;
  j["study_id"] = study_id;
  j["completed"] = completed;
  j["mean_duration_s"] = mean_duration_s;
  j["sd_duration_s"] = sd_duration_s;
  j["participants"] = json::array();
  for (const auto& d : participants) {
    j["participants"].push_back({{"session_id", d.session_id},
                                 {"participant_id", d.participant_id},
                                 {"practice_pass", d.practice_pass},
                                 {"catch_pass", d.catch_pass ? json(*d.catch_pass) : json(nullptr)},
                                 {"duration_z", d.duration_z ? json(*d.duration_z) : json(nullptr)},
                                 {"included", d.included},
                                 {"reasons", d.reasons}});
  }
  return j;
}

QualityGateReport QualityGateReport::from_json(const json& j) {
  QualityGateReport r;
  r.study_id = j.at("study_id").get<std::string>();
  r.completed = j.at("completed").get<std::size_t>();
  r.mean_duration_s = j.at("mean_duration_s").get<double>();
  r.sd_duration_s = j.at("sd_duration_s").get<double>();
  for (const auto& p : j.at("participants")) {
    GateDecision d;
    d.session_id = p.at("session_id").get<std::string>();
    d.participant_id = p.at("participant_id").get<std::string>();
    d.practice_pass = p.at("practice_pass").get<bool>();
    if (!p.at("catch_pass").is_null()) d.catch_pass = p["catch_pass"].get<bool>();
    if (!p.at("duration_z").is_null()) d.duration_z = p["duration_z"].get<double>();
    d.included = p.at("included").get<bool>();
    d.reasons = p.at("reasons").get<std::vector<std::string>>();
    r.participants.push_back(std::move(d));
  }
  return r;
}

std::string QualityGateReport::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "session_id,participant_id,practice_pass,catch_pass,duration_z,included,reasons\n";
  for (const auto& d : participants) {
    out << d.session_id << ',' << d.participant_id << ',' << (d.practice_pass ? "true" : "false") << ','
        << (d.catch_pass ? (*d.catch_pass ? "true" : "false") : "") << ',';
    if (d.duration_z) out << *d.duration_z;
    out << ',' << (d.included ? "true" : "false") << ',';
    for (std::size_t i = 0; i < d.reasons.size(); ++i) out << (i ? ";" : "") << d.reasons[i];
    out << '\n';
  }
  return out.str();
}

}  // namespace featscope
