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

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace featscope {

/// Gate-relevant facts about one finished session. Sessions excluded during
/// practice never reach the main block, so their catch and duration gates are
/// not evaluated.
struct GateInput {
  std::string session_id;
  std::string participant_id;
  std::size_t practice_correct = 0;
  std::size_t catch_correct = 0;
  bool completed = false;  // false: excluded during practice
  double duration_s = 0.0;
};

struct GateRules {
  std::size_t practice_pass = 4;
  std::size_t catch_total = 4;
  double max_abs_z = 3.0;
};

struct GateDecision {
  std::string session_id;
  std::string participant_id;
  bool practice_pass = false;
  std::optional<bool> catch_pass;
  std::optional<double> duration_z;
  bool included = false;
  std::vector<std::string> reasons;  // subset of practice, catch, duration
};

struct QualityGateReport {
  std::string study_id;
  std::size_t completed = 0;
  double mean_duration_s = 0.0;
  double sd_duration_s = 0.0;
  std::vector<GateDecision> participants;  // input order

  const GateDecision* find(const std::string& session_id) const;
  nlohmann::json to_json() const;
  static QualityGateReport from_json(const nlohmann::json& j);
  std::string to_csv() const;
};

/// Duration mean and sample SD come from completed sessions only; needs at
/// least two of them (kInsufficientData). A zero SD gives z = 0 for everyone.
QualityGateReport evaluate_gates(const std::string& study_id, const std::vector<GateInput>& inputs,
                                 const GateRules& rules = {});

}  // namespace featscope
