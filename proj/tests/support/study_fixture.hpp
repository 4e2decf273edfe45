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

#include <algorithm>
#include <memory>
#include <string>

#include "featscope/cli/commands.hpp"
#include "featscope/study_service.hpp"
#include "featscope/synthetic.hpp"
#include "temp_dir.hpp"

namespace featscope::testing {

/// A synthetic workspace run through build-study.
struct BuiltStudy {
  TempDir dir{"featscope-study"};
  std::filesystem::path study_json;
  cli::LoadedStudy study;
};

inline std::unique_ptr<BuiltStudy> build_synthetic_study(const SyntheticStudyOptions& options = {}) {
  auto b = std::make_unique<BuiltStudy>();
  cli::CommandContext ctx;
  const auto build = write_synthetic_workspace(b->dir / "ws", options);
  ctx.config = cli::load_config(build);
  ctx.base_dir = build.parent_path();
  ctx.out_dir = b->dir / "study";
  cli::cmd_build_study(ctx);
  b->study_json = ctx.out_dir / "study.json";
  b->study = cli::load_study(b->study_json);
  return b;
}

inline Click pixel_click(const Heatmap& h, std::size_t index) {
  return {(static_cast<double>(index % h.width) + 0.5) / static_cast<double>(h.width),
          (static_cast<double>(index / h.width) + 0.5) / static_cast<double>(h.height)};
}

/// Click on the peak of the scoring heatmap (score 1).
inline Click peak_click(TrialScorer& scorer, const TrialSpec& t) {
  const Heatmap& h = *scorer.smoothed(t.query->heatmap);
  return pixel_click(h, static_cast<std::size_t>(std::max_element(h.values.begin(), h.values.end()) - h.values.begin()));
}

/// Click on the minimum (score close to 0).
inline Click trough_click(TrialScorer& scorer, const TrialSpec& t) {
  const Heatmap& h = *scorer.smoothed(t.query->heatmap);
  return pixel_click(h, static_cast<std::size_t>(std::min_element(h.values.begin(), h.values.end()) - h.values.begin()));
}

struct Script {
  std::size_t practice_correct = 6;
  std::size_t catch_correct = 4;
  std::int64_t duration_ms = 600'000;
  std::int64_t step_ms = 1'000;
};

/// Drives one participant through the service directly. Practice and catch
/// trials are answered correctly in order until the scripted count is used
/// up; main trials click the peak. The session ends exactly `duration_ms`
/// after it started.
inline std::string run_script(StudyService& svc, ManualClock& clock, TrialScorer& scorer, const std::string& pid,
                              const Script& script) {
  const std::int64_t start = clock.now_ms();
  const std::string sid = svc.create_session(pid).session_id;
  std::size_t practice = 0, catches = 0;
  for (;;) {
    const auto s = svc.session(sid);
    if (s.state == SessionState::kMain && !s.pending && s.block_served == s.block_length) {
      clock.set(start + script.duration_ms);
    }
    const NextTrial next = svc.next_trial(sid);
    if (!next.trial) break;
    const TrialSpec& t = *next.trial;
    bool correct = true;
    if (t.kind == TrialKind::kPractice) correct = practice++ < script.practice_correct;
    if (t.kind == TrialKind::kCatch) correct = catches++ < script.catch_correct;
    clock.advance(script.step_ms);
    ResponsePayload p;
    if (t.is_click_trial()) {
      p.click = correct ? peak_click(scorer, t) : trough_click(scorer, t);
    } else {
      p.text = "a photo of an object";
      p.confidence = 3;
    }
    svc.submit_response(sid, t.trial_id, p);
  }
  return sid;
}

}  // namespace featscope::testing
