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

#include "featscope/response_log.hpp"

#include <sstream>

#include "featscope/binary_io.hpp"
#include "featscope/error.hpp"

namespace featscope {

using nlohmann::json;

ResponseLog::ResponseLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty()) return;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  if (std::filesystem::exists(path_)) {
    // Drop a torn final line so later appends start on a fresh line.
    const std::string text = io::read_file(path_);
    const auto cut = text.rfind('\n');
    const std::size_t keep = cut == std::string::npos ? 0 : cut + 1;
    if (keep != text.size()) std::filesystem::resize_file(path_, keep);
  }
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) fail(ErrorCode::kIo, "cannot open log " + path_.string());
}

std::uint64_t ResponseLog::append(json event, const std::function<void(const json&)>& apply) {
  std::lock_guard lock(mu_);
  event["seq"] = seq_ + 1;
  if (out_.is_open()) {
    out_ << event.dump() << '\n';
    out_.flush();
    if (!out_) fail(ErrorCode::kIo, "write to " + path_.string() + " failed");
  }
  ++seq_;
  events_.push_back(event);
  if (apply) apply(events_.back());
  return seq_;
}

void ResponseLog::adopt(std::vector<json> events) {
  std::lock_guard lock(mu_);
  for (auto& e : events) {
    const auto seq = e.at("seq").get<std::uint64_t>();
    if (seq != seq_ + 1) fail(ErrorCode::kData, "log sequence gap at seq " + std::to_string(seq));
    seq_ = seq;
    events_.push_back(std::move(e));
  }
}

std::vector<json> ResponseLog::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::uint64_t ResponseLog::last_seq() const {
  std::lock_guard lock(mu_);
  return seq_;
}

std::vector<json> ResponseLog::parse(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json e = json::parse(line, nullptr, false);
    if (e.is_discarded() || !e.is_object()) {
      if (in.eof() && text.back() != '\n') break;  // torn tail
      fail(ErrorCode::kData, "malformed log line " + std::to_string(lineno));
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<json> ResponseLog::read(const std::filesystem::path& path) { return parse(io::read_file(path)); }

}  // namespace featscope
