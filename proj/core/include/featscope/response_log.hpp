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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <vector>

#include <nlohmann/json.hpp>

namespace featscope {

/// Append-only JSON-lines event log. Each appended event receives the next
/// sequence number ("seq", starting at 1) and is flushed before append returns.
/// An empty path keeps the log in memory only.
class ResponseLog {
 public:
  explicit ResponseLog(std::filesystem::path path = {});

  ResponseLog(const ResponseLog&) = delete;
  ResponseLog& operator=(const ResponseLog&) = delete;

  /// Stamps `event` with its sequence number, persists it, then runs `apply`
  /// while still holding the append lock, so observers see log order.
  std::uint64_t append(nlohmann::json event,
                       const std::function<void(const nlohmann::json&)>& apply = {});

  /// Adopts already-persisted events (used when reopening a log).
  void adopt(std::vector<nlohmann::json> events);

  std::vector<nlohmann::json> events() const;
  std::uint64_t last_seq() const;
  const std::filesystem::path& path() const noexcept { return path_; }

  /// Reads a log file. A torn final line (no trailing newline, invalid JSON)
  /// is ignored; any other malformed line is a kData error.
  static std::vector<nlohmann::json> read(const std::filesystem::path& path);
  static std::vector<nlohmann::json> parse(const std::string& text);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  mutable std::mutex mu_;
  std::vector<nlohmann::json> events_;
  std::uint64_t seq_ = 0;
};

}  // namespace featscope
