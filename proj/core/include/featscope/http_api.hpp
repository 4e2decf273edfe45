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

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "featscope/embedding.hpp"
#include "featscope/error.hpp"
#include "featscope/study_service.hpp"

namespace featscope {

/// HTTP status for a domain error.
int http_status(ErrorCode code);

/// JSON API over one or more studies:
///   POST /studies/{id}/sessions            {"participant_id"} -> {"session_id"}
///   GET  /sessions/{sid}/next-trial        -> {"status":"trial","trial":{...}} or a terminal status
///   POST /sessions/{sid}/responses         {"trial_id", click | text+confidence, "idempotency_key"?}
///   GET  /studies/{id}/export?included_only=true|false -> JSON lines
/// Study assets are served under /assets/.
class StudyHttpServer {
 public:
  StudyHttpServer(std::vector<StudyService*> studies, std::filesystem::path asset_root);
  ~StudyHttpServer();

  StudyHttpServer(const StudyHttpServer&) = delete;
  StudyHttpServer& operator=(const StudyHttpServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves on a background thread until stop().
  void start();
  /// Serves on the calling thread until stop().
  void run();
  void stop();
  int port() const noexcept { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

/// Minimal embedding endpoint (POST /embed) backed by any Embedder.
class EmbeddingHttpServer {
 public:
  explicit EmbeddingHttpServer(std::shared_ptr<Embedder> embedder);
  ~EmbeddingHttpServer();

  EmbeddingHttpServer(const EmbeddingHttpServer&) = delete;
  EmbeddingHttpServer& operator=(const EmbeddingHttpServer&) = delete;

  int bind(const std::string& host, int port);
  void start();
  void stop();
  int port() const noexcept { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace featscope
