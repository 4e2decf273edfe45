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

#include "featscope/http_api.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>
#include <thread>

namespace featscope {

using nlohmann::json;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict:
    case ErrorCode::kState:
    case ErrorCode::kProtocol: return 409;
    case ErrorCode::kValidation: return 400;
    default: return 500;
  }
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  send_json(res, http_status(e.code()), {{"error", to_string(e.code())}, {"message", e.what()}});
}

template <typename F>
httplib::Server::Handler guarded(F&& f) {
  return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", "internal"}, {"message", e.what()}});
    }
  };
}

json parse_body(const httplib::Request& req) {
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) fail(ErrorCode::kValidation, "request body must be a JSON object");
  return body;
}

void serve_thread(httplib::Server& server, std::thread& thread) {
  thread = std::thread([&server] { server.listen_after_bind(); });
  server.wait_until_ready();
}

}  // namespace

struct StudyHttpServer::Impl {
  httplib::Server server;
  std::vector<StudyService*> studies;
  std::thread thread;

  StudyService& study(const std::string& id) {
    for (auto* s : studies) {
      if (s->study_id() == id) return *s;
    }
    fail(ErrorCode::kNotFound, "unknown study " + id);
  }

  StudyService& owner(const std::string& session_id) {
    for (auto* s : studies) {
      if (s->has_session(session_id)) return *s;
    }
    fail(ErrorCode::kNotFound, "unknown session " + session_id);
  }
};

StudyHttpServer::StudyHttpServer(std::vector<StudyService*> studies, std::filesystem::path asset_root)
    : impl_(std::make_unique<Impl>()) {
  impl_->studies = std::move(studies);
  auto& srv = impl_->server;
  srv.set_tcp_nodelay(true);
  Impl* impl = impl_.get();

  if (!asset_root.empty()) srv.set_mount_point("/assets", asset_root.string());

  srv.Post(R"(/studies/([^/]+)/sessions)", guarded([impl](const httplib::Request& req, httplib::Response& res) {
             const json body = parse_body(req);
             if (!body.contains("participant_id") || !body["participant_id"].is_string()) {
               fail(ErrorCode::kValidation, "participant_id must be a string");
             }
             auto& study = impl->study(req.matches[1]);
             const auto s = study.create_session(body["participant_id"].get<std::string>(), req.matches[1]);
             send_json(res, 201, {{"session_id", s.session_id}, {"state", to_string(s.state)}});
           }));

  srv.Get(R"(/sessions/([^/]+)/next-trial)", guarded([impl](const httplib::Request& req, httplib::Response& res) {
            auto& study = impl->owner(req.matches[1]);
            const NextTrial next = study.next_trial(req.matches[1]);
            if (!next.trial) {
              json body{{"status", to_string(next.state)}};
              if (!next.reason.empty()) body["reason"] = next.reason;
              send_json(res, 200, body);
              return;
            }
            send_json(res, 200, {{"status", "trial"}, {"trial", participant_view(*next.trial, "/assets/")}});
          }));

  srv.Post(R"(/sessions/([^/]+)/responses)", guarded([impl](const httplib::Request& req, httplib::Response& res) {
             const json body = parse_body(req);
             if (!body.contains("trial_id") || !body["trial_id"].is_string()) {
               fail(ErrorCode::kValidation, "trial_id must be a string");
             }
             json payload_doc = body;
             payload_doc.erase("trial_id");
             payload_doc.erase("idempotency_key");
             const auto payload = ResponsePayload::from_json(payload_doc);
             auto& study = impl->owner(req.matches[1]);
             const auto r = study.submit_response(req.matches[1], body["trial_id"].get<std::string>(), payload,
                                                  body.value("idempotency_key", std::string()));
             json out{{"response_id", r.response_id}, {"pending", r.pending}};
             if (r.kind == TrialKind::kPractice) out["feedback"] = r.correct.value_or(false) ? "correct" : "incorrect";
             send_json(res, 201, out);
           }));

  srv.Get(R"(/studies/([^/]+)/export)", guarded([impl](const httplib::Request& req, httplib::Response& res) {
            const std::string flag = req.has_param("included_only") ? req.get_param_value("included_only") : "false";
            if (flag != "true" && flag != "false") fail(ErrorCode::kValidation, "included_only must be true or false");
            res.status = 200;
            res.set_content(impl->study(req.matches[1]).export_results(flag == "true"), "application/x-ndjson");
          }));
}

StudyHttpServer::~StudyHttpServer() { stop(); }

int StudyHttpServer::bind(const std::string& host, int port) {
  port_ = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (port_ < 0) fail(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  return port_;
}

void StudyHttpServer::start() { serve_thread(impl_->server, impl_->thread); }

void StudyHttpServer::run() { impl_->server.listen_after_bind(); }

void StudyHttpServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

struct EmbeddingHttpServer::Impl {
  httplib::Server server;
  std::shared_ptr<Embedder> embedder;
  std::thread thread;
};

EmbeddingHttpServer::EmbeddingHttpServer(std::shared_ptr<Embedder> embedder) : impl_(std::make_unique<Impl>()) {
  impl_->embedder = std::move(embedder);
  impl_->server.set_tcp_nodelay(true);
  Impl* impl = impl_.get();
  impl_->server.Post("/embed", guarded([impl](const httplib::Request& req, httplib::Response& res) {
                       const EmbedRequest r = parse_embed_request(req.body);
                       res.status = 200;
                       res.set_content(serialize_embed_response(impl->embedder->embed(r)), "application/json");
                     }));
}

EmbeddingHttpServer::~EmbeddingHttpServer() { stop(); }

int EmbeddingHttpServer::bind(const std::string& host, int port) {
  port_ = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (port_ < 0) fail(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  return port_;
}

void EmbeddingHttpServer::start() { serve_thread(impl_->server, impl_->thread); }

void EmbeddingHttpServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace featscope
