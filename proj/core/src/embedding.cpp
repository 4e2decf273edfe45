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

#include "featscope/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "featscope/error.hpp"
#include "featscope/matrix.hpp"
#include "featscope/rng.hpp"

namespace featscope {

using nlohmann::json;

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

EmbeddingVector normalized(EmbeddingVector v) {
  const double n = norm2(v);
  if (!(n > 0.0) || !std::isfinite(n)) fail(ErrorCode::kGateway, "embedding has zero or non-finite norm");
  for (double& x : v) x /= n;
  return v;
}

}  // namespace

std::vector<EmbeddingVector> Embedder::embed_many(const std::vector<EmbedRequest>& requests) {
  std::vector<EmbeddingVector> out;
  out.reserve(requests.size());
  for (const auto& r : requests) out.push_back(embed(r));
  return out;
}

StubEmbedder::StubEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim == 0) fail(ErrorCode::kConfig, "embedding dim must be >= 1");
}

EmbeddingVector StubEmbedder::embed(const EmbedRequest& request) {
  Rng rng(mix_seed(seed_, fnv1a64(request.payload)));
  EmbeddingVector v(dim_);
  for (double& x : v) x = rng.normal();
  return normalized(std::move(v));
}

std::unique_ptr<Embedder> make_stub_embedder(std::size_t dim, std::uint64_t seed) {
  return std::make_unique<StubEmbedder>(dim, seed);
}

std::string base64_encode(std::string_view bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t n = (static_cast<unsigned char>(bytes[i]) << 16) |
                            (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                            static_cast<unsigned char>(bytes[i + 2]);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    std::uint32_t n = static_cast<unsigned char>(bytes[i]) << 16;
    if (rest == 2) n |= static_cast<unsigned char>(bytes[i + 1]) << 8;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += rest == 2 ? kAlphabet[(n >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::string base64_decode(std::string_view text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) fail(ErrorCode::kValidation, "base64 length not a multiple of 4");
  std::string out;
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int j = 0; j < 4; ++j) {
      const char c = text[i + j];
      if (c == '=' && i + 4 == text.size() && j >= 2) {
        v[j] = 0;
        ++pad;
      } else {
        v[j] = value(c);
        if (v[j] < 0 || pad > 0) fail(ErrorCode::kValidation, "invalid base64 payload");
      }
    }
    const std::uint32_t n = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out += static_cast<char>((n >> 16) & 0xff);
    if (pad < 2) out += static_cast<char>((n >> 8) & 0xff);
    if (pad < 1) out += static_cast<char>(n & 0xff);
  }
  return out;
}

std::string serialize_embed_request(const EmbedRequest& request) {
  json body{{"kind", request.kind == EmbedKind::kText ? "text" : "image"},
            {"payload", request.kind == EmbedKind::kText ? request.payload : base64_encode(request.payload)}};
  return body.dump();
}

EmbedRequest parse_embed_request(const std::string& body) {
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) fail(ErrorCode::kValidation, "request body is not a JSON object");
  if (!doc.contains("kind") || !doc["kind"].is_string()) fail(ErrorCode::kValidation, "missing kind");
  if (!doc.contains("payload") || !doc["payload"].is_string()) fail(ErrorCode::kValidation, "missing payload");
  const auto kind = doc["kind"].get<std::string>();
  EmbedRequest r;
  if (kind == "text") {
    r.kind = EmbedKind::kText;
    r.payload = doc["payload"].get<std::string>();
  } else if (kind == "image") {
    r.kind = EmbedKind::kImage;
    r.payload = base64_decode(doc["payload"].get<std::string>());
  } else {
    fail(ErrorCode::kValidation, "unknown kind '" + kind + "'");
  }
  return r;
}

std::string serialize_embed_response(const EmbeddingVector& v) {
  return json{{"dim", v.size()}, {"vector", v}}.dump();
}

HttpEmbedder::HttpEmbedder(GatewayConfig config)
    : config_(std::move(config)),
      in_flight_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(config_.max_in_flight, 1, 1024))) {
  if (config_.dim == 0) fail(ErrorCode::kConfig, "embedding dim must be >= 1");
}

EmbeddingVector HttpEmbedder::embed(const EmbedRequest& request) {
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  const std::string body = serialize_embed_request(request);
  httplib::Client client(config_.host, config_.port);
  client.set_tcp_nodelay(true);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    auto res = client.Post("/embed", body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    json doc = json::parse(res->body, nullptr, false);
    if (res->status != 200) {
      std::string msg = doc.is_object() && doc.contains("error") ? doc["error"].dump() : res->body;
      if (res->status >= 500) {
        last_error = "status " + std::to_string(res->status) + ": " + msg;
        continue;
      }
      fail(ErrorCode::kGateway, "embedding request rejected with status " + std::to_string(res->status) + ": " + msg);
    }
    if (doc.is_discarded() || !doc.contains("vector") || !doc["vector"].is_array()) {
      fail(ErrorCode::kGateway, "malformed embedding response");
    }
    auto v = doc["vector"].get<EmbeddingVector>();
    const auto declared = doc.value("dim", v.size());
    if (declared != v.size() || v.size() != config_.dim) {
      fail(ErrorCode::kConfig, "gateway returned dim " + std::to_string(v.size()) + ", study expects " +
                                   std::to_string(config_.dim));
    }
    return normalized(std::move(v));
  }
  fail(ErrorCode::kGateway, "embedding endpoint " + config_.host + ":" + std::to_string(config_.port) +
                                " unreachable after " + std::to_string(config_.max_retries) + " retries (" +
                                last_error + ")");
}

std::vector<EmbeddingVector> HttpEmbedder::embed_many(const std::vector<EmbedRequest>& requests) {
  std::vector<std::future<EmbeddingVector>> pending;
  pending.reserve(requests.size());
  for (const auto& r : requests) {
    pending.push_back(std::async(std::launch::async, [this, &r] { return embed(r); }));
  }
  std::vector<EmbeddingVector> out;
  out.reserve(requests.size());
  for (auto& f : pending) out.push_back(f.get());
  return out;
}

}  // namespace featscope
