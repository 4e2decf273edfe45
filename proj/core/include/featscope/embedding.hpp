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

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "featscope/scoring.hpp"

namespace featscope {

enum class EmbedKind { kText, kImage };

struct EmbedRequest {
  EmbedKind kind = EmbedKind::kText;
  std::string payload;  // UTF-8 text or raw image bytes
};

/// Text/image embedding backend. Implementations return unit-norm vectors of
/// a fixed dimensionality and are safe to call from several threads.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const = 0;
  virtual EmbeddingVector embed(const EmbedRequest& request) = 0;

  EmbeddingVector embed_text(std::string_view text) { return embed({EmbedKind::kText, std::string(text)}); }
  EmbeddingVector embed_image(std::string_view bytes) { return embed({EmbedKind::kImage, std::string(bytes)}); }

  /// Embeds a batch; results follow request order regardless of completion
  /// order.
  virtual std::vector<EmbeddingVector> embed_many(const std::vector<EmbedRequest>& requests);
};

/// Deterministic stand-in: a seeded Gaussian direction keyed by the FNV-1a
/// hash of the payload bytes. The request kind is ignored, so identical bytes
/// give identical vectors across modalities.
class StubEmbedder final : public Embedder {
 public:
  explicit StubEmbedder(std::size_t dim = 512, std::uint64_t seed = 0);
  std::size_t dim() const override { return dim_; }
  EmbeddingVector embed(const EmbedRequest& request) override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

struct GatewayConfig {
  std::string host = "127.0.0.1";
  int port = 8090;
  std::size_t dim = 512;
  std::chrono::milliseconds timeout{2000};
  int max_retries = 2;
  std::size_t max_in_flight = 8;
};

/// Client for POST /embed:
///   request  {"kind":"text"|"image","payload":"<text or base64 bytes>"}
///   response {"dim":N,"vector":[...]}  or {"error":"..."} with 4xx/5xx.
class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(GatewayConfig config);
  std::size_t dim() const override { return config_.dim; }
  EmbeddingVector embed(const EmbedRequest& request) override;
  std::vector<EmbeddingVector> embed_many(const std::vector<EmbedRequest>& requests) override;

 private:
  GatewayConfig config_;
  std::counting_semaphore<1024> in_flight_;
};

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

/// Parses a wire request body; throws kValidation on malformed input.
EmbedRequest parse_embed_request(const std::string& body);
std::string serialize_embed_request(const EmbedRequest& request);
std::string serialize_embed_response(const EmbeddingVector& v);

std::unique_ptr<Embedder> make_stub_embedder(std::size_t dim, std::uint64_t seed);

}  // namespace featscope
