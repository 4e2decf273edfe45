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

#include <atomic>
#include <cmath>
#include <thread>

#include "doctest.h"
#include "expect_error.hpp"
#include "featscope/embedding.hpp"
#include "featscope/http_api.hpp"
#include "featscope/scoring.hpp"
#include "httplib.h"

using namespace featscope;

namespace {

/// Test double for a misbehaving gateway.
class FakeGateway {
 public:
  explicit FakeGateway(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/embed", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeGateway() {
    server_.stop();
    thread_.join();
  }
  int port() const { return port_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

GatewayConfig config_for(int port, std::size_t dim) {
  GatewayConfig c;
  c.port = port;
  c.dim = dim;
  c.timeout = std::chrono::milliseconds(500);
  c.max_retries = 2;
  return c;
}

}  // namespace

TEST_CASE("stub embeddings are unit norm, deterministic and modality blind") {
  StubEmbedder a(64, 3), b(64, 3), c(64, 4);
  const auto v = a.embed_text("a dog");
  double n = 0.0;
  for (double x : v) n += x * x;
  CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(v == b.embed_text("a dog"));
  CHECK(v == a.embed_image("a dog"));
  CHECK(v != c.embed_text("a dog"));
  CHECK(std::abs(cosine(v, a.embed_text("a cat"))) < 0.6);
  CHECK_ERROR_CODE(StubEmbedder(0, 1), ErrorCode::kConfig);
}

TEST_CASE("base64 round-trips arbitrary bytes") {
  CHECK(base64_encode("") == "");
  CHECK(base64_encode("f") == "Zg==");
  CHECK(base64_encode("fo") == "Zm8=");
  CHECK(base64_encode("foo") == "Zm9v");
  std::string bytes;
  for (int i = 0; i < 256; ++i) bytes.push_back(static_cast<char>(i));
  CHECK(base64_decode(base64_encode(bytes)) == bytes);
  CHECK_ERROR_CODE(base64_decode("abc"), ErrorCode::kValidation);
  CHECK_ERROR_CODE(base64_decode("a=bc"), ErrorCode::kValidation);
}

TEST_CASE("wire requests carry image bytes as base64") {
  const EmbedRequest img{EmbedKind::kImage, std::string("\x89PNG\0", 5)};
  const EmbedRequest back = parse_embed_request(serialize_embed_request(img));
  CHECK(back.kind == EmbedKind::kImage);
  CHECK(back.payload == img.payload);
  CHECK(parse_embed_request(R"({"kind":"text","payload":"hi"})").payload == "hi");
  CHECK_ERROR_CODE(parse_embed_request(R"({"kind":"audio","payload":"x"})"), ErrorCode::kValidation);
  CHECK_ERROR_CODE(parse_embed_request("[]"), ErrorCode::kValidation);
}

// The client renormalizes, which can move the last bit.
bool same_vector(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i] - b[i]) > 1e-12) return false;
  }
  return true;
}

TEST_CASE("HTTP embedder against the reference endpoint matches the stub") {
  auto stub = std::make_shared<StubEmbedder>(32, 9);
  EmbeddingHttpServer server(stub);
  const int port = server.bind("127.0.0.1", 0);
  server.start();
  HttpEmbedder client(config_for(port, 32));
  CHECK(same_vector(client.embed_text("red"), stub->embed_text("red")));
  const std::string png("\x01\x02\x00\xff", 4);
  CHECK(same_vector(client.embed_image(png), stub->embed_image(png)));
  const auto many = client.embed_many({{EmbedKind::kText, "a"}, {EmbedKind::kText, "b"}, {EmbedKind::kText, "c"}});
  REQUIRE(many.size() == 3);
  CHECK(same_vector(many[2], stub->embed_text("c")));
  HttpEmbedder wrong_dim(config_for(port, 16));
  CHECK_ERROR_CODE(wrong_dim.embed_text("red"), ErrorCode::kConfig);
  server.stop();
}

TEST_CASE("a dead endpoint is a gateway error") {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  HttpEmbedder client(config_for(port, 8));
  CHECK_ERROR_CODE(client.embed_text("x"), ErrorCode::kGateway);
}

TEST_CASE("5xx responses are retried and 4xx are not") {
  std::atomic<int> calls{0};
  FakeGateway flaky([&](const httplib::Request&, httplib::Response& res) {
    if (calls++ == 0) {
      res.status = 503;
      res.set_content(R"({"error":"warming up"})", "application/json");
      return;
    }
    res.set_content(R"({"dim":2,"vector":[3,4]})", "application/json");
  });
  HttpEmbedder client(config_for(flaky.port(), 2));
  const auto v = client.embed_text("x");
  CHECK(calls == 2);
  CHECK(v[0] == doctest::Approx(0.6));
  CHECK(v[1] == doctest::Approx(0.8));

  std::atomic<int> rejected{0};
  FakeGateway strict([&](const httplib::Request&, httplib::Response& res) {
    ++rejected;
    res.status = 400;
    res.set_content(R"({"error":"bad payload"})", "application/json");
  });
  HttpEmbedder client2(config_for(strict.port(), 2));
  CHECK_ERROR_CODE(client2.embed_text("x"), ErrorCode::kGateway);
  CHECK(rejected == 1);

  FakeGateway zero([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"dim":2,"vector":[0,0]})", "application/json");
  });
  HttpEmbedder client3(config_for(zero.port(), 2));
  CHECK_ERROR_CODE(client3.embed_text("x"), ErrorCode::kGateway);
}
