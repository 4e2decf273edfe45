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

#include <cmath>

#include "doctest.h"
#include "expect_error.hpp"
#include "featscope/binary_io.hpp"
#include "featscope/metrics.hpp"
#include "featscope/rng.hpp"
#include "featscope/synthetic.hpp"
#include "temp_dir.hpp"

using namespace featscope;

TEST_CASE("hoyer matches the closed form") {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x(2 + rng.uniform_index(20));
    for (auto& v : x) v = rng.uniform();
    double l1 = 0.0, l2 = 0.0;
    for (double v : x) l1 += v, l2 += v * v;
    const double n = static_cast<double>(x.size());
    CHECK(hoyer(x) == doctest::Approx((std::sqrt(n) - l1 / std::sqrt(l2)) / (std::sqrt(n) - 1.0)).epsilon(1e-12));
  }
}

TEST_CASE("hoyer rejects degenerate input") {
  CHECK_ERROR_CODE(hoyer(std::vector<double>{1.0}), ErrorCode::kParameter);
  CHECK_ERROR_CODE(hoyer(std::vector<double>{0.0, 0.0}), ErrorCode::kDegenerateHeatmap);
  CHECK_ERROR_CODE(hoyer(std::vector<double>{1.0, -1.0}), ErrorCode::kData);
}

TEST_CASE("feature locality skips all-zero maps") {
  const std::vector<Heatmap> maps{Heatmap(2, 2, {1, 0, 0, 0}), Heatmap(2, 2, {0, 0, 0, 0}), Heatmap(2, 2, {1, 1, 1, 1})};
  const auto r = feature_locality(maps);
  CHECK(r.value == doctest::Approx(0.5));
  CHECK(r.skipped == 1);
  CHECK_ERROR_CODE(feature_locality(std::span(maps).subspan(1, 1)), ErrorCode::kDegenerateFeature);
  CHECK(model_locality(std::vector<double>{0.2, 0.4}) == doctest::Approx(0.3));
}

TEST_CASE("compressibility orders smooth below noisy maps and stays in (0, 1]") {
  const Heatmap flat(32, 32, std::vector<double>(1024, 3.0));
  const Heatmap smooth = make_pattern_heatmap(32, 32, 16, 16, 1);
  Rng rng(4);
  std::vector<double> v(1024);
  for (auto& x : v) x = rng.uniform();
  const Heatmap noise(32, 32, v);
  const double cf = compressibility(flat), cs = compressibility(smooth), cn = compressibility(noise);
  CHECK(cf < cs);
  CHECK(cs < cn);
  CHECK(cn <= 1.0);
  CHECK(cf > 0.0);
  CHECK(quantize_u8(flat) == std::vector<unsigned char>(1024, 0));
  const auto q = quantize_u8(Heatmap(3, 1, {1.0, 2.0, 3.0}));
  CHECK(q == std::vector<unsigned char>{0, 128, 255});
}

TEST_CASE("odd one out leaves out the item outside the closest pair") {
  const EmbeddingVector a{1, 0}, b{0.9, 0.1}, c{0, 1};
  CHECK(odd_one_out(a, b, c) == 2);
  CHECK(odd_one_out(c, a, b) == 0);
  CHECK(odd_one_out(a, c, b) == 1);
  CHECK(odd_one_out(a, a, a) == 2);  // ties keep the first pair
  const std::map<std::string, EmbeddingVector> emb{{"x", a}, {"y", b}, {"z", c}};
  const auto trips = parse_triplets_csv("item_a,item_b,item_c,human_choice\nx,y,z,2\nz,x,y,1\n");
  REQUIRE(trips.size() == 2);
  CHECK(odd_one_out_accuracy(trips, emb) == 0.5);
  CHECK_ERROR_CODE(parse_triplets_csv("a,b,c\n"), ErrorCode::kData);
  const std::vector<Triplet> unknown{{{"x", "y", "w"}, 0}};
  CHECK_ERROR_CODE(odd_one_out_accuracy(unknown, emb), ErrorCode::kData);
}

TEST_CASE("embedding table pairs ACT1 rows with ids") {
  testing::TempDir dir;
  io::save_activations(dir / "emb.act", Matrix(2, 2, std::vector<double>{1, 2, 3, 4}));
  io::write_file(dir / "ids.json", R"(["p", "q"])");
  const auto t = load_embedding_table(dir / "emb.act", dir / "ids.json");
  CHECK(t.at("q") == EmbeddingVector{3, 4});
  io::write_file(dir / "ids.json", R"(["p"])");
  CHECK_ERROR_CODE(load_embedding_table(dir / "emb.act", dir / "ids.json"), ErrorCode::kData);
}

TEST_CASE("metric table CSV round-trip") {
  MetricTable t;
  t.set("m1", "locality", 0.25);
  t.set("m2", "locality", 1.0 / 3.0);
  t.set("m2", "compressibility", 0.5);
  const MetricTable back = MetricTable::parse_csv(t.to_csv());
  CHECK(back.to_csv() == t.to_csv());
  CHECK(back.get("m2", "locality") == 1.0 / 3.0);
  CHECK(!back.get("m1", "compressibility"));
  CHECK(back.metrics() == std::vector<std::string>{"compressibility", "locality"});
  CHECK_ERROR_CODE(MetricTable::parse_csv("model,metric,value\nm,a,1\nm,a,2\n"), ErrorCode::kData);
  CHECK_ERROR_CODE(t.set("m", "x", INFINITY), ErrorCode::kData);
}
