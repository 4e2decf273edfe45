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
#include "featscope/bootstrap.hpp"
#include "featscope/synthetic.hpp"

using namespace featscope;

TEST_CASE("bootstrap results do not depend on the thread count") {
  const PilotFixture fx = make_pilot();
  const auto one = bootstrap_breadth(fx.unit_scores, 20, 500, 7, 1);
  const auto four = bootstrap_breadth(fx.unit_scores, 20, 500, 7, 4);
  CHECK(one.statistics == four.statistics);
  CHECK(one.sd == four.sd);
  const auto d1 = bootstrap_depth(fx.records, 5, 2, 300, 7, 1);
  const auto d3 = bootstrap_depth(fx.records, 5, 2, 300, 7, 3);
  CHECK(d1.statistics == d3.statistics);
}

TEST_CASE("bootstrap is seeded") {
  const PilotFixture fx = make_pilot();
  CHECK(bootstrap_breadth(fx.unit_scores, 10, 100, 1).statistics == bootstrap_breadth(fx.unit_scores, 10, 100, 1).statistics);
  CHECK(bootstrap_breadth(fx.unit_scores, 10, 100, 1).statistics != bootstrap_breadth(fx.unit_scores, 10, 100, 2).statistics);
}

TEST_CASE("pilot fixture has the advertised spread") {
  const PilotFixture fx = make_pilot(80, 0.1);
  double mean = 0.0;
  for (double v : fx.unit_scores) mean += v / 80.0;
  double ss = 0.0;
  for (double v : fx.unit_scores) ss += (v - mean) * (v - mean);
  CHECK(std::sqrt(ss / 80.0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(mean == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("a single-valued pool has zero spread") {
  const std::vector<double> same(10, 0.4);
  const auto b = bootstrap_breadth(same, 5, 50, 3);
  CHECK(b.sd < 1e-12);
  CHECK(b.mean == doctest::Approx(0.4));
}

TEST_CASE("depth design validates its inputs") {
  const std::vector<PilotRecord> rs{{"f", 1, 1, 0.5}, {"f", 2, 1, 0.7}, {"g", 3, 1, 0.2}};
  CHECK_ERROR_CODE(bootstrap_depth(rs, 2, 1, 10, 1), ErrorCode::kData);  // g has nothing on its first 2 images
  CHECK_ERROR_CODE(bootstrap_depth(rs, 0, 1, 10, 1), ErrorCode::kParameter);
  CHECK_ERROR_CODE(bootstrap_depth(rs, 3, 1, 1, 1), ErrorCode::kParameter);
  const std::vector<PilotRecord> bad{{"f", 0, 1, 0.5}};
  CHECK_ERROR_CODE(bootstrap_depth(bad, 1, 1, 10, 1), ErrorCode::kData);
  CHECK_ERROR_CODE(bootstrap_breadth(std::vector<double>{}, 1, 10, 1), ErrorCode::kData);
}

TEST_CASE("pilot JSON lines") {
  const auto rs = parse_pilot_jsonl(R"({"feature":"a","image_rank":2,"trial":1,"score":0.25}

{"feature":7,"image_rank":1,"trial":3,"score":1}
)");
  REQUIRE(rs.size() == 2);
  CHECK(rs[0].image_rank == 2);
  CHECK(rs[1].feature == "7");
  CHECK(rs[1].trial == 3);
  CHECK_ERROR_CODE(parse_pilot_jsonl("{\"feature\":\"a\"}\n"), ErrorCode::kData);
}
