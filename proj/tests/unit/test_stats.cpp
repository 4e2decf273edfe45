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
#include "featscope/rng.hpp"
#include "featscope/stats.hpp"
#include "oracles.hpp"

using namespace featscope;

TEST_CASE("midranks average tied positions") {
  CHECK(midranks(std::vector<double>{3, 1, 3, 2}) == std::vector<double>{3.5, 1, 3.5, 2});
  CHECK(midranks(std::vector<double>{5, 5, 5}) == std::vector<double>{2, 2, 2});
  CHECK(tie_sum(std::vector<double>{1, 1, 2, 2, 2}) == 6.0 + 24.0);
  Rng rng(1);
  std::vector<double> v(40);
  for (auto& x : v) x = static_cast<double>(rng.uniform_index(7));
  CHECK(midranks(v) == oracle::ranks(v));
}

TEST_CASE("Kruskal-Wallis on the textbook fixture") {
  const auto r = kruskal_wallis({{"a", {1, 2, 3}}, {"b", {4, 5, 6}}});
  CHECK(r.statistic == doctest::Approx(27.0 / 7.0).epsilon(1e-12));
  REQUIRE(r.df);
  CHECK(*r.df == 1.0);
  CHECK(r.p_value == doctest::Approx(std::erfc(std::sqrt(27.0 / 14.0))).epsilon(1e-10));
}

TEST_CASE("Kruskal-Wallis matches the tie-corrected rank oracle") {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    ScoreGroups g(3);
    std::vector<std::vector<double>> raw;
    for (auto& grp : g) {
      grp.label = std::to_string(raw.size());
      grp.scores.resize(3 + rng.uniform_index(5));
      for (auto& v : grp.scores) v = static_cast<double>(rng.uniform_index(6));
      raw.push_back(grp.scores);
    }
    CHECK(kruskal_wallis(g).statistic == doctest::Approx(oracle::kruskal_h(raw)).epsilon(1e-12));
  }
}

TEST_CASE("Kruskal-Wallis edge cases") {
  const auto all_tied = kruskal_wallis({{"a", {2, 2}}, {"b", {2, 2}}});
  CHECK(all_tied.statistic == 0.0);
  CHECK(all_tied.p_value == 1.0);
  CHECK_ERROR_CODE(kruskal_wallis({{"a", {1, 2}}}), ErrorCode::kData);
  CHECK_ERROR_CODE(kruskal_wallis({{"a", {1, 2}}, {"b", {}}}), ErrorCode::kData);
  CHECK_ERROR_CODE(kruskal_wallis({{"a", {1}}, {"b", {2}}}), ErrorCode::kData);
}

TEST_CASE("Dunn z is signed by mean rank and Holm-adjusted") {
  const auto d = dunn_posthoc({{"a", {1, 2, 3}}, {"b", {4, 5, 6}}, {"c", {7, 8, 9}}});
  REQUIRE(d.size() == 3);
  CHECK(d[0].group_a == "a");
  CHECK(d[0].group_b == "b");
  // mean ranks 2, 5, 8; SE = sqrt(9 * 10 / 12 * (2 / 3)) = sqrt(5)
  CHECK(d[0].z == doctest::Approx(-3.0 / std::sqrt(5.0)).epsilon(1e-12));
  CHECK(d[1].z == doctest::Approx(-6.0 / std::sqrt(5.0)).epsilon(1e-12));
  CHECK(d[0].p_raw == doctest::Approx(normal_two_sided_p(3.0 / std::sqrt(5.0))));
  const auto holm = holm_adjust(std::vector<double>{d[0].p_raw, d[1].p_raw, d[2].p_raw});
  for (std::size_t i = 0; i < 3; ++i) CHECK(d[i].p_adjusted == holm[i]);
}

TEST_CASE("Holm step-down is monotone and capped") {
  const auto a = holm_adjust(std::vector<double>{0.01, 0.04, 0.03});
  CHECK(a[0] == doctest::Approx(0.03));
  CHECK(a[1] == doctest::Approx(0.06));
  CHECK(a[2] == doctest::Approx(0.06));
  const auto b = holm_adjust(std::vector<double>{0.5, 0.9});
  CHECK(b[0] == 1.0);
  CHECK(b[1] == 1.0);
}

TEST_CASE("Spearman agrees with the permutation oracle for small n") {
  Rng rng(3);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 3 + rng.uniform_index(5);
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = static_cast<double>(rng.uniform_index(50));
    for (auto& v : y) v = static_cast<double>(rng.uniform_index(50));
    try {
      const auto r = spearman(x, y);
      CHECK(r.method == "exact-permutation");
      CHECK(r.statistic == doctest::Approx(oracle::spearman_rho(x, y)).epsilon(1e-12));
      CHECK(r.p_value == doctest::Approx(oracle::spearman_exact_p(x, y)).epsilon(1e-12));
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kUndefinedCorrelation);
    }
  }
}

TEST_CASE("Spearman uses the t approximation above eight points") {
  std::vector<double> x, y;
  for (int i = 0; i < 12; ++i) x.push_back(i), y.push_back((i * 7) % 12);
  const auto s = spearman(x, y);
  CHECK(s.method == "t-approximation");
  const auto p = pearson(oracle::ranks(x), oracle::ranks(y));
  CHECK(s.statistic == doctest::Approx(p.statistic).epsilon(1e-12));
  CHECK(s.p_value == doctest::Approx(p.p_value).epsilon(1e-12));
}

TEST_CASE("correlations reject constant and short inputs") {
  CHECK_ERROR_CODE(spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), ErrorCode::kUndefinedCorrelation);
  CHECK_ERROR_CODE(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}), ErrorCode::kData);
  CHECK_ERROR_CODE(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2}), ErrorCode::kData);
}

TEST_CASE("pearson matches the sample correlation oracle") {
  const std::vector<double> x{1, 2, 4, 7, 11}, y{2, 1, 5, 6, 14};
  CHECK(pearson(x, y).statistic == doctest::Approx(oracle::pearson(x, y)).epsilon(1e-12));
}

TEST_CASE("chi-square survival against closed forms for even df") {
  for (double x : {0.1, 1.0, 2.5, 10.0, 40.0}) {
    CHECK(chi_square_sf(x, 2) == doctest::Approx(std::exp(-x / 2)).epsilon(1e-12));
    CHECK(chi_square_sf(x, 4) == doctest::Approx(std::exp(-x / 2) * (1 + x / 2)).epsilon(1e-12));
  }
  CHECK(chi_square_sf(0.0, 3) == 1.0);
  CHECK_ERROR_CODE(chi_square_sf(1.0, 0.0), ErrorCode::kParameter);
}

TEST_CASE("median") {
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK_ERROR_CODE(median({}), ErrorCode::kData);
}

TEST_CASE("model score is the median of per-feature means") {
  const std::vector<ResponseScore> rs{
      {"m", "f1", 1.0, {}}, {"m", "f1", 0.0, {}}, {"m", "f2", 0.9, {}}, {"m", "f3", 0.2, {}}, {"n", "g", 0.7, 4}};
  const auto s = model_score(rs, Measure::kLocalizability);
  REQUIRE(s.size() == 2);
  CHECK(s[0].model == "m");
  CHECK(s[0].feature_scores.at("f1") == 0.5);
  CHECK(s[0].median == 0.5);
  CHECK(s[0].reported == 50.0);
  CHECK(s[0].responses == 4);
  CHECK(!s[0].mean_confidence);
  const auto n = model_score(rs, Measure::kNameability);
  CHECK(n[1].reported == 0.7);
  CHECK(n[1].mean_confidence == 4.0);
}

TEST_CASE("baseline margin") {
  CHECK(baseline_margin(80, 53) == 27.0);
  CHECK(baseline_margin(83, 60) == 23.0);
  CHECK_ERROR_CODE(baseline_margin(101, 3), ErrorCode::kParameter);
}
