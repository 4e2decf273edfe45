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

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace featscope {

struct TestResult {
  double statistic = 0.0;
  std::optional<double> df;
  double p_value = 1.0;
  std::string method;
};

struct ScoreGroup {
  std::string label;
  std::vector<double> scores;
};
using ScoreGroups = std::vector<ScoreGroup>;

/// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> midranks(std::span<const double> values);

/// Sum over tie groups of t^3 - t.
double tie_sum(std::span<const double> values);

/// Kruskal-Wallis H with tie correction; p from chi-square(k - 1). A sample
/// in which every observation ties gives H = 0, p = 1.
TestResult kruskal_wallis(const ScoreGroups& groups);

struct PairwiseResult {
  std::string group_a;
  std::string group_b;
  double z = 0.0;           // (mean rank a - mean rank b) / SE
  double p_raw = 1.0;       // two-sided normal
  double p_adjusted = 1.0;  // Holm
};

/// Dunn's pairwise comparisons on pooled midranks, Holm-adjusted. Pairs are
/// ordered (0,1), (0,2), ..., (k-2,k-1).
std::vector<PairwiseResult> dunn_posthoc(const ScoreGroups& groups);

/// Holm step-down adjustment with enforced monotonicity.
std::vector<double> holm_adjust(std::span<const double> p_values);

/// Spearman rho on midranks. Two-sided p by full permutation enumeration for
/// n <= 8 (method "exact-permutation"), else the t approximation
/// ("t-approximation").
TestResult spearman(std::span<const double> x, std::span<const double> y);

/// Pearson r with the t-approximation p value.
TestResult pearson(std::span<const double> x, std::span<const double> y);

/// Upper tail of chi-square(df) at x.
double chi_square_sf(double x, double df);

/// Two-sided standard normal p value for z.
double normal_two_sided_p(double z);

/// Median (mean of the two central values for even counts).
double median(std::vector<double> values);

enum class Measure { kLocalizability, kNameability };

struct ResponseScore {
  std::string model;
  std::string feature;
  double score = 0.0;
  std::optional<int> confidence;
};

struct ModelSummary {
  std::string model;
  std::map<std::string, double> feature_scores;  // mean over the feature's responses
  std::size_t responses = 0;
  double median = 0.0;    // raw scale
  double reported = 0.0;  // x100 for localizability, raw for nameability
  std::optional<double> mean_confidence;
};

/// Feature-level means, then the median across features, per model.
std::vector<ModelSummary> model_score(std::span<const ResponseScore> responses, Measure measure);

/// Percentage points above a model-specific baseline.
double baseline_margin(double accuracy_percent, double baseline_percent);

}  // namespace featscope
