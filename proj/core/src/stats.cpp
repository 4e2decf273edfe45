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

#include "featscope/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numeric>

#include "featscope/error.hpp"

namespace featscope {

namespace {

struct Pooled {
  std::vector<double> ranks;       // pooled midranks, group-major order
  std::vector<std::size_t> sizes;  // per group
  double ties = 0.0;
  std::size_t n = 0;
};

Pooled pool(const ScoreGroups& groups) {
  if (groups.size() < 2) fail(ErrorCode::kData, "rank tests need at least two groups");
  Pooled p;
  std::vector<double> all;
  for (const auto& g : groups) {
    if (g.scores.empty()) fail(ErrorCode::kData, "group '" + g.label + "' is empty");
    for (double v : g.scores) {
      if (!std::isfinite(v)) fail(ErrorCode::kData, "group '" + g.label + "' has a non-finite score");
    }
    all.insert(all.end(), g.scores.begin(), g.scores.end());
    p.sizes.push_back(g.scores.size());
  }
  p.n = all.size();
  p.ranks = midranks(all);
  p.ties = tie_sum(all);
  return p;
}

std::vector<double> mean_ranks(const Pooled& p) {
  std::vector<double> out;
  std::size_t offset = 0;
  for (auto size : p.sizes) {
    double s = 0.0;
    for (std::size_t i = 0; i < size; ++i) s += p.ranks[offset + i];
    out.push_back(s / static_cast<double>(size));
    offset += size;
  }
  return out;
}

double correlation(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) fail(ErrorCode::kUndefinedCorrelation, "an input has zero variance");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double t_approx_p(double r, std::size_t n) {
  if (std::abs(r) >= 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = r * std::sqrt(df / (1.0 - r * r));
  boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorCode::kData, "correlation inputs differ in length");
  if (x.size() < 3) fail(ErrorCode::kData, "correlation needs n >= 3");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) fail(ErrorCode::kData, "correlation inputs must be finite");
  }
}

}  // namespace

std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double tie_sum(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double s = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    s += t * t * t - t;
    i = j;
  }
  return s;
}

TestResult kruskal_wallis(const ScoreGroups& groups) {
  const Pooled p = pool(groups);
  if (p.n < 3) fail(ErrorCode::kData, "Kruskal-Wallis needs N >= 3");
  const double n = static_cast<double>(p.n);
  TestResult r;
  r.method = "kruskal-wallis";
  r.df = static_cast<double>(groups.size() - 1);
  const double correction = 1.0 - p.ties / (n * n * n - n);
  if (correction <= 0.0) {
    r.statistic = 0.0;
    r.p_value = 1.0;
    return r;
  }
  const auto means = mean_ranks(p);
  double s = 0.0;
  for (std::size_t g = 0; g < means.size(); ++g) {
    const double d = means[g] - (n + 1.0) / 2.0;
    s += static_cast<double>(p.sizes[g]) * d * d;
  }
  r.statistic = 12.0 / (n * (n + 1.0)) * s / correction;
  r.p_value = chi_square_sf(r.statistic, *r.df);
  return r;
}

std::vector<double> holm_adjust(std::span<const double> p_values) {
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<double> adjusted(m);
  double running = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double v = std::min(1.0, static_cast<double>(m - i) * p_values[order[i]]);
    running = std::max(running, v);
    adjusted[order[i]] = running;
  }
  return adjusted;
}

std::vector<PairwiseResult> dunn_posthoc(const ScoreGroups& groups) {
  const Pooled p = pool(groups);
  if (p.n < 3) fail(ErrorCode::kData, "Dunn's test needs N >= 3");
  const double n = static_cast<double>(p.n);
  const auto means = mean_ranks(p);
  const double base = n * (n + 1.0) / 12.0 - p.ties / (12.0 * (n - 1.0));
  std::vector<PairwiseResult> out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      PairwiseResult r;
      r.group_a = groups[i].label;
      r.group_b = groups[j].label;
      const double se = std::sqrt(base * (1.0 / static_cast<double>(p.sizes[i]) + 1.0 / static_cast<double>(p.sizes[j])));
      const double diff = means[i] - means[j];
      if (se > 0.0) {
        r.z = diff / se;
        r.p_raw = normal_two_sided_p(r.z);
      }
      out.push_back(r);
    }
  }
  std::vector<double> raw;
  for (const auto& r : out) raw.push_back(r.p_raw);
  const auto adj = holm_adjust(raw);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].p_adjusted = adj[i];
  return out;
}

TestResult spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  TestResult r;
  r.statistic = correlation(rx, ry);
  const std::size_t n = x.size();
  if (n <= 8) {
    r.method = "exact-permutation";
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<double> shuffled(n);
    const double observed = std::abs(r.statistic) - 1e-12;
    std::size_t extreme = 0, total = 0;
    do {
      for (std::size_t i = 0; i < n; ++i) shuffled[i] = ry[perm[i]];
      if (std::abs(correlation(rx, shuffled)) >= observed) ++extreme;
      ++total;
    } while (std::next_permutation(perm.begin(), perm.end()));
    r.p_value = static_cast<double>(extreme) / static_cast<double>(total);
  } else {
    r.method = "t-approximation";
    r.p_value = t_approx_p(r.statistic, n);
  }
  return r;
}

TestResult pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  TestResult r;
  r.method = "pearson-t";
  r.statistic = correlation(x, y);
  r.p_value = t_approx_p(r.statistic, x.size());
  return r;
}

double chi_square_sf(double x, double df) {
  if (!(df > 0.0)) fail(ErrorCode::kParameter, "chi-square df must be positive");
  if (!std::isfinite(x)) fail(ErrorCode::kParameter, "chi-square statistic must be finite");
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(df / 2.0, x / 2.0);
}

double normal_two_sided_p(double z) { return std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0))); }

double median(std::vector<double> values) {
  if (values.empty()) fail(ErrorCode::kData, "median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<ModelSummary> model_score(std::span<const ResponseScore> responses, Measure measure) {
  if (responses.empty()) fail(ErrorCode::kData, "model score needs at least one scored response");
  struct Acc {
    std::map<std::string, std::pair<double, std::size_t>> features;
    std::size_t responses = 0;
    double confidence_sum = 0.0;
    std::size_t confidence_n = 0;
  };
  std::map<std::string, Acc> per_model;
  for (const auto& r : responses) {
    if (!std::isfinite(r.score)) fail(ErrorCode::kData, "non-finite response score");
    auto& acc = per_model[r.model];
    auto& f = acc.features[r.feature];
    f.first += r.score;
    ++f.second;
    ++acc.responses;
    if (r.confidence) {
      acc.confidence_sum += *r.confidence;
      ++acc.confidence_n;
    }
  }
  std::vector<ModelSummary> out;
  for (const auto& [model, acc] : per_model) {
    ModelSummary s;
    s.model = model;
    s.responses = acc.responses;
    std::vector<double> scores;
    for (const auto& [feature, sum] : acc.features) {
      const double mean = sum.first / static_cast<double>(sum.second);
      s.feature_scores[feature] = mean;
      scores.push_back(mean);
    }
    s.median = median(scores);
    s.reported = measure == Measure::kLocalizability ? 100.0 * s.median : s.median;
    if (acc.confidence_n > 0) s.mean_confidence = acc.confidence_sum / static_cast<double>(acc.confidence_n);
    out.push_back(std::move(s));
  }
  return out;
}

double baseline_margin(double accuracy_percent, double baseline_percent) {
  auto ok = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 100.0; };
  if (!ok(accuracy_percent) || !ok(baseline_percent)) fail(ErrorCode::kParameter, "percentages must lie in [0, 100]");
  return accuracy_percent - baseline_percent;
}

}  // namespace featscope
