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

#include "featscope/probe.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "featscope/error.hpp"
#include "featscope/rng.hpp"

namespace featscope {

std::vector<double> LinearProbe::logits(std::span<const double> x) const {
  if (x.size() != dim()) fail(ErrorCode::kInputShape, "probe input has wrong dimensionality");
  std::vector<double> out(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) out[c] = dot(weights.row(c), x) + bias[c];
  return out;
}

std::size_t LinearProbe::predict(std::span<const double> x) const {
  auto l = logits(x);
  return static_cast<std::size_t>(std::max_element(l.begin(), l.end()) - l.begin());
}

LinearProbe train_linear_probe(const Matrix& features, std::span<const std::size_t> labels,
                               const ProbeTrainConfig& config) {
  validate_activations(features);
  if (labels.size() != features.rows()) fail(ErrorCode::kInputShape, "one label per feature row required");
  std::size_t num_classes = config.num_classes;
  if (num_classes == 0) num_classes = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::size_t> counts(num_classes, 0);
  for (auto y : labels) {
    if (y >= num_classes) fail(ErrorCode::kConfig, "label " + std::to_string(y) + " >= num_classes");
    ++counts[y];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] == 0) fail(ErrorCode::kConfig, "class " + std::to_string(c) + " has no samples");
  }

  const std::size_t dim = features.cols();
  LinearProbe probe;
  probe.num_classes = num_classes;
  probe.weights = Matrix(num_classes, dim);
  probe.bias.assign(num_classes, 0.0);
  Rng rng(config.seed);
  for (double& w : probe.weights.data()) w = 0.01 * rng.normal();

  const double n = static_cast<double>(features.rows());
  Matrix grad_w(num_classes, dim);
  std::vector<double> grad_b(num_classes);
  for (std::size_t step = 0; step < config.steps; ++step) {
    std::fill(grad_w.data().begin(), grad_w.data().end(), 0.0);
    std::fill(grad_b.begin(), grad_b.end(), 0.0);
    for (std::size_t r = 0; r < features.rows(); ++r) {
      auto x = features.row(r);
      auto l = probe.logits(x);
      const double m = *std::max_element(l.begin(), l.end());
      double z = 0.0;
      for (double& v : l) {
        v = std::exp(v - m);
        z += v;
      }
      for (std::size_t c = 0; c < num_classes; ++c) {
        const double g = (l[c] / z - (labels[r] == c ? 1.0 : 0.0)) / n;
        auto gw = grad_w.row(c);
        for (std::size_t j = 0; j < dim; ++j) gw[j] += g * x[j];
        grad_b[c] += g;
      }
    }
    for (std::size_t i = 0; i < grad_w.data().size(); ++i) {
      probe.weights.data()[i] -= config.learning_rate * grad_w.data()[i];
    }
    for (std::size_t c = 0; c < num_classes; ++c) probe.bias[c] -= config.learning_rate * grad_b[c];
  }
  return probe;
}

double probe_accuracy(const LinearProbe& probe, const Matrix& features,
                      std::span<const std::size_t> labels) {
  if (features.rows() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < features.rows(); ++r) correct += probe.predict(features.row(r)) == labels[r];
  return static_cast<double>(correct) / static_cast<double>(features.rows());
}

std::vector<FeatureImportance> feature_importance(const SparseCode& z, const SaeModel& model,
                                                  const LinearProbe& probe,
                                                  std::optional<std::size_t> cls) {
  if (probe.dim() != model.dim()) fail(ErrorCode::kInputShape, "probe and SAE dims differ");
  if (z.empty()) return {};
  const std::size_t c = cls ? *cls : probe.predict(sae_decode(model, z));
  if (c >= probe.num_classes) fail(ErrorCode::kParameter, "class index out of range");
  auto w = probe.weights.row(c);
  std::vector<FeatureImportance> out;
  out.reserve(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const auto f = z.indices[i];
    if (f >= model.num_features()) fail(ErrorCode::kInvalidCode, "feature index out of range");
    out.push_back({f, z.values[i] * dot(w, model.decoder_row(f))});
  }
  return out;
}

std::vector<FeatureImportance> image_importance(const ActivationMatrix& tokens,
                                                const SaeModel& model, const LinearProbe& probe,
                                                std::optional<std::size_t> cls) {
  validate_activations(tokens);
  const double inv_t = 1.0 / static_cast<double>(tokens.rows());
  std::vector<SparseCode> codes;
  codes.reserve(tokens.rows());
  std::vector<double> pooled(model.dim(), 0.0);
  for (std::size_t t = 0; t < tokens.rows(); ++t) {
    codes.push_back(sae_encode(model, tokens.row(t)));
    auto recon = sae_decode(model, codes.back());
    for (std::size_t j = 0; j < pooled.size(); ++j) pooled[j] += recon[j] * inv_t;
  }
  const std::size_t c = cls ? *cls : probe.predict(pooled);
  std::map<std::uint32_t, double> sum;
  for (const auto& z : codes) {
    for (const auto& fi : feature_importance(z, model, probe, c)) sum[fi.feature] += fi.importance * inv_t;
  }
  std::vector<FeatureImportance> out;
  out.reserve(sum.size());
  for (const auto& [f, v] : sum) out.push_back({f, v});
  return out;
}

void ImportanceTable::set(const std::string& image, std::uint32_t feature, double importance) {
  if (!std::isfinite(importance)) fail(ErrorCode::kData, "importance must be finite");
  entries_[{image, feature}] = importance;
}

void ImportanceTable::add_image(const std::string& image, std::span<const FeatureImportance> entries) {
  for (const auto& e : entries) set(image, e.feature, e.importance);
}

std::vector<std::string> ImportanceTable::images() const {
  std::set<std::string> ids;
  for (const auto& [key, _] : entries_) ids.insert(key.first);
  return {ids.begin(), ids.end()};
}

std::map<std::uint32_t, double> ImportanceTable::aggregate() const {
  std::map<std::uint32_t, double> out;
  const auto n = static_cast<double>(images().size());
  for (const auto& [key, v] : entries_) out[key.second] += std::abs(v);
  for (auto& [_, v] : out) v /= n;
  return out;
}

}  // namespace featscope
