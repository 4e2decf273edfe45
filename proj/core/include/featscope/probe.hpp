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
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "featscope/matrix.hpp"
#include "featscope/sae.hpp"

namespace featscope {

/// Multinomial logistic head over frozen backbone features.
struct LinearProbe {
  std::size_t num_classes = 0;
  Matrix weights;  // num_classes x dim
  std::vector<double> bias;

  std::size_t dim() const noexcept { return weights.cols(); }
  std::vector<double> logits(std::span<const double> x) const;
  std::size_t predict(std::span<const double> x) const;
};

struct ProbeTrainConfig {
  /// 0 = infer as max label + 1.
  std::size_t num_classes = 0;
  std::size_t steps = 500;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;
};

/// Full-batch gradient descent on mean cross-entropy. Every class in
/// [0, num_classes) needs at least one sample.
LinearProbe train_linear_probe(const Matrix& features, std::span<const std::size_t> labels,
                               const ProbeTrainConfig& config);

double probe_accuracy(const LinearProbe& probe, const Matrix& features,
                      std::span<const std::size_t> labels);

struct FeatureImportance {
  std::uint32_t feature = 0;
  double importance = 0.0;
};

/// Gradient x Input of the class logit with respect to each active latent:
/// z_f * (w_c . d_f). Without a class, the probe's prediction on the
/// reconstruction is used.
std::vector<FeatureImportance> feature_importance(const SparseCode& z, const SaeModel& model,
                                                  const LinearProbe& probe,
                                                  std::optional<std::size_t> cls = std::nullopt);

/// Image-level attribution for a mean-pooled probe: each token contributes
/// 1/T of its Gradient x Input. The class defaults to the prediction on the
/// mean-pooled reconstruction.
std::vector<FeatureImportance> image_importance(const ActivationMatrix& tokens,
                                                const SaeModel& model, const LinearProbe& probe,
                                                std::optional<std::size_t> cls = std::nullopt);

/// (image id, feature) -> signed importance.
class ImportanceTable {
 public:
  void set(const std::string& image, std::uint32_t feature, double importance);
  void add_image(const std::string& image, std::span<const FeatureImportance> entries);

  const std::map<std::pair<std::string, std::uint32_t>, double>& entries() const noexcept {
    return entries_;
  }
  std::vector<std::string> images() const;
  bool empty() const noexcept { return entries_.empty(); }

  /// Mean |importance| per feature over all images in the table (absent
  /// entries count as zero).
  std::map<std::uint32_t, double> aggregate() const;

 private:
  std::map<std::pair<std::string, std::uint32_t>, double> entries_;
};

}  // namespace featscope
