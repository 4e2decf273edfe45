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
#include <optional>
#include <span>
#include <vector>

#include "featscope/matrix.hpp"

namespace featscope {

/// Raw parameter block of a TopK sparse autoencoder. Decoder row f is the
/// dictionary direction of feature f.
struct SaeParams {
  std::size_t dim = 0;
  std::size_t num_features = 0;
  std::size_t k = 0;
  Matrix w_enc;  // num_features x dim
  Matrix w_dec;  // num_features x dim, unit-norm rows
  std::vector<double> b_pre;
  std::vector<double> b_enc;
};

/// Immutable, validated SAE. Safe to share across threads.
class SaeModel {
 public:
  /// Validates shapes, finiteness, 1 <= k <= F and unit decoder rows
  /// (tolerance `norm_tolerance`).
  explicit SaeModel(SaeParams params, double norm_tolerance = 1e-6);

  std::size_t dim() const noexcept { return p_.dim; }
  std::size_t num_features() const noexcept { return p_.num_features; }
  std::size_t k() const noexcept { return p_.k; }
  const Matrix& w_enc() const noexcept { return p_.w_enc; }
  const Matrix& w_dec() const noexcept { return p_.w_dec; }
  const std::vector<double>& b_pre() const noexcept { return p_.b_pre; }
  const std::vector<double>& b_enc() const noexcept { return p_.b_enc; }
  std::span<const double> decoder_row(std::size_t f) const { return p_.w_dec.row(f); }
  const SaeParams& params() const noexcept { return p_; }

 private:
  SaeParams p_;
};

/// Sparse latent of one token: strictly increasing indices, positive values.
struct SparseCode {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  std::size_t num_features = 0;

  std::size_t size() const noexcept { return indices.size(); }
  bool empty() const noexcept { return indices.empty(); }
};

/// ReLU-then-TopK over p = W_enc (x - b_pre) + b_enc. Ties go to the lower
/// feature index.
SparseCode sae_encode(const SaeModel& model, std::span<const double> x);

/// TopK selection on an explicit pre-activation vector.
SparseCode topk_positive(std::span<const double> pre_activations, std::size_t k);

std::vector<double> sae_decode(const SaeModel& model, const SparseCode& z);

struct SaeTrainConfig {
  std::size_t expansion_factor = 10;
  std::size_t k = 32;
  std::size_t epochs = 50;
  double learning_rate = 0.05;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
};

struct SaeTrainResult {
  SaeModel model;
  /// Full-data loss before training followed by one entry per epoch.
  std::vector<double> losses;
  std::size_t revived_features = 0;
  std::size_t rejected_epochs = 0;
};

/// Seeded initialization: Gaussian unit-norm decoder rows, tied encoder,
/// zero encoder bias, b_pre at the data mean.
SaeModel init_sae(const ActivationMatrix& data, std::size_t num_features, std::size_t k,
                  std::uint64_t seed);

/// Mini-batch gradient descent on mean squared reconstruction error under the
/// TopK constraint. Decoder rows are renormalized after every update; features
/// that never fire in an epoch are re-seeded from the worst-reconstructed
/// samples. An epoch whose full-data loss exceeds the previous one is rolled
/// back and the step size halved, so the reported loss curve never rises.
SaeTrainResult train_sae(const ActivationMatrix& data, const SaeTrainConfig& config);

/// Mean over rows and dimensions of the squared reconstruction error.
double reconstruction_mse(const SaeModel& model, const ActivationMatrix& data);

/// Fraction of images in which each feature is active on at least one token.
std::vector<double> activation_frequency(const SaeModel& model,
                                         std::span<const ActivationMatrix> images);

/// true = kept (frequency <= threshold). threshold must lie in (0, 1].
std::vector<bool> filter_dense(std::span<const double> frequencies, double threshold);

}  // namespace featscope
