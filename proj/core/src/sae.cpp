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

#include "featscope/sae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "featscope/error.hpp"
#include "featscope/rng.hpp"

namespace featscope {

namespace {

void normalize_row(std::span<double> row) {
  const double n = norm2(row);
  if (n > 0.0) {
    for (double& v : row) v /= n;
  }
}

struct Gradients {
  Matrix w_enc;
  Matrix w_dec;
  std::vector<double> b_pre;
  std::vector<double> b_enc;

  explicit Gradients(const SaeParams& p)
      : w_enc(p.num_features, p.dim),
        w_dec(p.num_features, p.dim),
        b_pre(p.dim, 0.0),
        b_enc(p.num_features, 0.0) {}
};

SparseCode encode_params(const SaeParams& p, std::span<const double> x,
                         std::vector<double>& centered, std::vector<double>& pre) {
  centered.resize(p.dim);
  for (std::size_t i = 0; i < p.dim; ++i) centered[i] = x[i] - p.b_pre[i];
  pre.resize(p.num_features);
  for (std::size_t f = 0; f < p.num_features; ++f) {
    pre[f] = dot(p.w_enc.row(f), centered) + p.b_enc[f];
  }
  return topk_positive(pre, p.k);
}

void decode_params(const SaeParams& p, const SparseCode& z, std::vector<double>& out) {
  out.assign(p.b_pre.begin(), p.b_pre.end());
  for (std::size_t i = 0; i < z.size(); ++i) {
    auto d = p.w_dec.row(z.indices[i]);
    for (std::size_t j = 0; j < p.dim; ++j) out[j] += z.values[i] * d[j];
  }
}

// Per-sample squared error (sum over dims) for every row.
std::vector<double> sample_errors(const SaeParams& p, const ActivationMatrix& data,
                                  std::vector<std::vector<double>>* residuals = nullptr) {
  std::vector<double> errors(data.rows());
  std::vector<double> centered, pre, recon;
  if (residuals) residuals->assign(data.rows(), {});
  for (std::size_t r = 0; r < data.rows(); ++r) {
    auto x = data.row(r);
    SparseCode z = encode_params(p, x, centered, pre);
    decode_params(p, z, recon);
    double e = 0.0;
    for (std::size_t j = 0; j < p.dim; ++j) {
      const double d = x[j] - recon[j];
      e += d * d;
      recon[j] = d;
    }
    errors[r] = e;
    if (residuals) (*residuals)[r] = recon;
  }
  return errors;
}

double mean_loss(const std::vector<double>& errors, std::size_t dim) {
  double s = 0.0;
  for (double e : errors) s += e;
  return s / (static_cast<double>(errors.size()) * static_cast<double>(dim));
}

}  // namespace

SaeModel::SaeModel(SaeParams params, double norm_tolerance) : p_(std::move(params)) {
  if (p_.dim == 0 || p_.num_features == 0) fail(ErrorCode::kInputShape, "SAE needs dim >= 1 and F >= 1");
  if (p_.k < 1 || p_.k > p_.num_features) {
    fail(ErrorCode::kParameter, "SAE sparsity k=" + std::to_string(p_.k) + " outside [1, F]");
  }
  if (p_.w_enc.rows() != p_.num_features || p_.w_enc.cols() != p_.dim ||
      p_.w_dec.rows() != p_.num_features || p_.w_dec.cols() != p_.dim ||
      p_.b_pre.size() != p_.dim || p_.b_enc.size() != p_.num_features) {
    fail(ErrorCode::kInputShape, "SAE parameter shapes do not match dim/F");
  }
  if (!p_.w_enc.all_finite() || !p_.w_dec.all_finite()) fail(ErrorCode::kData, "SAE weights not finite");
  for (double v : p_.b_pre) {
    if (!std::isfinite(v)) fail(ErrorCode::kData, "SAE b_pre not finite");
  }
  for (double v : p_.b_enc) {
    if (!std::isfinite(v)) fail(ErrorCode::kData, "SAE b_enc not finite");
  }
  for (std::size_t f = 0; f < p_.num_features; ++f) {
    const double n = norm2(p_.w_dec.row(f));
    if (std::abs(n - 1.0) > norm_tolerance) {
      fail(ErrorCode::kData, "decoder row " + std::to_string(f) + " has norm " + std::to_string(n));
    }
  }
}

SparseCode topk_positive(std::span<const double> pre, std::size_t k) {
  std::vector<std::uint32_t> candidates;
  for (std::size_t f = 0; f < pre.size(); ++f) {
    if (pre[f] > 0.0) candidates.push_back(static_cast<std::uint32_t>(f));
  }
  auto better = [&](std::uint32_t a, std::uint32_t b) {
    return pre[a] > pre[b] || (pre[a] == pre[b] && a < b);
  };
  if (candidates.size() > k) {
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                      candidates.end(), better);
    candidates.resize(k);
  }
  std::sort(candidates.begin(), candidates.end());
  SparseCode z;
  z.num_features = pre.size();
  z.indices = candidates;
  z.values.reserve(candidates.size());
  for (auto f : candidates) z.values.push_back(pre[f]);
  return z;
}

SparseCode sae_encode(const SaeModel& model, std::span<const double> x) {
  if (x.size() != model.dim()) {
    fail(ErrorCode::kInputShape, "input has " + std::to_string(x.size()) + " dims, model expects " +
                                     std::to_string(model.dim()));
  }
  std::vector<double> centered, pre;
  return encode_params(model.params(), x, centered, pre);
}

std::vector<double> sae_decode(const SaeModel& model, const SparseCode& z) {
  if (z.indices.size() != z.values.size()) fail(ErrorCode::kInvalidCode, "code indices/values differ in length");
  for (auto f : z.indices) {
    if (f >= model.num_features()) {
      fail(ErrorCode::kInvalidCode, "feature index " + std::to_string(f) + " >= F=" +
                                        std::to_string(model.num_features()));
    }
  }
  std::vector<double> out;
  decode_params(model.params(), z, out);
  return out;
}

SaeModel init_sae(const ActivationMatrix& data, std::size_t num_features, std::size_t k,
                  std::uint64_t seed) {
  validate_activations(data);
  SaeParams p;
  p.dim = data.cols();
  p.num_features = num_features;
  p.k = k;
  p.w_dec = Matrix(num_features, p.dim);
  Rng rng(seed);
  for (std::size_t f = 0; f < num_features; ++f) {
    auto row = p.w_dec.row(f);
    for (double& v : row) v = rng.normal();
    normalize_row(row);
  }
  p.w_enc = p.w_dec;
  p.b_enc.assign(num_features, 0.0);
  p.b_pre.assign(p.dim, 0.0);
  for (std::size_t r = 0; r < data.rows(); ++r) {
    auto x = data.row(r);
    for (std::size_t j = 0; j < p.dim; ++j) p.b_pre[j] += x[j];
  }
  for (double& v : p.b_pre) v /= static_cast<double>(data.rows());
  return SaeModel(std::move(p));
}

double reconstruction_mse(const SaeModel& model, const ActivationMatrix& data) {
  if (data.cols() != model.dim()) fail(ErrorCode::kInputShape, "data dim does not match model");
  return mean_loss(sample_errors(model.params(), data), model.dim());
}

SaeTrainResult train_sae(const ActivationMatrix& data, const SaeTrainConfig& config) {
  validate_activations(data);
  if (config.expansion_factor == 0 || config.k == 0 || config.batch_size == 0 ||
      !(config.learning_rate > 0.0)) {
    fail(ErrorCode::kParameter, "SAE training config must be positive");
  }
  const std::size_t dim = data.cols();
  const std::size_t num_features = config.expansion_factor * dim;
  SaeModel initial = init_sae(data, num_features, config.k, config.seed);
  SaeParams p = initial.params();

  SaeTrainResult result{initial, {}, 0, 0};
  double loss = mean_loss(sample_errors(p, data), dim);
  result.losses.push_back(loss);

  Rng rng(mix_seed(config.seed, 1));
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), 0);
  double lr = config.learning_rate;
  std::size_t step = 0;
  std::vector<double> centered, pre, recon, err(dim);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const SaeParams snapshot = p;
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::size_t> fired(num_features, 0);

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 2.0 / (static_cast<double>(dim) * static_cast<double>(end - start));
      Gradients g(p);
      for (std::size_t b = start; b < end; ++b) {
        auto x = data.row(order[b]);
        SparseCode z = encode_params(p, x, centered, pre);
        decode_params(p, z, recon);
        for (std::size_t j = 0; j < dim; ++j) err[j] = recon[j] - x[j];
        for (std::size_t j = 0; j < dim; ++j) g.b_pre[j] += scale * err[j];
        for (std::size_t i = 0; i < z.size(); ++i) {
          const std::size_t f = z.indices[i];
          ++fired[f];
          auto d = p.w_dec.row(f);
          auto e = p.w_enc.row(f);
          const double delta = scale * dot(d, err);
          auto gd = g.w_dec.row(f);
          auto ge = g.w_enc.row(f);
          for (std::size_t j = 0; j < dim; ++j) {
            gd[j] += scale * z.values[i] * err[j];
            ge[j] += delta * centered[j];
            g.b_pre[j] -= delta * e[j];
          }
          g.b_enc[f] += delta;
        }
      }
      for (std::size_t f = 0; f < num_features; ++f) {
        auto d = p.w_dec.row(f);
        auto gd = g.w_dec.row(f);
        // Drop the radial component; renormalization would undo it anyway.
        const double radial = dot(d, gd);
        auto e = p.w_enc.row(f);
        auto ge = g.w_enc.row(f);
        for (std::size_t j = 0; j < dim; ++j) {
          d[j] -= lr * (gd[j] - radial * d[j]);
          e[j] -= lr * ge[j];
        }
        normalize_row(d);
        p.b_enc[f] -= lr * g.b_enc[f];
      }
      for (std::size_t j = 0; j < dim; ++j) p.b_pre[j] -= lr * g.b_pre[j];
      ++step;
      if (!p.w_enc.all_finite() || !p.w_dec.all_finite()) {
        fail(ErrorCode::kTraining, "parameters became non-finite at step " + std::to_string(step));
      }
    }

    std::vector<std::vector<double>> residuals;
    std::vector<double> errors = sample_errors(p, data, &residuals);
    std::vector<std::size_t> dead;
    for (std::size_t f = 0; f < num_features; ++f) {
      if (fired[f] == 0) dead.push_back(f);
    }
    if (!dead.empty()) {
      // Re-seeding is kept only when it does not raise the loss.
      const SaeParams trained = p;
      const std::vector<double> trained_errors = errors;
      std::vector<std::size_t> worst(data.rows());
      std::iota(worst.begin(), worst.end(), 0);
      std::stable_sort(worst.begin(), worst.end(),
                       [&](std::size_t a, std::size_t b) { return errors[a] > errors[b]; });
      std::size_t used = 0, revived = 0;
      for (std::size_t f : dead) {
        if (used >= worst.size()) break;
        const auto& res = residuals[worst[used++]];
        if (norm2(res) <= 0.0) continue;
        auto d = p.w_dec.row(f);
        std::copy(res.begin(), res.end(), d.begin());
        normalize_row(d);
        auto e = p.w_enc.row(f);
        std::copy(d.begin(), d.end(), e.begin());
        p.b_enc[f] = 0.0;
        ++revived;
      }
      errors = sample_errors(p, data);
      if (mean_loss(errors, dim) > mean_loss(trained_errors, dim)) {
        p = trained;
        errors = trained_errors;
      } else {
        result.revived_features += revived;
      }
    }

    const double new_loss = mean_loss(errors, dim);
    if (!std::isfinite(new_loss)) {
      fail(ErrorCode::kTraining, "loss became non-finite at step " + std::to_string(step));
    }
    if (new_loss > loss) {
      p = snapshot;
      lr *= 0.5;
      ++result.rejected_epochs;
    } else {
      loss = new_loss;
    }
    result.losses.push_back(loss);
  }

  result.model = SaeModel(std::move(p));
  return result;
}

std::vector<double> activation_frequency(const SaeModel& model,
                                         std::span<const ActivationMatrix> images) {
  if (images.empty()) fail(ErrorCode::kData, "activation_frequency needs at least one image");
  std::vector<double> freq(model.num_features(), 0.0);
  std::vector<char> seen(model.num_features());
  for (const auto& image : images) {
    if (image.cols() != model.dim()) fail(ErrorCode::kInputShape, "image activations do not match model dim");
    std::fill(seen.begin(), seen.end(), 0);
    for (std::size_t t = 0; t < image.rows(); ++t) {
      for (auto f : sae_encode(model, image.row(t)).indices) seen[f] = 1;
    }
    for (std::size_t f = 0; f < seen.size(); ++f) freq[f] += seen[f];
  }
  for (double& v : freq) v /= static_cast<double>(images.size());
  return freq;
}

std::vector<bool> filter_dense(std::span<const double> frequencies, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    fail(ErrorCode::kParameter, "dense threshold must lie in (0, 1]");
  }
  std::vector<bool> kept(frequencies.size());
  for (std::size_t f = 0; f < frequencies.size(); ++f) kept[f] = frequencies[f] <= threshold;
  return kept;
}

}  // namespace featscope
