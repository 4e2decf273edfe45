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

#include <algorithm>

#include "featscope/binary_io.hpp"
#include "featscope/cli/commands.hpp"
#include "featscope/error.hpp"
#include "featscope/probe.hpp"
#include "featscope/sae.hpp"

namespace featscope::cli {

using nlohmann::json;

namespace {

std::vector<std::filesystem::path> activation_paths(const CommandContext& ctx) {
  const json& a = ctx.config.contains("activations") ? ctx.config["activations"] : json();
  std::vector<std::string> refs;
  if (a.is_string()) {
    refs.push_back(a.get<std::string>());
  } else if (a.is_array() && !a.empty()) {
    refs = a.get<std::vector<std::string>>();
  } else {
    fail(ErrorCode::kConfig, "'activations' must be a path or a non-empty list of paths");
  }
  std::vector<std::filesystem::path> out;
  for (const auto& r : refs) {
    std::filesystem::path p(r);
    out.push_back(p.is_absolute() ? p : ctx.base_dir / p);
  }
  return out;
}

Matrix stack(const std::vector<ActivationMatrix>& parts) {
  std::size_t rows = 0;
  for (const auto& p : parts) rows += p.rows();
  Matrix out(rows, parts.front().cols());
  std::size_t r = 0;
  for (const auto& p : parts) {
    if (p.cols() != out.cols()) fail(ErrorCode::kInputShape, "activation files disagree on dim");
    for (std::size_t i = 0; i < p.rows(); ++i, ++r) std::copy(p.row(i).begin(), p.row(i).end(), out.row(r).begin());
  }
  return out;
}

}  // namespace

RunManifest cmd_train_sae(const CommandContext& ctx) {
  RunManifest m;
  m.command = "train-sae";
  const auto paths = activation_paths(ctx);
  std::vector<ActivationMatrix> parts;
  for (const auto& p : paths) {
    parts.push_back(io::load_activations(p));
    m.inputs.push_back(p.generic_string());
  }
  const Matrix data = stack(parts);

  SaeTrainConfig tc;
  tc.expansion_factor = ctx.config.value("expansion_factor", tc.expansion_factor);
  tc.k = ctx.config.value("k", tc.k);
  tc.epochs = ctx.config.value("epochs", tc.epochs);
  tc.learning_rate = ctx.config.value("learning_rate", tc.learning_rate);
  tc.batch_size = ctx.config.value("batch_size", tc.batch_size);
  tc.seed = ctx.seed_or(0);
  m.seeds["sae"] = tc.seed;
  ctx.note("training SAE on " + std::to_string(data.rows()) + " x " + std::to_string(data.cols()) + " activations");
  const SaeTrainResult result = train_sae(data, tc);

  std::filesystem::create_directories(ctx.out_dir);
  const auto sae_path = ctx.out_dir / "sae.bin";
  io::save_sae(sae_path, result.model);
  m.add_output(ctx.out_dir, sae_path);

  const auto [lo, hi] = std::minmax_element(result.losses.begin(), result.losses.end());
  m.details["loss"] = {{"initial", result.losses.front()},
                       {"final", result.losses.back()},
                       {"min", *lo},
                       {"max", *hi},
                       {"epochs", result.losses.size() - 1},
                       {"rejected_epochs", result.rejected_epochs},
                       {"revived_features", result.revived_features}};
  m.details["num_features"] = result.model.num_features();
  m.details["k"] = result.model.k();

  if (ctx.config.contains("probe")) {
    const json& pc = ctx.config["probe"];
    const auto labels = pc.at("labels").get<std::vector<std::size_t>>();
    Matrix features;
    if (labels.size() == parts.size()) {
      features = Matrix(parts.size(), data.cols());
      for (std::size_t i = 0; i < parts.size(); ++i) {
        for (std::size_t t = 0; t < parts[i].rows(); ++t) {
          for (std::size_t d = 0; d < data.cols(); ++d) features(i, d) += parts[i](t, d) / static_cast<double>(parts[i].rows());
        }
      }
    } else if (labels.size() == data.rows()) {
      features = data;
    } else {
      fail(ErrorCode::kConfig, "probe labels must match the number of activation files or rows");
    }
    ProbeTrainConfig pt;
    pt.steps = pc.value("steps", pt.steps);
    pt.learning_rate = pc.value("learning_rate", pt.learning_rate);
    pt.num_classes = pc.value("num_classes", pt.num_classes);
    pt.seed = tc.seed;
    m.seeds["probe"] = pt.seed;
    const LinearProbe probe = train_linear_probe(features, labels, pt);
    const auto probe_path = ctx.out_dir / "probe.bin";
    io::save_probe(probe_path, probe);
    m.add_output(ctx.out_dir, probe_path);
    m.details["probe_accuracy"] = probe_accuracy(probe, features, labels);
  }
  return m;
}

}  // namespace featscope::cli
