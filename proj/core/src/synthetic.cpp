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

#include "featscope/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "featscope/binary_io.hpp"
#include "featscope/error.hpp"
#include "featscope/rng.hpp"
#include "featscope/stimulus.hpp"

namespace featscope {

using nlohmann::json;

namespace {

std::string padded(std::size_t n, int width = 3) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, n);
  return buf;
}

}  // namespace

DictionaryFixture make_dictionary_fixture(std::size_t atoms, std::size_t dim, std::size_t k, std::size_t samples,
                                          std::uint64_t seed) {
  if (atoms == 0 || dim == 0 || k == 0 || k > atoms) fail(ErrorCode::kParameter, "invalid dictionary fixture shape");
  Rng rng(seed);
  DictionaryFixture fx{Matrix(samples, dim), Matrix(atoms, dim)};
  for (std::size_t a = 0; a < atoms; ++a) {
    auto row = fx.atoms.row(a);
    for (auto& v : row) v = rng.normal();
    const double n = norm2(row);
    for (auto& v : row) v /= n;
  }
  std::vector<std::size_t> order(atoms);
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t a = 0; a < atoms; ++a) order[a] = a;
    rng.shuffle(std::span<std::size_t>(order));
    auto x = fx.data.row(s);
    for (std::size_t j = 0; j < k; ++j) {
      const double c = 0.5 + rng.uniform();
      const auto atom = fx.atoms.row(order[j]);
      for (std::size_t d = 0; d < dim; ++d) x[d] += c * atom[d];
    }
  }
  return fx;
}

Heatmap make_pattern_heatmap(std::size_t width, std::size_t height, std::size_t cx, std::size_t cy,
                             std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(width * height);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t y = 0; y < height; ++y) {
    const double cyv = std::cos(two_pi * (static_cast<double>(y) - static_cast<double>(cy)) / static_cast<double>(height));
    for (std::size_t x = 0; x < width; ++x) {
      const double cxv = std::cos(two_pi * (static_cast<double>(x) - static_cast<double>(cx)) / static_cast<double>(width));
      v[y * width + x] = 1.0 + 0.9 * cxv * cyv + 1e-6 * rng.uniform();
    }
  }
  return Heatmap(width, height, std::move(v));
}

std::filesystem::path write_synthetic_workspace(const std::filesystem::path& dir,
                                                const SyntheticStudyOptions& o) {
  if (o.models.empty() || o.study_features == 0 || o.images_per_feature < 10) {
    fail(ErrorCode::kParameter, "synthetic study needs a model, features and >= 10 images per feature");
  }
  std::filesystem::create_directories(dir);
  json build;
  build["v"] = 1;
  build["study_id"] = o.protocol == Protocol::kNaming ? "synthetic-naming" : "synthetic-localization";
  build["protocol"] = to_string(o.protocol);
  build["models"] = json::array();
  build["per_image_m"] = o.per_image_m;
  build["dense_threshold"] = o.dense_threshold;
  build["trials_per_participant"] = o.trials_per_participant;
  build["asset_root"] = ".";
  build["seed"] = o.seed;
  build["practice_features"] = json::array();
  build["catch_features"] = json::array();

  json manifest = json::object();
  manifest["v"] = 1;
  std::ostringstream scores;
  scores << "feature,score\n";
  std::size_t scored = 0;
  const std::size_t hs = o.heatmap_size;

  for (std::size_t mi = 0; mi < o.models.size(); ++mi) {
    const std::string& model = o.models[mi];
    const std::size_t planted = o.study_features + (mi == 0 ? 10 : 0);
    const std::size_t f_total = planted + o.dense_features;

    SaeParams p;
    p.dim = f_total;
    p.num_features = f_total;
    p.k = std::min<std::size_t>(1 + o.dense_features, f_total);
    p.w_enc = Matrix(f_total, f_total);
    p.w_dec = Matrix(f_total, f_total);
    for (std::size_t f = 0; f < f_total; ++f) p.w_enc(f, f) = p.w_dec(f, f) = 1.0;
    p.b_pre.assign(f_total, 0.0);
    p.b_enc.assign(f_total, 0.0);
    const std::string mdir = "models/" + model;
    io::save_sae(dir / mdir / "sae.bin", SaeModel(std::move(p)));

    LinearProbe probe;
    probe.num_classes = 2;
    probe.weights = Matrix(2, f_total);
    for (std::size_t d = 0; d < f_total; ++d) {
      probe.weights(0, d) = 1.0;
      probe.weights(1, d) = 0.5;
    }
    probe.bias = {0.0, 0.0};
    io::save_probe(dir / mdir / "probe.bin", probe);

    json acts = json::array();
    for (std::size_t f = 0; f < planted; ++f) {
      ActivationMatrix tokens(o.tokens, f_total);
      for (std::size_t t = 0; t < o.tokens; ++t) {
        tokens(t, f) = 1.0 + 0.05 * static_cast<double>(t);
        for (std::size_t d = 0; d < o.dense_features; ++d) {
          tokens(t, planted + d) = 0.3 + 0.01 * static_cast<double>(d);
        }
      }
      const std::string ref = "act/" + model + "/img_" + padded(f) + ".act";
      io::save_activations(dir / ref, tokens);
      acts.push_back(ref);

      const std::string fid = model + "/" + std::to_string(f);
      json images = json::array();
      Rng rng(mix_seed(o.seed, fnv1a64(fid)));
      for (std::size_t i = 0; i < o.images_per_feature; ++i) {
        const std::string stem = model + "/f" + padded(f) + "_" + padded(i, 2);
        const std::size_t cx = hs / 8 + rng.uniform_index(hs - hs / 4);
        const std::size_t cy = hs / 8 + rng.uniform_index(hs - hs / 4);
        io::save_heatmap(dir / ("hm/" + stem + ".hm1"), make_pattern_heatmap(hs, hs, cx, cy, rng.next()));
        images.push_back({{"image", "img/" + stem + ".png"},
                          {"heatmap", "hm/" + stem + ".hm1"},
                          {"activation", 10.0 - 0.5 * static_cast<double>(i)},
                          {"width", 224},
                          {"height", 224}});
      }
      manifest[fid] = {{"model", model}, {"visualization", "viz/" + model + "/f" + padded(f) + ".png"}, {"images", images}};

      if (mi == 0 && f >= o.study_features) {
        (f < o.study_features + 6 ? build["practice_features"] : build["catch_features"]).push_back(fid);
      } else {
        scores << fid << ',' << (static_cast<double>(scored % 10) + 0.5) / 10.0 << '\n';
        ++scored;
      }
    }
    build["models"].push_back({{"id", model},
                               {"sae", mdir + "/sae.bin"},
                               {"probe", mdir + "/probe.bin"},
                               {"activations", acts}});
  }
  build["manifest"] = "manifest.json";
  io::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  if (o.protocol == Protocol::kNaming) {
    io::write_file(dir / "loc_scores.csv", scores.str());
    build["localizability_scores"] = "loc_scores.csv";
    build["per_bin"] = o.per_bin;
  }
  const auto path = dir / "build.json";
  io::write_file(path, build.dump(2) + "\n");
  return path;
}

PilotFixture make_pilot(std::size_t units, double sigma, std::size_t images, std::size_t trials, double noise,
                        std::uint64_t seed) {
  if (units < 2) fail(ErrorCode::kParameter, "pilot needs at least 2 units");
  Rng rng(seed);
  PilotFixture fx;
  fx.sigma = sigma;
  fx.unit_scores.resize(units);
  for (auto& s : fx.unit_scores) s = rng.normal();
  double mean = 0.0;
  for (double s : fx.unit_scores) mean += s;
  mean /= static_cast<double>(units);
  double ss = 0.0;
  for (double s : fx.unit_scores) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / static_cast<double>(units));
  for (auto& s : fx.unit_scores) s = 0.6 + sigma * (s - mean) / sd;

  for (std::size_t u = 0; u < units; ++u) {
    for (std::size_t i = 1; i <= images; ++i) {
      for (std::size_t t = 1; t <= trials; ++t) {
        fx.records.push_back({"u" + padded(u), static_cast<int>(i), static_cast<int>(t),
                              fx.unit_scores[u] + noise * rng.normal()});
      }
    }
  }
  return fx;
}

ReportFixture make_report_fixture(std::size_t models, std::size_t features, std::size_t responses,
                                  std::uint64_t seed, bool constant_metric) {
  Rng rng(seed);
  ReportFixture fx;
  auto header = [](const std::string& study, Protocol p) {
    return json{{"type", "header"}, {"v", 1}, {"study_id", study}, {"protocol", to_string(p)},
                {"included_only", false}, {"gates", nullptr}};
  };
  fx.localization_header = header("fixture-localization", Protocol::kLocalization);
  fx.naming_header = header("fixture-naming", Protocol::kNaming);

  std::size_t next_id = 1;
  for (std::size_t m = 0; m < models; ++m) {
    const std::string model = "model-" + std::string(1, static_cast<char>('a' + m % 26));
    const double loc_mu = 0.55 + 0.06 * static_cast<double>(m);
    const double name_mu = 0.18 + 0.015 * static_cast<double>(m);
    for (std::size_t f = 0; f < features; ++f) {
      const std::string fid = model + "/" + std::to_string(f);
      for (std::size_t r = 0; r < responses; ++r) {
        for (int proto = 0; proto < 2; ++proto) {
          ResponseRecord rec;
          rec.response_id = "r" + padded(next_id, 6);
          rec.session_id = "s" + padded(r + 1, 6);
          rec.participant_id = "p" + padded(r + 1, 4);
          rec.feature_id = fid;
          rec.model = model;
          rec.seq_in_session = next_id++;
          if (proto == 0) {
            rec.trial_id = "tl-" + fid;
            rec.kind = TrialKind::kLocalization;
            rec.payload.click = Click{rng.uniform(), rng.uniform()};
            rec.score = std::clamp(loc_mu + 0.2 * rng.normal(), 0.0, 1.0);
            fx.localization.push_back(std::move(rec));
          } else {
            rec.trial_id = "tn-" + fid;
            rec.kind = TrialKind::kNaming;
            rec.payload.text = "synthetic description";
            rec.payload.confidence = 1 + static_cast<int>(rng.uniform_index(5));
            rec.score = std::clamp(name_mu + 0.05 * rng.normal(), -1.0, 1.0);
            fx.naming.push_back(std::move(rec));
          }
        }
      }
    }
    const double md = static_cast<double>(m);
    fx.metrics.set(model, "locality", 0.25 + 0.04 * md + 0.01 * rng.normal());
    fx.metrics.set(model, "compressibility", 0.30 - 0.02 * md + 0.01 * rng.normal());
    fx.metrics.set(model, "odd_one_out", 0.40 + 0.03 * rng.normal());
    fx.metrics.set(model, "probe_accuracy", 70.0 + 2.0 * md + rng.normal());
    if (constant_metric) fx.metrics.set(model, "input_resolution", 224.0);
  }
  return fx;
}

}  // namespace featscope
