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

#include "featscope/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <zlib.h>
#include <nlohmann/json.hpp>

#include "featscope/binary_io.hpp"
#include "featscope/error.hpp"

namespace featscope {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::kData, context + ": '" + s + "' is not a number");
  }
}

}  // namespace

double hoyer(std::span<const double> x) {
  if (x.size() < 2) fail(ErrorCode::kParameter, "Hoyer sparsity needs n >= 2");
  double l1 = 0.0, l2 = 0.0;
  for (double v : x) {
    if (!std::isfinite(v) || v < 0.0) fail(ErrorCode::kData, "Hoyer input must be finite and non-negative");
    l1 += v;
    l2 += v * v;
  }
  if (l1 == 0.0) fail(ErrorCode::kDegenerateHeatmap, "Hoyer sparsity of an all-zero map");
  const double root_n = std::sqrt(static_cast<double>(x.size()));
  const double h = (root_n - l1 / std::sqrt(l2)) / (root_n - 1.0);
  return std::clamp(h, 0.0, 1.0);
}

LocalityResult feature_locality(std::span<const Heatmap> heatmaps) {
  LocalityResult r;
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& h : heatmaps) {
    if (h.all_zero()) {
      ++r.skipped;
      continue;
    }
    sum += hoyer(h.values);
    ++used;
  }
  if (used == 0) fail(ErrorCode::kDegenerateFeature, "every heatmap of the feature is degenerate");
  r.value = sum / static_cast<double>(used);
  return r;
}

double model_locality(std::span<const double> feature_localities) {
  if (feature_localities.empty()) fail(ErrorCode::kData, "model locality needs at least one feature");
  double s = 0.0;
  for (double v : feature_localities) s += v;
  return s / static_cast<double>(feature_localities.size());
}

std::vector<unsigned char> quantize_u8(const Heatmap& h) {
  validate_heatmap(h);
  auto [lo, hi] = std::minmax_element(h.values.begin(), h.values.end());
  const double min = *lo, range = *hi - *lo;
  std::vector<unsigned char> out(h.size(), 0);
  if (range <= 0.0) return out;
  for (std::size_t i = 0; i < h.size(); ++i) {
    out[i] = static_cast<unsigned char>(std::lround((h.values[i] - min) / range * 255.0));
  }
  return out;
}

std::size_t deflate_size(std::span<const unsigned char> bytes, const CompressionConfig& config) {
  z_stream zs{};
  if (deflateInit2(&zs, config.level, Z_DEFLATED, config.window_bits, config.mem_level, Z_DEFAULT_STRATEGY) != Z_OK) {
    fail(ErrorCode::kInternal, "deflateInit2 failed");
  }
  std::vector<unsigned char> out(deflateBound(&zs, static_cast<uLong>(bytes.size())));
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const std::size_t written = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) fail(ErrorCode::kInternal, "deflate did not finish");
  return written;
}

double compressibility(const Heatmap& h, const CompressionConfig& config) {
  const auto bytes = quantize_u8(h);
  const std::size_t compressed = std::min(deflate_size(bytes, config), bytes.size());
  return static_cast<double>(compressed) / static_cast<double>(bytes.size());
}

int odd_one_out(const EmbeddingVector& a, const EmbeddingVector& b, const EmbeddingVector& c) {
  const double ab = cosine(a, b), ac = cosine(a, c), bc = cosine(b, c);
  int odd = 2;
  double best = ab;
  if (ac > best) {
    best = ac;
    odd = 1;
  }
  if (bc > best) odd = 0;
  return odd;
}

double odd_one_out_accuracy(std::span<const Triplet> triplets,
                            const std::map<std::string, EmbeddingVector>& embeddings) {
  if (triplets.empty()) fail(ErrorCode::kData, "no triplets");
  std::size_t correct = 0;
  for (const auto& t : triplets) {
    std::array<const EmbeddingVector*, 3> v{};
    for (std::size_t i = 0; i < 3; ++i) {
      auto it = embeddings.find(t.items[i]);
      if (it == embeddings.end()) fail(ErrorCode::kData, "no embedding for item '" + t.items[i] + "'");
      v[i] = &it->second;
    }
    correct += odd_one_out(*v[0], *v[1], *v[2]) == t.human_choice;
  }
  return static_cast<double>(correct) / static_cast<double>(triplets.size());
}

std::vector<Triplet> parse_triplets_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "item_a,item_b,item_c,human_choice") {
    fail(ErrorCode::kData, "triplet CSV must start with header item_a,item_b,item_c,human_choice");
  }
  std::vector<Triplet> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 4) fail(ErrorCode::kData, "triplet line " + std::to_string(line_no) + " needs 4 fields");
    Triplet t{{f[0], f[1], f[2]}, 0};
    if (f[3] != "0" && f[3] != "1" && f[3] != "2") {
      fail(ErrorCode::kData, "triplet line " + std::to_string(line_no) + ": human_choice must be 0, 1 or 2");
    }
    t.human_choice = f[3][0] - '0';
    if (t.items[0] == t.items[1] || t.items[0] == t.items[2] || t.items[1] == t.items[2]) {
      fail(ErrorCode::kData, "triplet line " + std::to_string(line_no) + " repeats an item");
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Triplet> read_triplets_csv(const std::filesystem::path& path) {
  return parse_triplets_csv(io::read_file(path));
}

std::map<std::string, EmbeddingVector> load_embedding_table(const std::filesystem::path& matrix_path,
                                                            const std::filesystem::path& ids_path) {
  const auto m = io::load_activations(matrix_path);
  auto ids = nlohmann::json::parse(io::read_file(ids_path), nullptr, false);
  if (ids.is_discarded() || !ids.is_array() || ids.size() != m.rows()) {
    fail(ErrorCode::kData, ids_path.string() + " must be a JSON array with one id per matrix row");
  }
  std::map<std::string, EmbeddingVector> out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    if (!out.emplace(ids[r].get<std::string>(), EmbeddingVector(row.begin(), row.end())).second) {
      fail(ErrorCode::kData, "duplicate embedding id " + ids[r].get<std::string>());
    }
  }
  return out;
}

void MetricTable::set(const std::string& model, const std::string& metric, double value) {
  if (!std::isfinite(value)) fail(ErrorCode::kData, "metric " + metric + " for " + model + " is not finite");
  rows_[model][metric] = value;
}

std::vector<std::string> MetricTable::metrics() const {
  std::set<std::string> names;
  for (const auto& [_, m] : rows_) {
    for (const auto& [name, __] : m) names.insert(name);
  }
  return {names.begin(), names.end()};
}

std::vector<std::string> MetricTable::models() const {
  std::vector<std::string> out;
  for (const auto& [m, _] : rows_) out.push_back(m);
  return out;
}

std::optional<double> MetricTable::get(const std::string& model, const std::string& metric) const {
  auto it = rows_.find(model);
  if (it == rows_.end()) return std::nullopt;
  auto jt = it->second.find(metric);
  if (jt == it->second.end()) return std::nullopt;
  return jt->second;
}

void MetricTable::merge(const MetricTable& other) {
  for (const auto& [model, m] : other.rows_) {
    for (const auto& [metric, v] : m) set(model, metric, v);
  }
}

std::string MetricTable::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "model,metric,value\n";
  for (const auto& [model, m] : rows_) {
    for (const auto& [metric, v] : m) out << model << ',' << metric << ',' << v << '\n';
  }
  return out.str();
}

MetricTable MetricTable::parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "model,metric,value") {
    fail(ErrorCode::kData, "metric table must start with header model,metric,value");
  }
  MetricTable t;
  std::set<std::pair<std::string, std::string>> seen;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 3) fail(ErrorCode::kData, "metric table rows need 3 fields: '" + line + "'");
    if (!seen.insert({f[0], f[1]}).second) fail(ErrorCode::kData, "duplicate metric " + f[1] + " for " + f[0]);
    t.set(f[0], f[1], parse_double(f[2], "metric " + f[1]));
  }
  return t;
}

MetricTable MetricTable::load(const std::filesystem::path& path) { return parse_csv(io::read_file(path)); }

}  // namespace featscope
