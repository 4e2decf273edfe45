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

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "featscope/heatmap.hpp"
#include "featscope/scoring.hpp"

namespace featscope {

/// Hoyer sparsity (sqrt(n) - |x|_1/|x|_2) / (sqrt(n) - 1): 0 for a uniform
/// vector, 1 for a one-hot one.
double hoyer(std::span<const double> x);

struct LocalityResult {
  double value = 0.0;
  std::size_t skipped = 0;  // degenerate heatmaps left out of the mean
};

/// Mean Hoyer over a feature's heatmaps, skipping degenerate (all-zero) maps.
LocalityResult feature_locality(std::span<const Heatmap> heatmaps);
double model_locality(std::span<const double> feature_localities);

struct CompressionConfig {
  int level = 9;
  int window_bits = 15;
  int mem_level = 8;
};

/// Compressed size over raw size of the min-max quantized 8-bit map. The
/// compressed size is capped at the raw size (a stored block).
double compressibility(const Heatmap& h, const CompressionConfig& config = {});

/// 8-bit min-max quantization (a constant map quantizes to zeros).
std::vector<unsigned char> quantize_u8(const Heatmap& h);

std::size_t deflate_size(std::span<const unsigned char> bytes, const CompressionConfig& config = {});

struct Triplet {
  std::array<std::string, 3> items;
  int human_choice = 0;
};

/// Index of the item left out of the most similar pair (pairs visited as
/// (0,1), (0,2), (1,2); ties keep the earlier pair).
int odd_one_out(const EmbeddingVector& a, const EmbeddingVector& b, const EmbeddingVector& c);

double odd_one_out_accuracy(std::span<const Triplet> triplets,
                            const std::map<std::string, EmbeddingVector>& embeddings);

/// CSV with header item_a,item_b,item_c,human_choice.
std::vector<Triplet> read_triplets_csv(const std::filesystem::path& path);
std::vector<Triplet> parse_triplets_csv(const std::string& text);

/// ACT1 matrix plus a JSON array of ids, one per row.
std::map<std::string, EmbeddingVector> load_embedding_table(const std::filesystem::path& matrix_path,
                                                            const std::filesystem::path& ids_path);

/// model -> metric -> value, CSV "model,metric,value".
class MetricTable {
 public:
  void set(const std::string& model, const std::string& metric, double value);
  const std::map<std::string, std::map<std::string, double>>& rows() const noexcept { return rows_; }
  std::vector<std::string> metrics() const;
  std::vector<std::string> models() const;
  std::optional<double> get(const std::string& model, const std::string& metric) const;
  void merge(const MetricTable& other);

  std::string to_csv() const;
  static MetricTable parse_csv(const std::string& text);
  static MetricTable load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::map<std::string, double>> rows_;
};

}  // namespace featscope
