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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "featscope/heatmap.hpp"
#include "featscope/matrix.hpp"
#include "featscope/probe.hpp"
#include "featscope/sae.hpp"

namespace featscope::io {

// Binary layouts: a magic line, an ASCII header line of decimal integers,
// then little-endian float32 payload.
//   SAE1\n "dim F k\n"   b_pre, b_enc, w_enc (F x dim), w_dec (F x dim)
//   ACT1\n "rows dim\n"  row-major values
//   PRB1\n "C dim\n"     weights (C x dim), bias
//   HMAP1\n "w h\n"      row-major values

void write_activations(std::ostream& out, const ActivationMatrix& m);
ActivationMatrix read_activations(std::istream& in);

void write_sae(std::ostream& out, const SaeModel& model);
SaeModel read_sae(std::istream& in);

void write_probe(std::ostream& out, const LinearProbe& probe);
LinearProbe read_probe(std::istream& in);

void write_heatmap(std::ostream& out, const Heatmap& h);
Heatmap read_heatmap(std::istream& in);

// File wrappers; failures to open or short reads raise kIo naming the path.
void save_activations(const std::filesystem::path& path, const ActivationMatrix& m);
ActivationMatrix load_activations(const std::filesystem::path& path);
void save_sae(const std::filesystem::path& path, const SaeModel& model);
SaeModel load_sae(const std::filesystem::path& path);
void save_probe(const std::filesystem::path& path, const LinearProbe& probe);
LinearProbe load_probe(const std::filesystem::path& path);
void save_heatmap(const std::filesystem::path& path, const Heatmap& h);
Heatmap load_heatmap(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace featscope::io
