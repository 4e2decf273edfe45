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

#include "featscope/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "featscope/error.hpp"

namespace featscope::io {

namespace {

void write_floats(std::ostream& out, std::span<const double> values) {
  std::string buf(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    for (int b = 0; b < 4; ++b) buf[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::vector<double> read_floats(std::istream& in, std::size_t count, const char* what) {
  std::string buf(count * 4, '\0');
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
    fail(ErrorCode::kIo, std::string("truncated ") + what + " payload");
  }
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i * 4 + b])) << (8 * b);
    }
    out[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return out;
}

void expect_magic(std::istream& in, const std::string& magic) {
  std::string line;
  if (!std::getline(in, line) || line + "\n" != magic) {
    fail(ErrorCode::kIo, "bad magic, expected " + magic.substr(0, magic.size() - 1));
  }
}

std::vector<std::size_t> read_header(std::istream& in, std::size_t count) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kIo, "missing header line");
  std::istringstream ss(line);
  std::vector<std::size_t> out(count);
  for (auto& v : out) {
    long long x = -1;
    if (!(ss >> x) || x < 0) fail(ErrorCode::kIo, "malformed header '" + line + "'");
    v = static_cast<std::size_t>(x);
  }
  std::string rest;
  if (ss >> rest) fail(ErrorCode::kIo, "trailing header fields '" + line + "'");
  return out;
}

template <typename T, typename Fn>
T with_input(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return fn(in);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIo) fail(ErrorCode::kIo, path.string() + ": " + e.what());
    throw;
  }
}

template <typename Fn>
void with_output(const std::filesystem::path& path, Fn&& fn) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  fn(out);
  out.flush();
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace

void write_activations(std::ostream& out, const ActivationMatrix& m) {
  out << "ACT1\n" << m.rows() << ' ' << m.cols() << '\n';
  write_floats(out, m.data());
}

ActivationMatrix read_activations(std::istream& in) {
  expect_magic(in, "ACT1\n");
  auto h = read_header(in, 2);
  return Matrix(h[0], h[1], read_floats(in, h[0] * h[1], "activation"));
}

void write_sae(std::ostream& out, const SaeModel& model) {
  out << "SAE1\n" << model.dim() << ' ' << model.num_features() << ' ' << model.k() << '\n';
  write_floats(out, model.b_pre());
  write_floats(out, model.b_enc());
  write_floats(out, model.w_enc().data());
  write_floats(out, model.w_dec().data());
}

SaeModel read_sae(std::istream& in) {
  expect_magic(in, "SAE1\n");
  auto h = read_header(in, 3);
  SaeParams p;
  p.dim = h[0];
  p.num_features = h[1];
  p.k = h[2];
  p.b_pre = read_floats(in, p.dim, "b_pre");
  p.b_enc = read_floats(in, p.num_features, "b_enc");
  p.w_enc = Matrix(p.num_features, p.dim, read_floats(in, p.num_features * p.dim, "w_enc"));
  p.w_dec = Matrix(p.num_features, p.dim, read_floats(in, p.num_features * p.dim, "w_dec"));
  // float32 storage perturbs unit norms at the 1e-7 level.
  return SaeModel(std::move(p), 1e-5);
}

void write_probe(std::ostream& out, const LinearProbe& probe) {
  out << "PRB1\n" << probe.num_classes << ' ' << probe.dim() << '\n';
  write_floats(out, probe.weights.data());
  write_floats(out, probe.bias);
}

LinearProbe read_probe(std::istream& in) {
  expect_magic(in, "PRB1\n");
  auto h = read_header(in, 2);
  LinearProbe p;
  p.num_classes = h[0];
  p.weights = Matrix(h[0], h[1], read_floats(in, h[0] * h[1], "probe weights"));
  p.bias = read_floats(in, h[0], "probe bias");
  return p;
}

void write_heatmap(std::ostream& out, const Heatmap& h) {
  out << "HMAP1\n" << h.width << ' ' << h.height << '\n';
  write_floats(out, h.values);
}

Heatmap read_heatmap(std::istream& in) {
  expect_magic(in, "HMAP1\n");
  auto h = read_header(in, 2);
  return Heatmap(h[0], h[1], read_floats(in, h[0] * h[1], "heatmap"));
}

void save_activations(const std::filesystem::path& path, const ActivationMatrix& m) {
  with_output(path, [&](std::ostream& o) { write_activations(o, m); });
}
ActivationMatrix load_activations(const std::filesystem::path& path) {
  return with_input<ActivationMatrix>(path, [](std::istream& i) { return read_activations(i); });
}
void save_sae(const std::filesystem::path& path, const SaeModel& model) {
  with_output(path, [&](std::ostream& o) { write_sae(o, model); });
}
SaeModel load_sae(const std::filesystem::path& path) {
  return with_input<SaeModel>(path, [](std::istream& i) { return read_sae(i); });
}
void save_probe(const std::filesystem::path& path, const LinearProbe& probe) {
  with_output(path, [&](std::ostream& o) { write_probe(o, probe); });
}
LinearProbe load_probe(const std::filesystem::path& path) {
  return with_input<LinearProbe>(path, [](std::istream& i) { return read_probe(i); });
}
void save_heatmap(const std::filesystem::path& path, const Heatmap& h) {
  with_output(path, [&](std::ostream& o) { write_heatmap(o, h); });
}
Heatmap load_heatmap(const std::filesystem::path& path) {
  return with_input<Heatmap>(path, [](std::istream& i) { return read_heatmap(i); });
}

std::string read_file(const std::filesystem::path& path) {
  return with_input<std::string>(path, [](std::istream& i) {
    std::ostringstream ss;
    ss << i.rdbuf();
    return ss.str();
  });
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  with_output(path, [&](std::ostream& o) { o.write(contents.data(), static_cast<std::streamsize>(contents.size())); });
}

}  // namespace featscope::io
