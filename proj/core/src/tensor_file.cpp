// Copyright 2026 The SOTA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sota/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "sota/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "tensor file I/O assumes a little-endian host");

namespace sota {
namespace {

constexpr char kMagic[4] = {'S', 'O', 'T', 'A'};

void write_header(std::ofstream& out, TensorDtype dtype, const std::vector<int>& shape) {
  out.write(kMagic, 4);
  const std::uint16_t version = kTensorFileVersion;
  out.write(reinterpret_cast<const char*>(&version), 2);
  const std::uint8_t dt = static_cast<std::uint8_t>(dtype);
  out.write(reinterpret_cast<const char*>(&dt), 1);
  const std::uint8_t rank = static_cast<std::uint8_t>(shape.size());
  out.write(reinterpret_cast<const char*>(&rank), 1);
  for (int d : shape) {
    const std::uint32_t dim = static_cast<std::uint32_t>(d);
    out.write(reinterpret_cast<const char*>(&dim), 4);
  }
}

struct Header {
  TensorDtype dtype;
  std::vector<int> shape;
};

Header read_header(std::ifstream& in, const std::filesystem::path& path) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("tensor file: bad magic in " + path.string());
  std::uint16_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 2);
  if (version != kTensorFileVersion)
    throw IoError("tensor file: unsupported version in " + path.string());
  std::uint8_t dt = 0, rank = 0;
  in.read(reinterpret_cast<char*>(&dt), 1);
  in.read(reinterpret_cast<char*>(&rank), 1);
  if (dt > 1) throw IoError("tensor file: unknown dtype in " + path.string());
  Header h;
  h.dtype = static_cast<TensorDtype>(dt);
  h.shape.resize(rank);
  for (int i = 0; i < rank; ++i) {
    std::uint32_t dim = 0;
    in.read(reinterpret_cast<char*>(&dim), 4);
    h.shape[static_cast<std::size_t>(i)] = static_cast<int>(dim);
  }
  if (!in) throw IoError("tensor file: truncated header in " + path.string());
  return h;
}

template <typename T>
void write_impl(const std::filesystem::path& path, const Tensor<T>& t, TensorDtype dtype) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("tensor file: cannot open for write: " + path.string());
  write_header(out, dtype, t.shape());
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(T)));
  if (!out) throw IoError("tensor file: write failed: " + path.string());
}

template <typename T>
Tensor<T> read_impl(const std::filesystem::path& path, TensorDtype expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("tensor file: cannot open: " + path.string());
  const Header h = read_header(in, path);
  if (h.dtype != expected) throw IoError("tensor file: dtype mismatch in " + path.string());
  Tensor<T> t(h.shape);
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(T)));
  if (!in) throw IoError("tensor file: truncated payload in " + path.string());
  char extra;
  if (in.read(&extra, 1)) throw IoError("tensor file: trailing bytes in " + path.string());
  return t;
}

}  // namespace

void write_tensor_file(const std::filesystem::path& path, const Tensor<float>& t) {
  write_impl(path, t, TensorDtype::kF32);
}

void write_tensor_file(const std::filesystem::path& path, const Tensor<std::uint8_t>& t) {
  write_impl(path, t, TensorDtype::kU8);
}

TensorDtype peek_tensor_dtype(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("tensor file: cannot open: " + path.string());
  return read_header(in, path).dtype;
}

Tensor<float> read_tensor_file_f32(const std::filesystem::path& path) {
  return read_impl<float>(path, TensorDtype::kF32);
}

Tensor<std::uint8_t> read_tensor_file_u8(const std::filesystem::path& path) {
  return read_impl<std::uint8_t>(path, TensorDtype::kU8);
}

}  // namespace sota
