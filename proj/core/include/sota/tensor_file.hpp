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

#ifndef SOTA_TENSOR_FILE_HPP_
#define SOTA_TENSOR_FILE_HPP_

#include <cstdint>
#include <filesystem>

#include "sota/tensor.hpp"

namespace sota {

// Raw tensor container:
//   magic "SOTA" | version u16 | dtype u8 (0=f32, 1=u8) | rank u8 |
//   dims u32[rank] | payload, row-major, little-endian.
// Round-trips are bit-exact; score maps use f32 so metric evaluation never
// sees quantization.

inline constexpr std::uint16_t kTensorFileVersion = 1;

enum class TensorDtype : std::uint8_t { kF32 = 0, kU8 = 1 };

void write_tensor_file(const std::filesystem::path& path, const Tensor<float>& t);
void write_tensor_file(const std::filesystem::path& path, const Tensor<std::uint8_t>& t);

TensorDtype peek_tensor_dtype(const std::filesystem::path& path);
Tensor<float> read_tensor_file_f32(const std::filesystem::path& path);
Tensor<std::uint8_t> read_tensor_file_u8(const std::filesystem::path& path);

}  // namespace sota

#endif  // SOTA_TENSOR_FILE_HPP_
