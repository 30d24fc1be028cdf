// Copyright 2026 The attn-topo-uq Authors
// SPDX-License-Identifier: Apache-2.0
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

// Reader and writer for the NPY v1.0 array format.
//
// Layout: magic "\x93NUMPY", version bytes (1, 0), little-endian uint16
// header length, an ASCII Python dict literal with keys 'descr',
// 'fortran_order' and 'shape' padded with spaces and terminated by '\n' so
// that the data block starts on a 64-byte boundary, then the raw row-major
// buffer. Version 2.0 files (uint32 header length) are accepted on read.

#ifndef ATTN_TOPO_NPY_H_
#define ATTN_TOPO_NPY_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "attn_topo/errors.h"

namespace attn_topo {

enum class DType { kFloat32, kFloat64, kUint8 };

// '<f4', '<f8' or '|u1'.
const char* dtype_descr(DType dtype);
std::size_t dtype_size(DType dtype);

// A dense row-major array with its element type.
struct Tensor {
  std::vector<std::size_t> shape;
  std::variant<std::vector<float>, std::vector<double>,
               std::vector<std::uint8_t>>
      data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<float> v)
      : shape(std::move(s)), data(std::move(v)) {}
  Tensor(std::vector<std::size_t> s, std::vector<double> v)
      : shape(std::move(s)), data(std::move(v)) {}
  Tensor(std::vector<std::size_t> s, std::vector<std::uint8_t> v)
      : shape(std::move(s)), data(std::move(v)) {}

  DType dtype() const;
  // Product of shape (1 for rank 0, although rank 0 is never valid on disk).
  std::size_t element_count() const;
  std::size_t buffer_size() const;

  const std::vector<float>& f32() const;
  const std::vector<double>& f64() const;
  const std::vector<std::uint8_t>& u8() const;

  // Element i converted to double regardless of dtype.
  double as_double(std::size_t i) const;

  bool operator==(const Tensor&) const = default;
};

enum class NpyErrc {
  kIo,
  kBadMagic,
  kUnsupportedVersion,
  kMalformedHeader,
  kUnsupportedDtype,
  kUnsupportedLayout,
  kTruncated,
  kInvalidShape,
};

const char* to_string(NpyErrc code);

class NpyError : public ValidationError {
 public:
  NpyError(NpyErrc code, const std::string& what)
      : ValidationError(what), code_(code) {}
  NpyErrc code() const { return code_; }

 private:
  NpyErrc code_;
};

// The complete preamble (magic through trailing newline) for an array.
std::string npy_header(DType dtype, const std::vector<std::size_t>& shape);

void write_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_tensor(const std::filesystem::path& path);

// Reads only the preamble; cheap shape checks before loading large buffers.
struct NpyInfo {
  DType dtype;
  std::vector<std::size_t> shape;
};
NpyInfo read_tensor_info(const std::filesystem::path& path);

std::string shape_to_string(const std::vector<std::size_t>& shape);

}  // namespace attn_topo

#endif  // ATTN_TOPO_NPY_H_
