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

#include "attn_topo/npy.h"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

namespace attn_topo {
namespace {

static_assert(std::endian::native == std::endian::little,
              "NPY buffers are written in host order; big-endian hosts are "
              "not supported");

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;
constexpr std::size_t kAlign = 64;

[[noreturn]] void fail(NpyErrc code, const std::filesystem::path& path,
                       const std::string& detail) {
  throw NpyError(code, path.string() + ": " + to_string(code) + ": " + detail);
}

struct ParsedHeader {
  DType dtype;
  std::vector<std::size_t> shape;
  std::size_t data_offset;
};

void skip_spaces(const std::string& s, std::size_t& pos) {
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) {
    ++pos;
  }
}

// Locates `'key':` and returns the position right after the colon.
std::size_t find_key(const std::string& dict, const std::string& key,
                     const std::filesystem::path& path) {
  for (const char quote : {'\'', '"'}) {
    const std::string needle = std::string(1, quote) + key + quote;
    std::size_t pos = dict.find(needle);
    if (pos == std::string::npos) continue;
    pos += needle.size();
    skip_spaces(dict, pos);
    if (pos >= dict.size() || dict[pos] != ':') break;
    ++pos;
    skip_spaces(dict, pos);
    return pos;
  }
  fail(NpyErrc::kMalformedHeader, path, "missing key '" + key + "'");
}

ParsedHeader parse_dict(const std::string& dict, std::size_t data_offset,
                        const std::filesystem::path& path) {
  ParsedHeader out{};
  out.data_offset = data_offset;

  std::size_t pos = find_key(dict, "descr", path);
  if (pos >= dict.size() || (dict[pos] != '\'' && dict[pos] != '"')) {
    fail(NpyErrc::kMalformedHeader, path, "descr is not a string");
  }
  const char quote = dict[pos];
  const std::size_t end = dict.find(quote, pos + 1);
  if (end == std::string::npos) {
    fail(NpyErrc::kMalformedHeader, path, "unterminated descr");
  }
  const std::string descr = dict.substr(pos + 1, end - pos - 1);
  if (descr == "<f4") {
    out.dtype = DType::kFloat32;
  } else if (descr == "<f8") {
    out.dtype = DType::kFloat64;
  } else if (descr == "|u1" || descr == "<u1" || descr == "u1") {
    out.dtype = DType::kUint8;
  } else {
    fail(NpyErrc::kUnsupportedDtype, path, "descr '" + descr + "'");
  }

  pos = find_key(dict, "fortran_order", path);
  if (dict.compare(pos, 5, "False") == 0) {
    // row-major, supported
  } else if (dict.compare(pos, 4, "True") == 0) {
    fail(NpyErrc::kUnsupportedLayout, path,
         "fortran_order=True (column-major) arrays are not supported");
  } else {
    fail(NpyErrc::kMalformedHeader, path, "fortran_order is not a bool");
  }

  pos = find_key(dict, "shape", path);
  if (pos >= dict.size() || dict[pos] != '(') {
    fail(NpyErrc::kMalformedHeader, path, "shape is not a tuple");
  }
  ++pos;
  for (;;) {
    skip_spaces(dict, pos);
    if (pos >= dict.size()) {
      fail(NpyErrc::kMalformedHeader, path, "unterminated shape");
    }
    if (dict[pos] == ')') break;
    if (!std::isdigit(static_cast<unsigned char>(dict[pos]))) {
      fail(NpyErrc::kMalformedHeader, path, "bad shape entry");
    }
    std::size_t value = 0;
    while (pos < dict.size() &&
           std::isdigit(static_cast<unsigned char>(dict[pos]))) {
      value = value * 10 + static_cast<std::size_t>(dict[pos] - '0');
      ++pos;
    }
    // numpy may write long suffixes on some platforms.
    if (pos < dict.size() && (dict[pos] == 'L' || dict[pos] == 'l')) ++pos;
    out.shape.push_back(value);
    skip_spaces(dict, pos);
    if (pos < dict.size() && dict[pos] == ',') ++pos;
  }
  if (out.shape.empty()) {
    fail(NpyErrc::kInvalidShape, path, "rank-0 arrays are not supported");
  }
  return out;
}

ParsedHeader read_header(std::istream& in, const std::filesystem::path& path) {
  char magic[kMagicLen];
  if (!in.read(magic, kMagicLen) ||
      std::memcmp(magic, kMagic, kMagicLen) != 0) {
    fail(NpyErrc::kBadMagic, path, "not an NPY file");
  }
  unsigned char version[2];
  if (!in.read(reinterpret_cast<char*>(version), 2)) {
    fail(NpyErrc::kTruncated, path, "missing version");
  }
  std::size_t header_len = 0;
  std::size_t prefix = kMagicLen + 2;
  if (version[0] == 1 && version[1] == 0) {
    unsigned char len[2];
    if (!in.read(reinterpret_cast<char*>(len), 2)) {
      fail(NpyErrc::kTruncated, path, "missing header length");
    }
    header_len = len[0] | (static_cast<std::size_t>(len[1]) << 8);
    prefix += 2;
  } else if (version[0] == 2 && version[1] == 0) {
    unsigned char len[4];
    if (!in.read(reinterpret_cast<char*>(len), 4)) {
      fail(NpyErrc::kTruncated, path, "missing header length");
    }
    header_len = len[0] | (static_cast<std::size_t>(len[1]) << 8) |
                 (static_cast<std::size_t>(len[2]) << 16) |
                 (static_cast<std::size_t>(len[3]) << 24);
    prefix += 4;
  } else {
    fail(NpyErrc::kUnsupportedVersion, path,
         "version " + std::to_string(version[0]) + "." +
             std::to_string(version[1]));
  }
  std::string dict(header_len, '\0');
  if (!in.read(dict.data(), static_cast<std::streamsize>(header_len))) {
    fail(NpyErrc::kTruncated, path, "header shorter than declared length");
  }
  return parse_dict(dict, prefix + header_len, path);
}

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

const char* dtype_descr(DType dtype) {
  switch (dtype) {
    case DType::kFloat32: return "<f4";
    case DType::kFloat64: return "<f8";
    case DType::kUint8: return "|u1";
  }
  return "?";
}

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::kFloat32: return 4;
    case DType::kFloat64: return 8;
    case DType::kUint8: return 1;
  }
  return 0;
}

const char* to_string(NpyErrc code) {
  switch (code) {
    case NpyErrc::kIo: return "I/O failure";
    case NpyErrc::kBadMagic: return "bad magic";
    case NpyErrc::kUnsupportedVersion: return "unsupported version";
    case NpyErrc::kMalformedHeader: return "malformed header";
    case NpyErrc::kUnsupportedDtype: return "unsupported dtype";
    case NpyErrc::kUnsupportedLayout: return "unsupported layout";
    case NpyErrc::kTruncated: return "truncated";
    case NpyErrc::kInvalidShape: return "invalid shape";
  }
  return "unknown";
}

DType Tensor::dtype() const {
  switch (data.index()) {
    case 0: return DType::kFloat32;
    case 1: return DType::kFloat64;
    default: return DType::kUint8;
  }
}

std::size_t Tensor::element_count() const { return product(shape); }

std::size_t Tensor::buffer_size() const {
  return std::visit([](const auto& v) { return v.size(); }, data);
}

const std::vector<float>& Tensor::f32() const {
  if (const auto* v = std::get_if<std::vector<float>>(&data)) return *v;
  throw ValidationError("tensor dtype is not float32");
}

const std::vector<double>& Tensor::f64() const {
  if (const auto* v = std::get_if<std::vector<double>>(&data)) return *v;
  throw ValidationError("tensor dtype is not float64");
}

const std::vector<std::uint8_t>& Tensor::u8() const {
  if (const auto* v = std::get_if<std::vector<std::uint8_t>>(&data)) return *v;
  throw ValidationError("tensor dtype is not uint8");
}

double Tensor::as_double(std::size_t i) const {
  return std::visit([i](const auto& v) { return static_cast<double>(v[i]); },
                    data);
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  if (shape.size() == 1) os << ',';
  os << ')';
  return os.str();
}

std::string npy_header(DType dtype, const std::vector<std::size_t>& shape) {
  std::string dict = "{'descr': '";
  dict += dtype_descr(dtype);
  dict += "', 'fortran_order': False, 'shape': ";
  dict += shape_to_string(shape);
  dict += ", }";
  const std::size_t prefix = kMagicLen + 2 + 2;
  // Space padding; prefix + dict + '\n' ends on a 64-byte boundary.
  const std::size_t unpadded = prefix + dict.size() + 1;
  const std::size_t padded = (unpadded + kAlign - 1) / kAlign * kAlign;
  dict.append(padded - unpadded, ' ');
  dict.push_back('\n');

  std::string out(kMagic, kMagicLen);
  out.push_back('\x01');
  out.push_back('\x00');
  const std::size_t len = dict.size();
  out.push_back(static_cast<char>(len & 0xff));
  out.push_back(static_cast<char>((len >> 8) & 0xff));
  out += dict;
  return out;
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  if (tensor.shape.empty()) {
    throw NpyError(NpyErrc::kInvalidShape,
                   path.string() + ": tensor rank must be at least 1");
  }
  if (tensor.buffer_size() != tensor.element_count()) {
    throw NpyError(NpyErrc::kInvalidShape,
                   path.string() + ": buffer has " +
                       std::to_string(tensor.buffer_size()) +
                       " elements but shape " +
                       shape_to_string(tensor.shape) + " needs " +
                       std::to_string(tensor.element_count()));
  }
  const std::string header = npy_header(tensor.dtype(), tensor.shape);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(NpyErrc::kIo, path, "cannot open for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  std::visit(
      [&](const auto& v) {
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(v[0])));
      },
      tensor.data);
  out.flush();
  if (!out) fail(NpyErrc::kIo, path, "write failed");
}

NpyInfo read_tensor_info(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(NpyErrc::kIo, path, "cannot open for reading");
  ParsedHeader h = read_header(in, path);
  return NpyInfo{h.dtype, std::move(h.shape)};
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(NpyErrc::kIo, path, "cannot open for reading");
  ParsedHeader h = read_header(in, path);
  const std::size_t count = product(h.shape);
  const std::size_t bytes = count * dtype_size(h.dtype);

  auto load = [&](auto& vec) {
    vec.resize(count);
    if (bytes > 0 &&
        !in.read(reinterpret_cast<char*>(vec.data()),
                 static_cast<std::streamsize>(bytes))) {
      fail(NpyErrc::kTruncated, path,
           "expected " + std::to_string(bytes) + " data bytes for shape " +
               shape_to_string(h.shape) + ", got " +
               std::to_string(in.gcount()));
    }
  };

  Tensor t;
  t.shape = h.shape;
  switch (h.dtype) {
    case DType::kFloat32: {
      std::vector<float> v;
      load(v);
      t.data = std::move(v);
      break;
    }
    case DType::kFloat64: {
      std::vector<double> v;
      load(v);
      t.data = std::move(v);
      break;
    }
    case DType::kUint8: {
      std::vector<std::uint8_t> v;
      load(v);
      t.data = std::move(v);
      break;
    }
  }
  return t;
}

}  // namespace attn_topo
