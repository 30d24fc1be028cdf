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

#include "attn_topo/dataset.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <string>

#include "attn_topo/errors.h"
#include "attn_topo/npy.h"
#include "json.hpp"

namespace attn_topo {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Weights a little above 1 appear from float32 softmax rounding.
constexpr float kWeightSlack = 1e-5f;

const std::set<std::string> kManifestKeys = {
    "split",           "num_samples",      "num_layers",   "num_heads",
    "max_tokens",      "num_classes",      "lengths_file", "attentions_file",
    "logits_file",     "labels_file",      "embeddings_file",
    "token_flags_file", "mc_probs_file",   "mc_runs",      "embedding_source",
    "model",
};

std::size_t require_count(const json& m, const char* key, bool positive) {
  if (!m.contains(key) || !m[key].is_number_integer()) {
    throw ValidationError(std::string("manifest: '") + key +
                          "' must be an integer");
  }
  const auto v = m[key].get<long long>();
  if (v < 0 || (positive && v == 0)) {
    throw ValidationError(std::string("manifest: '") + key + "' must be " +
                          (positive ? "positive" : "non-negative"));
  }
  return static_cast<std::size_t>(v);
}

fs::path require_file(const json& m, const char* key, const fs::path& base) {
  if (!m.contains(key) || !m[key].is_string()) {
    throw ValidationError(std::string("manifest: '") + key +
                          "' must be a file path");
  }
  fs::path p = m[key].get<std::string>();
  if (p.is_relative()) p = base / p;
  if (!fs::exists(p)) {
    throw ValidationError(std::string("manifest: ") + key + " '" +
                          p.string() + "' does not exist");
  }
  return p;
}

Tensor load_checked(const fs::path& path,
                    const std::vector<std::size_t>& expected,
                    std::initializer_list<DType> dtypes) {
  const NpyInfo info = read_tensor_info(path);
  if (info.shape != expected) {
    throw ValidationError(path.string() + ": shape mismatch: file has " +
                          shape_to_string(info.shape) +
                          ", manifest expects " + shape_to_string(expected));
  }
  if (std::find(dtypes.begin(), dtypes.end(), info.dtype) == dtypes.end()) {
    throw ValidationError(path.string() + ": unexpected dtype " +
                          dtype_descr(info.dtype));
  }
  return read_tensor(path);
}

// Integer-valued column stored either as uint8 or float32.
std::vector<std::uint32_t> to_indices(const Tensor& t, const fs::path& path) {
  std::vector<std::uint32_t> out(t.element_count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = t.as_double(i);
    if (!(v >= 0.0) || v != std::floor(v) || v > 4294967295.0) {
      throw ValidationError(path.string() + ": entry " + std::to_string(i) +
                            " = " + std::to_string(v) +
                            " is not a non-negative integer");
    }
    out[i] = static_cast<std::uint32_t>(v);
  }
  return out;
}

Tensor index_tensor(const std::vector<std::uint32_t>& values,
                    std::uint32_t max_value) {
  if (max_value <= 255) {
    return Tensor({values.size()},
                  std::vector<std::uint8_t>(values.begin(), values.end()));
  }
  return Tensor({values.size()},
                std::vector<float>(values.begin(), values.end()));
}

}  // namespace

AttentionMatrix AttentionDump::attention(std::size_t sample, std::size_t layer,
                                         std::size_t head) const {
  const std::size_t n = lengths[sample];
  const std::size_t t = max_tokens;
  const std::size_t offset =
      ((sample * num_layers + layer) * num_heads + head) * t * t;
  std::vector<double> w(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      w[i * n + j] = std::min(1.0, static_cast<double>(
                                       attentions[offset + i * t + j]));
    }
  }
  return AttentionMatrix(n, std::move(w));
}

std::span<const std::uint8_t> AttentionDump::flags(std::size_t sample) const {
  return std::span<const std::uint8_t>(token_flags)
      .subspan(sample * max_tokens, lengths[sample]);
}

std::vector<double> AttentionDump::probabilities(std::size_t sample) const {
  std::vector<double> p(num_classes);
  const float* z = logits.data() + sample * num_classes;
  const double top = *std::max_element(z, z + num_classes);
  double total = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    p[c] = std::exp(static_cast<double>(z[c]) - top);
    total += p[c];
  }
  for (double& v : p) v /= total;
  return p;
}

std::size_t AttentionDump::predicted_class(std::size_t sample) const {
  const float* z = logits.data() + sample * num_classes;
  return static_cast<std::size_t>(std::max_element(z, z + num_classes) - z);
}

bool AttentionDump::correct(std::size_t sample) const {
  return predicted_class(sample) == labels[sample];
}

std::vector<double> AttentionDump::mc_sample(std::size_t sample) const {
  std::vector<double> out(mc_runs * num_classes);
  for (std::size_t r = 0; r < mc_runs; ++r) {
    for (std::size_t c = 0; c < num_classes; ++c) {
      out[r * num_classes + c] =
          mc_probs[(r * num_samples + sample) * num_classes + c];
    }
  }
  return out;
}

void AttentionDump::validate() const {
  const std::size_t s = num_samples, t = max_tokens, c = num_classes;
  if (num_layers == 0 || num_heads == 0 || t == 0 || c == 0) {
    throw ValidationError(split + ": dimensions must be positive");
  }
  auto check_size = [&](const char* what, std::size_t have, std::size_t want) {
    if (have != want) {
      throw ValidationError(split + ": " + what + " has " +
                            std::to_string(have) + " elements, expected " +
                            std::to_string(want));
    }
  };
  check_size("lengths", lengths.size(), s);
  check_size("attentions", attentions.size(), s * num_layers * num_heads * t * t);
  check_size("logits", logits.size(), s * c);
  check_size("labels", labels.size(), s);
  check_size("token_flags", token_flags.size(), s * t);
  check_size("embeddings", embeddings.size(), s * embedding_dim);
  check_size("mc_probs", mc_probs.size(), mc_runs * s * c);

  for (std::size_t i = 0; i < s; ++i) {
    const std::string where = split + " sample " + std::to_string(i);
    const std::size_t len = lengths[i];
    if (len < 1 || len > t) {
      throw ValidationError(where + ": token length " + std::to_string(len) +
                            " outside [1, " + std::to_string(t) + "]");
    }
    if (labels[i] >= c) {
      throw ValidationError(where + ": label " + std::to_string(labels[i]) +
                            " >= num_classes " + std::to_string(c));
    }
    int cls = 0;
    for (std::size_t k = 0; k < t; ++k) {
      const std::uint8_t f = token_flags[i * t + k];
      const bool pad = (f & kTokenPad) != 0;
      if (pad != (k >= len)) {
        throw ValidationError(where + ": PAD flag at token " +
                              std::to_string(k) +
                              " disagrees with token length " +
                              std::to_string(len));
      }
      if (f & kTokenCls) ++cls;
    }
    if (cls > 1) throw ValidationError(where + ": more than one CLS token");
    for (std::size_t k = 0; k < c; ++k) {
      if (!std::isfinite(logits[i * c + k])) {
        throw ValidationError(where + ": non-finite logit");
      }
    }
    for (std::size_t l = 0; l < num_layers; ++l) {
      for (std::size_t h = 0; h < num_heads; ++h) {
        const float* a = attentions.data() + ((i * num_layers + l) * num_heads + h) * t * t;
        for (std::size_t q = 0; q < t; ++q) {
          for (std::size_t k = 0; k < t; ++k) {
            const float v = a[q * t + k];
            const bool padded = q >= len || k >= len;
            if (padded ? v != 0.0f : !(v >= 0.0f && v <= 1.0f + kWeightSlack)) {
              throw ValidationError(
                  where + ": attention (layer " + std::to_string(l + 1) +
                  ", head " + std::to_string(h + 1) + ", " +
                  std::to_string(q) + ", " + std::to_string(k) + ") = " +
                  std::to_string(v) +
                  (padded ? " must be zero beyond the token length"
                          : " outside [0, 1]"));
            }
          }
        }
      }
    }
  }
  for (float v : mc_probs) {
    if (!(v >= 0.0f && v <= 1.0f + kWeightSlack)) {
      throw ValidationError(split + ": mc_probs entry outside [0, 1]");
    }
  }
}

AttentionDump load_dataset(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) {
    throw ValidationError("cannot open manifest '" + manifest_path.string() +
                          "'");
  }
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw ValidationError(manifest_path.string() + ": invalid JSON: " +
                          e.what());
  }
  if (!m.is_object()) {
    throw ValidationError(manifest_path.string() + ": not a JSON object");
  }
  for (const auto& [key, _] : m.items()) {
    if (!kManifestKeys.contains(key)) {
      throw ValidationError(manifest_path.string() + ": unknown key '" + key +
                            "'");
    }
  }
  const fs::path base = manifest_path.parent_path();

  AttentionDump d;
  d.split = m.value("split", std::string("unnamed"));
  d.num_samples = require_count(m, "num_samples", false);
  d.num_layers = require_count(m, "num_layers", true);
  d.num_heads = require_count(m, "num_heads", true);
  d.max_tokens = require_count(m, "max_tokens", true);
  d.num_classes = require_count(m, "num_classes", true);
  d.embedding_source = m.value("embedding_source", std::string());
  const std::size_t s = d.num_samples, t = d.max_tokens, c = d.num_classes;

  const fs::path lengths_path = require_file(m, "lengths_file", base);
  d.lengths = to_indices(
      load_checked(lengths_path, {s}, {DType::kUint8, DType::kFloat32}),
      lengths_path);

  d.attentions = load_checked(require_file(m, "attentions_file", base),
                              {s, d.num_layers, d.num_heads, t, t},
                              {DType::kFloat32})
                     .f32();
  d.logits =
      load_checked(require_file(m, "logits_file", base), {s, c}, {DType::kFloat32})
          .f32();

  const fs::path labels_path = require_file(m, "labels_file", base);
  d.labels = to_indices(
      load_checked(labels_path, {s}, {DType::kUint8, DType::kFloat32}),
      labels_path);

  d.token_flags = load_checked(require_file(m, "token_flags_file", base),
                               {s, t}, {DType::kUint8})
                      .u8();

  if (m.contains("embeddings_file") && !m["embeddings_file"].is_null()) {
    const fs::path p = require_file(m, "embeddings_file", base);
    const NpyInfo info = read_tensor_info(p);
    if (info.shape.size() != 2 || info.shape[0] != s || info.shape[1] == 0) {
      throw ValidationError(p.string() + ": shape mismatch: file has " +
                            shape_to_string(info.shape) +
                            ", manifest expects (" + std::to_string(s) +
                            ", D)");
    }
    d.embedding_dim = info.shape[1];
    d.embeddings = load_checked(p, info.shape, {DType::kFloat32}).f32();
  }

  if (m.contains("mc_probs_file") && !m["mc_probs_file"].is_null()) {
    const fs::path p = require_file(m, "mc_probs_file", base);
    const NpyInfo info = read_tensor_info(p);
    std::size_t runs = info.shape.empty() ? 0 : info.shape[0];
    if (m.contains("mc_runs")) runs = require_count(m, "mc_runs", true);
    d.mc_probs = load_checked(p, {runs, s, c}, {DType::kFloat32}).f32();
    d.mc_runs = runs;
  } else if (m.contains("mc_runs") && m["mc_runs"].is_number_integer() &&
             m["mc_runs"].get<long long>() != 0) {
    throw ValidationError(manifest_path.string() +
                          ": mc_runs given without mc_probs_file");
  }

  d.validate();
  return d;
}

void save_dataset(const AttentionDump& dump, const fs::path& dir) {
  dump.validate();
  fs::create_directories(dir);
  const std::size_t s = dump.num_samples, t = dump.max_tokens,
                    c = dump.num_classes;

  write_tensor(dir / "lengths.npy",
               index_tensor(dump.lengths, static_cast<std::uint32_t>(t)));
  write_tensor(dir / "attentions.npy",
               Tensor({s, dump.num_layers, dump.num_heads, t, t},
                      dump.attentions));
  write_tensor(dir / "logits.npy", Tensor({s, c}, dump.logits));
  write_tensor(dir / "labels.npy",
               index_tensor(dump.labels, static_cast<std::uint32_t>(c - 1)));
  write_tensor(dir / "token_flags.npy", Tensor({s, t}, dump.token_flags));

  json m = {
      {"split", dump.split},
      {"num_samples", s},
      {"num_layers", dump.num_layers},
      {"num_heads", dump.num_heads},
      {"max_tokens", t},
      {"num_classes", c},
      {"lengths_file", "lengths.npy"},
      {"attentions_file", "attentions.npy"},
      {"logits_file", "logits.npy"},
      {"labels_file", "labels.npy"},
      {"token_flags_file", "token_flags.npy"},
  };
  if (dump.has_embeddings()) {
    write_tensor(dir / "embeddings.npy",
                 Tensor({s, dump.embedding_dim}, dump.embeddings));
    m["embeddings_file"] = "embeddings.npy";
  }
  if (!dump.embedding_source.empty()) {
    m["embedding_source"] = dump.embedding_source;
  }
  if (dump.has_mc_probs()) {
    write_tensor(dir / "mc_probs.npy",
                 Tensor({dump.mc_runs, s, c}, dump.mc_probs));
    m["mc_probs_file"] = "mc_probs.npy";
    m["mc_runs"] = dump.mc_runs;
  }
  std::ofstream out(dir / "manifest.json");
  out << m.dump(2) << '\n';
  if (!out) {
    throw Error("cannot write " + (dir / "manifest.json").string());
  }
}

}  // namespace attn_topo
