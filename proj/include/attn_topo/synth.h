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

// Synthetic attention dumps with a planted error signal.

#ifndef ATTN_TOPO_SYNTH_H_
#define ATTN_TOPO_SYNTH_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "attn_topo/dataset.h"
#include "json.hpp"

namespace attn_topo {

struct SynthSpec {
  std::size_t train_samples = 2000;
  std::size_t test_samples = 2000;
  std::size_t max_tokens = 16;
  std::size_t min_length = 6;
  std::size_t num_classes = 2;
  std::size_t num_layers = 2;
  std::size_t num_heads = 2;
  double error_rate = 0.2;
  // Added to the signal head's diagonal weight on misclassified samples.
  double signal = 0.7;
  double base_diagonal = 0.2;
  double jitter = 0.05;
  // 1-based; 0 means the last layer / last head.
  std::size_t signal_layer = 0;
  std::size_t signal_head = 0;
  std::size_t embedding_dim = 8;
  // Shift of misclassified embeddings along the last embedding axis.
  double embedding_signal = 1.5;
  // Logit margin of the predicted class: correct ~ U(m, m + 2), wrong ~
  // U(m - margin_gap, m + 2 - margin_gap).
  double margin = 0.5;
  double margin_gap = 0.3;
  std::size_t mc_runs = 0;
  double mc_noise = 0.5;
  double punct_rate = 0.15;
  std::uint64_t seed = 0;

  void validate() const;
  // Zero-based signal coordinates.
  std::size_t signal_layer_index() const;
  std::size_t signal_head_index() const;

  nlohmann::json to_json() const;
  static SynthSpec from_json(const nlohmann::json& j);
};

// Exactly round(error_rate * samples) samples are misclassified.
AttentionDump synthesize(const SynthSpec& spec, std::size_t samples,
                         std::uint64_t seed, const std::string& split);

struct SynthPaths {
  std::filesystem::path train_manifest;
  std::filesystem::path test_manifest;
};

// Writes <out>/train and <out>/test.
SynthPaths write_synthetic(const SynthSpec& spec, const std::filesystem::path& out);

}  // namespace attn_topo

#endif  // ATTN_TOPO_SYNTH_H_
