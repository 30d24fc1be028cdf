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

#ifndef ATTN_TOPO_DATASET_H_
#define ATTN_TOPO_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "attn_topo/attention.h"

namespace attn_topo {

// Everything dumped from the transformer for one split. Buffers are
// row-major with the shapes noted next to each field.
struct AttentionDump {
  std::string split;
  std::size_t num_samples = 0;
  std::size_t num_layers = 0;
  std::size_t num_heads = 0;
  std::size_t max_tokens = 0;
  std::size_t num_classes = 0;

  std::vector<std::uint32_t> lengths;   // [S]
  std::vector<float> attentions;        // [S, N_l, N_h, T, T]
  std::vector<float> logits;            // [S, C]
  std::vector<std::uint32_t> labels;    // [S]
  std::size_t embedding_dim = 0;
  std::vector<float> embeddings;        // [S, D], empty when not dumped
  std::vector<std::uint8_t> token_flags;  // [S, T]
  std::size_t mc_runs = 0;
  std::vector<float> mc_probs;          // [R, S, C], empty when not dumped
  std::string embedding_source;         // free-form note from the extractor

  // Attention of one head sliced to the sample's real tokens.
  AttentionMatrix attention(std::size_t sample, std::size_t layer,
                            std::size_t head) const;
  // Token flags sliced to the sample's real tokens.
  std::span<const std::uint8_t> flags(std::size_t sample) const;

  // Softmax of the dumped logits.
  std::vector<double> probabilities(std::size_t sample) const;
  std::size_t predicted_class(std::size_t sample) const;
  bool correct(std::size_t sample) const;

  bool has_embeddings() const { return embedding_dim > 0; }
  bool has_mc_probs() const { return mc_runs > 0; }
  // [R, C] probabilities of one sample across the stochastic runs.
  std::vector<double> mc_sample(std::size_t sample) const;

  // Checks every cross-field invariant; throws ValidationError.
  void validate() const;
};

// Parses manifest.json, loads every referenced file (paths relative to the
// manifest's directory) and validates shapes and values.
AttentionDump load_dataset(const std::filesystem::path& manifest_path);

// Writes the NPY files and manifest.json into `dir` (created if needed).
void save_dataset(const AttentionDump& dump, const std::filesystem::path& dir);

}  // namespace attn_topo

#endif  // ATTN_TOPO_DATASET_H_
