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

// The JSON run configuration shared by all subcommands.

#ifndef ATTN_TOPO_CONFIG_H_
#define ATTN_TOPO_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "attn_topo/baselines.h"
#include "attn_topo/confidence_model.h"
#include "attn_topo/evaluation.h"
#include "attn_topo/features.h"
#include "attn_topo/synth.h"
#include "json.hpp"

namespace attn_topo {

struct BaselineConfig {
  // Any of softmax_response, mahalanobis, mc_dropout, embedding.
  std::vector<std::string> methods = {"softmax_response", "mahalanobis",
                                      "mc_dropout", "embedding"};
  McMode mc_mode = McMode::kSrOfMean;
};

struct ShapleyConfig {
  int permutations = 128;
  // Training samples explained; 0 = all.
  std::size_t max_samples = 256;
  std::size_t top_k = 10;
  bool exhaustive = false;
};

struct RunConfig {
  std::filesystem::path train_manifest;
  std::filesystem::path test_manifest;
  std::filesystem::path workdir = "work";
  std::uint64_t seed = 0;

  FeatureConfig features;
  // Average each (family, subtype) over heads instead of one column per head.
  bool aggregate = false;
  // Feature positions to keep after extraction; empty keeps all.
  std::vector<std::size_t> columns;

  TrainConfig train;  // train.seed mirrors `seed`
  EvalOptions evaluation;
  BaselineConfig baselines;
  ShapleyConfig shapley;
  PairGrid pairgrid = default_pair_grid();
  SynthSpec synth;  // synth.seed mirrors `seed`

  // The document as given (after overrides), kept for provenance.
  nlohmann::json source = nlohmann::json::object();

  // Relative paths resolve against `base_dir`.
  static RunConfig from_json(const nlohmann::json& j,
                             const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;
};

// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON
// when possible and kept as a string otherwise.
void apply_override(nlohmann::json& doc, std::string_view assignment);

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});

// Human-readable list of keys and defaults.
std::string config_help();

}  // namespace attn_topo

#endif  // ATTN_TOPO_CONFIG_H_
