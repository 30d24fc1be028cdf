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

// Permutation-sampling Shapley values. For each sample z the features are
// switched from the baseline to z one at a time in a random order and each
// feature is credited with the change in model output; credits are averaged
// over permutations.

#ifndef ATTN_TOPO_SHAPLEY_H_
#define ATTN_TOPO_SHAPLEY_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "attn_topo/confidence_model.h"
#include "attn_topo/features.h"
#include "attn_topo/linalg.h"
#include "json.hpp"

namespace attn_topo {

// Exhaustive enumeration is limited to 8! orderings.
inline constexpr std::size_t kMaxExhaustiveFeatures = 8;

struct ShapleyOptions {
  int permutations = 128;
  std::uint64_t seed = 0;
  // Average over all F! orderings instead of sampling.
  bool exhaustive = false;
};

struct ShapleyReport {
  RowMatrix phi;  // samples x features
  std::vector<double> mean_abs;
  std::vector<double> variance;  // population variance across samples
  // Feature positions by decreasing variance; ties by position.
  std::vector<std::size_t> ranking;

  nlohmann::json to_json(const FeatureIndex* index = nullptr) const;
};

using ValueFunction = std::function<double(std::span<const double>)>;

ShapleyReport shapley_values(const ValueFunction& value, const RowMatrix& samples,
                             std::span<const double> baseline,
                             const ShapleyOptions& options);

// Same estimator specialised to the confidence model: each feature switch
// updates the hidden pre-activations in O(hidden) instead of re-running the
// whole network. `samples` must already be standardized.
ShapleyReport shapley_attribution(const ConfidenceModel& model,
                                  const RowMatrix& samples,
                                  std::span<const double> baseline,
                                  const ShapleyOptions& options);

// The k positions with the largest Shapley-value variance, returned in
// ascending position order.
std::vector<std::size_t> select_top(const ShapleyReport& report, std::size_t k);

struct HeadImportance {
  HeadRef head;
  double score = 0.0;  // summed variance over the head's features
  std::size_t features = 0;
};

// Per-head totals, highest first; ties by head. index labels report columns.
// Columns without a head are skipped; cross-barcode columns count for their
// first head.
std::vector<HeadImportance> rank_heads(const ShapleyReport& report, const FeatureIndex& index);

}  // namespace attn_topo

#endif  // ATTN_TOPO_SHAPLEY_H_
