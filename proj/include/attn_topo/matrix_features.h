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

// Per-matrix statistics that do not need a filtration: counts on the
// thresholded attention graph and distances to fixed attention templates.

#ifndef ATTN_TOPO_MATRIX_FEATURES_H_
#define ATTN_TOPO_MATRIX_FEATURES_H_

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>

#include "attn_topo/attention.h"

namespace attn_topo {

inline constexpr double kDefaultEdgeThreshold = 0.1;

// Marks a template distance that cannot be computed (no CLS token).
inline constexpr double kMissingValue = std::numeric_limits<double>::quiet_NaN();

struct GraphFeatures {
  static constexpr std::size_t kCount = 7;
  static constexpr std::array<std::string_view, kCount> kNames = {
      "vertices", "self_loops", "weak_components", "edges",
      "avg_degree", "betti0",   "betti1"};

  double vertices = 0;
  double self_loops = 0;
  double weak_components = 0;
  double edges = 0;  // directed, i != j
  double avg_degree = 0;
  double betti0 = 0;
  double betti1 = 0;

  std::array<double, kCount> values() const {
    return {vertices, self_loops, weak_components, edges,
            avg_degree, betti0,   betti1};
  }
};

// Graph with a directed edge i->j (i != j) wherever w_ij >= threshold.
// Components are weak components; betti1 is the cycle rank of the
// undirected symmetrization (E_undirected - n + components); avg_degree is
// 2 * E_undirected / n.
GraphFeatures graph_features(const AttentionMatrix& a,
                             double threshold = kDefaultEdgeThreshold);

struct TemplateFeatures {
  static constexpr std::size_t kCount = 5;
  static constexpr std::array<std::string_view, kCount> kNames = {
      "dist_prev", "dist_current", "dist_next", "dist_cls", "dist_punct"};

  double dist_prev = 0;
  double dist_current = 0;
  double dist_next = 0;
  double dist_cls = 0;  // kMissingValue without a CLS token
  double dist_punct = 0;

  std::array<double, kCount> values() const {
    return {dist_prev, dist_current, dist_next, dist_cls, dist_punct};
  }
};

// Frobenius distances ||A - P|| to the 0/1 pattern matrices: previous token
// (P[i][i-1]), current token (identity), next token (P[i][i+1]), the CLS
// column, and every SEP or punctuation column. `flags` must have one entry
// per token of `a`.
TemplateFeatures template_features(const AttentionMatrix& a,
                                   std::span<const std::uint8_t> flags);

}  // namespace attn_topo

#endif  // ATTN_TOPO_MATRIX_FEATURES_H_
