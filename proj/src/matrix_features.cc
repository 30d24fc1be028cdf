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

#include "attn_topo/matrix_features.h"

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "attn_topo/errors.h"

namespace attn_topo {
namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

// Squared Frobenius distance to a 0/1 pattern given as a predicate.
template <typename Pattern>
double pattern_distance(const AttentionMatrix& a, Pattern&& on) {
  const std::size_t n = a.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double diff = a(i, j) - (on(i, j) ? 1.0 : 0.0);
      total += diff * diff;
    }
  }
  return std::sqrt(total);
}

}  // namespace

GraphFeatures graph_features(const AttentionMatrix& a, double threshold) {
  const std::size_t n = a.size();
  GraphFeatures g;
  g.vertices = static_cast<double>(n);
  DisjointSets sets(n);
  std::size_t components = n;
  std::size_t directed = 0;
  std::size_t undirected = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (a(i, i) >= threshold) g.self_loops += 1;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool forward = a(i, j) >= threshold;
      if (forward) ++directed;
      if (j > i && (forward || a(j, i) >= threshold)) {
        ++undirected;
        if (sets.unite(i, j)) --components;
      }
    }
  }
  g.edges = static_cast<double>(directed);
  g.weak_components = static_cast<double>(components);
  g.betti0 = g.weak_components;
  g.betti1 = static_cast<double>(undirected + components - n);
  g.avg_degree = n == 0 ? 0.0 : 2.0 * static_cast<double>(undirected) / n;
  return g;
}

TemplateFeatures template_features(const AttentionMatrix& a,
                                   std::span<const std::uint8_t> flags) {
  const std::size_t n = a.size();
  if (flags.size() != n) {
    throw ValidationError("template_features: " + std::to_string(flags.size()) +
                          " token flags for a " + std::to_string(n) +
                          "-token attention matrix");
  }
  TemplateFeatures t;
  t.dist_prev = pattern_distance(
      a, [](std::size_t i, std::size_t j) { return i >= 1 && j == i - 1; });
  t.dist_current =
      pattern_distance(a, [](std::size_t i, std::size_t j) { return i == j; });
  t.dist_next = pattern_distance(
      a, [](std::size_t i, std::size_t j) { return j == i + 1; });

  std::size_t cls = n;
  for (std::size_t k = 0; k < n; ++k) {
    if (flags[k] & kTokenCls) {
      cls = k;
      break;
    }
  }
  t.dist_cls = cls == n ? kMissingValue
                        : pattern_distance(a, [cls](std::size_t, std::size_t j) {
                            return j == cls;
                          });
  t.dist_punct = pattern_distance(a, [&](std::size_t, std::size_t j) {
    return (flags[j] & (kTokenSep | kTokenPunct)) != 0;
  });
  return t;
}

}  // namespace attn_topo
