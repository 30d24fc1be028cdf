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

#include "attn_topo/persistence.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <map>
#include <numeric>
#include <string>
#include <tuple>
#include <unordered_map>

#include "attn_topo/errors.h"

namespace attn_topo {
namespace {

struct Edge {
  double value;
  std::uint32_t i, j;  // i < j

  auto key() const { return std::tie(value, i, j); }
  bool operator<(const Edge& o) const { return key() < o.key(); }
};

// A triangle identified by its filtration value and the lexicographic code
// of its sorted vertex triple.
struct Triangle {
  double value;
  std::uint64_t code;

  bool operator<(const Triangle& o) const {
    return value < o.value || (value == o.value && code < o.code);
  }
  bool operator==(const Triangle& o) const { return code == o.code; }
};

std::vector<Edge> sorted_edges(const DistanceMatrix& d) {
  const std::size_t n = d.size();
  std::vector<Edge> edges;
  edges.reserve(n * (n - 1) / 2);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = i + 1; j < n; ++j) edges.push_back({d(i, j), i, j});
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) {
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
    parent_[std::max(a, b)] = std::min(a, b);
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

// Z/2 column addition of two columns sorted by filtration order.
template <typename T>
void add_column(std::vector<T>& target, const std::vector<T>& source,
                std::vector<T>& scratch) {
  scratch.clear();
  std::set_symmetric_difference(target.begin(), target.end(), source.begin(),
                                source.end(), std::back_inserter(scratch));
  target.swap(scratch);
}

void push_bar(Barcode& out, double birth, double death, int dim,
              bool essential = false) {
  // Zero-length H0 bars kept: one bar per point.
  if (dim > 0 && !essential && death <= birth) return;
  out.bars.push_back({birth, death, dim, essential});
}

}  // namespace

DistanceMatrix::DistanceMatrix(std::size_t n, std::vector<double> values)
    : n_(n), d_(std::move(values)) {
  if (d_.size() != n_ * n_) {
    throw ValidationError("distance matrix of size " + std::to_string(n_) +
                          " needs " + std::to_string(n_ * n_) + " entries");
  }
}

void DistanceMatrix::validate() const {
  for (std::size_t i = 0; i < n_; ++i) {
    if ((*this)(i, i) != 0.0) {
      throw ValidationError("distance matrix diagonal must be zero");
    }
    for (std::size_t j = i + 1; j < n_; ++j) {
      const double v = (*this)(i, j);
      if (v != (*this)(j, i)) {
        throw ValidationError("distance matrix must be symmetric");
      }
      if (!(v >= 0.0 && v <= kDeathCap)) {
        throw ValidationError("distance " + std::to_string(v) +
                              " outside [0, 1]");
      }
    }
  }
}

std::vector<Bar> Barcode::dimension(int dim) const {
  std::vector<Bar> out;
  for (const Bar& b : bars) {
    if (b.dim == dim) out.push_back(b);
  }
  return out;
}

std::vector<Bar> Barcode::sorted() const {
  std::vector<Bar> out = bars;
  std::sort(out.begin(), out.end());
  return out;
}

DistanceMatrix to_distance(const AttentionMatrix& a) {
  const std::size_t n = a.size();
  DistanceMatrix d(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double w = std::clamp(std::max(a(i, j), a(j, i)), 0.0, 1.0);
      d.set(i, j, 1.0 - w);
    }
  }
  return d;
}

Barcode vr_barcode(const DistanceMatrix& d, int max_dim) {
  const std::size_t n = d.size();
  Barcode out;
  if (n == 0) return out;
  if (max_dim >= 1 && n > kMaxRipsPoints) {
    throw Error("vr_barcode: " + std::to_string(n) +
                " points exceed the triangle enumeration cap of " +
                std::to_string(kMaxRipsPoints));
  }

  const std::vector<Edge> edges = sorted_edges(d);

  // H0: each edge joining two components kills the younger one. All births
  // are 0, so the elder rule only matters for which bar is essential.
  std::vector<bool> cleared(edges.size(), false);
  UnionFind sets(n);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (sets.unite(edges[e].i, edges[e].j)) {
      push_bar(out, 0.0, edges[e].value, 0);
      cleared[e] = true;
    }
  }
  push_bar(out, 0.0, kDeathCap, 0, /*essential=*/true);
  if (max_dim < 1 || n < 3) return out;

  // H1: coboundary columns in reverse filtration order. The pivot of a
  // column is its earliest cofacet; columns of H0 death edges are zero and
  // skipped (clearing).
  const std::uint64_t nn = n;
  std::vector<std::vector<Triangle>> reduced;
  std::unordered_map<std::uint64_t, std::size_t> pivot_owner;
  std::vector<Triangle> column, scratch;
  for (std::size_t e = edges.size(); e-- > 0;) {
    if (cleared[e]) continue;
    const Edge& edge = edges[e];
    column.clear();
    for (std::uint32_t k = 0; k < n; ++k) {
      if (k == edge.i || k == edge.j) continue;
      std::uint32_t v[3] = {edge.i, edge.j, k};
      std::sort(v, v + 3);
      const double value = std::max({edge.value, d(edge.i, k), d(edge.j, k)});
      column.push_back({value, (v[0] * nn + v[1]) * nn + v[2]});
    }
    std::sort(column.begin(), column.end());
    while (!column.empty()) {
      auto it = pivot_owner.find(column.front().code);
      if (it == pivot_owner.end()) break;
      add_column(column, reduced[it->second], scratch);
    }
    if (column.empty()) {
      push_bar(out, edge.value, kDeathCap, 1, /*essential=*/true);
      continue;
    }
    push_bar(out, edge.value, column.front().value, 1);
    pivot_owner.emplace(column.front().code, reduced.size());
    reduced.push_back(column);
  }
  return out;
}

Barcode brute_force_barcode(const DistanceMatrix& d, int max_dim) {
  const std::size_t n = d.size();
  if (n > kMaxOraclePoints) {
    throw Error("brute_force_barcode: " + std::to_string(n) +
                " points exceed the oracle limit of " +
                std::to_string(kMaxOraclePoints));
  }
  struct Simplex {
    double value;
    int dim;
    std::vector<std::uint32_t> vertices;
  };
  std::vector<Simplex> simplices;
  for (std::uint32_t i = 0; i < n; ++i) simplices.push_back({0.0, 0, {i}});
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = i + 1; j < n; ++j) {
      simplices.push_back({d(i, j), 1, {i, j}});
    }
  }
  if (max_dim >= 1) {
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint32_t j = i + 1; j < n; ++j) {
        for (std::uint32_t k = j + 1; k < n; ++k) {
          simplices.push_back(
              {std::max({d(i, j), d(i, k), d(j, k)}), 2, {i, j, k}});
        }
      }
    }
  }
  std::sort(simplices.begin(), simplices.end(),
            [](const Simplex& a, const Simplex& b) {
              return std::tie(a.value, a.dim, a.vertices) <
                     std::tie(b.value, b.dim, b.vertices);
            });
  std::map<std::vector<std::uint32_t>, std::size_t> position;
  for (std::size_t s = 0; s < simplices.size(); ++s) {
    position.emplace(simplices[s].vertices, s);
  }

  // Boundary columns as sorted filtration positions; low = last entry.
  const std::size_t m = simplices.size();
  std::vector<std::vector<std::size_t>> columns(m);
  for (std::size_t s = 0; s < m; ++s) {
    const auto& v = simplices[s].vertices;
    if (v.size() < 2) continue;
    for (std::size_t drop = 0; drop < v.size(); ++drop) {
      std::vector<std::uint32_t> face;
      for (std::size_t k = 0; k < v.size(); ++k) {
        if (k != drop) face.push_back(v[k]);
      }
      columns[s].push_back(position.at(face));
    }
    std::sort(columns[s].begin(), columns[s].end());
  }

  std::vector<std::size_t> low_owner(m, m);
  std::vector<bool> paired(m, false);
  std::vector<std::size_t> scratch;
  Barcode out;
  for (std::size_t s = 0; s < m; ++s) {
    auto& col = columns[s];
    while (!col.empty() && low_owner[col.back()] != m) {
      add_column(col, columns[low_owner[col.back()]], scratch);
    }
    if (col.empty()) continue;
    const std::size_t low = col.back();
    low_owner[low] = s;
    paired[low] = paired[s] = true;
    const Simplex& birth = simplices[low];
    if (birth.dim <= max_dim) {
      push_bar(out, birth.value, simplices[s].value, birth.dim);
    }
  }
  for (std::size_t s = 0; s < m; ++s) {
    if (paired[s] || simplices[s].dim > max_dim) continue;
    push_bar(out, simplices[s].value, kDeathCap, simplices[s].dim,
             /*essential=*/true);
  }
  return out;
}

const std::array<std::string_view, BarcodeStats::kCount> BarcodeStats::kNames =
    {"h0_sum",        "h0_variance",   "h0_entropy",      "h0_longest_birth",
     "h0_count",      "h0_early_births", "h0_late_deaths", "h1_sum",
     "h1_variance",   "h1_entropy",    "h1_longest_birth", "h1_count",
     "h1_early_births", "h1_late_deaths"};

std::array<double, BarcodeStats::kCount> BarcodeStats::values() const {
  std::array<double, kCount> out{};
  for (std::size_t h = 0; h < 2; ++h) {
    const DimensionStats& s = dims[h];
    const std::size_t o = h * 7;
    out[o + 0] = s.sum_lengths;
    out[o + 1] = s.variance_lengths;
    out[o + 2] = s.entropy_lengths;
    out[o + 3] = s.birth_of_longest;
    out[o + 4] = s.bar_count;
    out[o + 5] = s.count_birth_leq;
    out[o + 6] = s.count_death_geq;
  }
  return out;
}

BarcodeStats barcode_stats(const Barcode& barcode, double birth_threshold,
                           double death_threshold) {
  BarcodeStats stats;
  for (int h = 0; h < 2; ++h) {
    DimensionStats& s = stats.dims[h];
    std::vector<double> lengths;
    double longest = -1.0;
    for (const Bar& b : barcode.bars) {
      if (b.dim != h) continue;
      const double len = b.length();
      lengths.push_back(len);
      if (len > longest) {
        longest = len;
        s.birth_of_longest = b.birth;
      }
      if (b.birth <= birth_threshold) s.count_birth_leq += 1;
      if (b.death >= death_threshold) s.count_death_geq += 1;
    }
    if (lengths.empty()) continue;
    const double count = static_cast<double>(lengths.size());
    s.bar_count = count;
    s.sum_lengths = std::accumulate(lengths.begin(), lengths.end(), 0.0);
    const double mean = s.sum_lengths / count;
    double sq = 0.0;
    for (double l : lengths) sq += (l - mean) * (l - mean);
    s.variance_lengths = sq / count;
    if (lengths.size() > 1 && s.sum_lengths > 0.0) {
      double entropy = 0.0;
      for (double l : lengths) {
        if (l <= 0.0) continue;
        const double p = l / s.sum_lengths;
        entropy -= p * std::log(p);
      }
      s.entropy_lengths = std::max(0.0, entropy);
    }
  }
  return stats;
}

DistanceMatrix cross_distance(const AttentionMatrix& a,
                              const AttentionMatrix& b) {
  if (a.size() != b.size()) {
    throw ValidationError("cross_barcode: matrix sizes differ (" +
                          std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  const std::size_t n = a.size();
  DistanceMatrix d(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double w = std::clamp(std::max(a(i, j), a(j, i)), 0.0, 1.0);
      const double w2 = std::clamp(std::max(b(i, j), b(j, i)), 0.0, 1.0);
      const double dm = 1.0 - std::min(w, w2);
      d.set(i, j, 1.0 - w);
      d.set(i, n + j, dm);
      d.set(j, n + i, dm);
    }
  }
  return d;
}

CrossBarcodeFeature cross_barcode(const AttentionMatrix& a,
                                  const AttentionMatrix& b) {
  CrossBarcodeFeature out;
  const Barcode full = vr_barcode(cross_distance(a, b), 1);
  for (const Bar& bar : full.bars) {
    if (bar.essential) continue;
    out.barcode.bars.push_back(bar);
    out.total_length += bar.length();
  }
  return out;
}

}  // namespace attn_topo
