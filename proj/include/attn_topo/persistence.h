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

// Vietoris-Rips persistence (H0 and H1) of attention graphs, the barcode
// statistics built on top of it, and cross-barcodes between two heads.
//
// Attention weights w in [0, 1] become distances d = 1 - max(w_ij, w_ji) and
// the complex grows with the distance threshold. Simplices are totally
// ordered by (filtration value, dimension, lexicographic vertex tuple), so
// every result below is deterministic. Essential bars are capped at 1.0,
// the largest possible distance.

#ifndef ATTN_TOPO_PERSISTENCE_H_
#define ATTN_TOPO_PERSISTENCE_H_

#include <array>
#include <compare>
#include <cstddef>
#include <string_view>
#include <vector>

#include "attn_topo/attention.h"

namespace attn_topo {

inline constexpr double kDeathCap = 1.0;
// Largest point count for which triangles are enumerated.
inline constexpr std::size_t kMaxRipsPoints = 512;
// Largest point count accepted by the dense reduction oracle.
inline constexpr std::size_t kMaxOraclePoints = 10;

inline constexpr double kDefaultBirthThreshold = 0.25;
inline constexpr double kDefaultDeathThreshold = 0.75;

// Symmetric, zero-diagonal distances in [0, 1].
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), d_(n * n, 0.0) {}
  DistanceMatrix(std::size_t n, std::vector<double> values);

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }
  // Sets both (i, j) and (j, i).
  void set(std::size_t i, std::size_t j, double value) {
    d_[i * n_ + j] = value;
    d_[j * n_ + i] = value;
  }

  void validate() const;

 private:
  std::size_t n_ = 0;
  std::vector<double> d_;
};

struct Bar {
  double birth = 0;
  double death = 0;
  int dim = 0;
  // Never killed in the filtration; death holds the cap.
  bool essential = false;

  double length() const { return death - birth; }
  auto operator<=>(const Bar&) const = default;
};

struct Barcode {
  std::vector<Bar> bars;

  std::vector<Bar> dimension(int dim) const;
  // Bars sorted by (birth, death, dim, essential); for multiset comparison.
  std::vector<Bar> sorted() const;
};

// d_ij = 1 - max(w_ij, w_ji) for i != j, zero diagonal.
DistanceMatrix to_distance(const AttentionMatrix& a);

// H0 by union-find over edges in filtration order; H1 by Z/2 cohomology
// reduction with clearing of the H0 death edges. H0 keeps zero-length bars
// (exactly n bars, one essential); H1 drops them. Throws Error when
// max_dim >= 1 and the matrix has more than kMaxRipsPoints points.
Barcode vr_barcode(const DistanceMatrix& d, int max_dim = 1);

// Dense boundary-matrix reduction over the full simplexwise filtration of
// the 2-skeleton. Same bar conventions as vr_barcode. Test oracle only;
// throws Error beyond kMaxOraclePoints points.
Barcode brute_force_barcode(const DistanceMatrix& d, int max_dim = 1);

struct DimensionStats {
  double sum_lengths = 0;
  double variance_lengths = 0;  // population variance
  double entropy_lengths = 0;   // natural log
  double birth_of_longest = 0;
  double bar_count = 0;
  double count_birth_leq = 0;   // birth <= birth threshold
  double count_death_geq = 0;   // death >= death threshold
};

struct BarcodeStats {
  static constexpr std::size_t kCount = 14;
  static const std::array<std::string_view, kCount> kNames;

  std::array<DimensionStats, 2> dims;

  // H0 statistics followed by H1, in DimensionStats field order.
  std::array<double, kCount> values() const;
};

BarcodeStats barcode_stats(const Barcode& barcode,
                           double birth_threshold = kDefaultBirthThreshold,
                           double death_threshold = kDefaultDeathThreshold);

// The 2n-point distance matrix comparing `w` with min(w, w'):
// [[d_w, d_m], [d_m^T, 0]] with d_w = 1 - sym(w), d_m = 1 - min(sym(w),
// sym(w')) and zero distances inside the second copy and between a vertex
// and its own copy.
DistanceMatrix cross_distance(const AttentionMatrix& a, const AttentionMatrix& b);

struct CrossBarcodeFeature {
  double total_length = 0;
  Barcode barcode;  // without the essential H0 bar
};

// Throws ValidationError when the matrices differ in size.
CrossBarcodeFeature cross_barcode(const AttentionMatrix& a,
                                  const AttentionMatrix& b);

}  // namespace attn_topo

#endif  // ATTN_TOPO_PERSISTENCE_H_
