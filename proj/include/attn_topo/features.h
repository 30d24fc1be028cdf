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

// Turns an attention dump into a sample-by-feature matrix and keeps track of
// where every column came from.
//
// Column order is family-major: all graph columns, then barcode, template
// and cross-barcode columns. Inside a family, columns run over layers, then
// heads, then the family's subtypes. Layers and heads are 0-based in C++
// and 1-based in every JSON file.

#ifndef ATTN_TOPO_FEATURES_H_
#define ATTN_TOPO_FEATURES_H_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attn_topo/dataset.h"
#include "attn_topo/linalg.h"
#include "attn_topo/matrix_features.h"
#include "attn_topo/persistence.h"
#include "json.hpp"

namespace attn_topo {

enum class Family { kGraph, kBarcode, kTemplate, kCrossBarcode };

std::string_view family_name(Family family);
// Accepts "graph", "barcode", "template", "crossbarcode".
Family parse_family(std::string_view name);
std::size_t family_width(Family family);
std::string_view subtype_name(Family family, std::size_t subtype);

struct HeadRef {
  std::uint32_t layer = 0;
  std::uint32_t head = 0;
  auto operator<=>(const HeadRef&) const = default;
};

struct HeadPair {
  HeadRef first;
  HeadRef second;
  auto operator<=>(const HeadPair&) const = default;
};

struct FeatureKey {
  Family family = Family::kGraph;
  std::uint32_t subtype = 0;
  std::optional<HeadRef> head;     // empty for aggregated columns
  std::optional<HeadRef> partner;  // cross-barcode partner head

  std::string name() const;
  auto operator<=>(const FeatureKey&) const = default;
};

class FeatureIndex {
 public:
  FeatureIndex() = default;
  explicit FeatureIndex(std::vector<FeatureKey> entries);

  std::size_t size() const { return entries_.size(); }
  const FeatureKey& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<FeatureKey>& entries() const { return entries_; }

  FeatureIndex subset(std::span<const std::size_t> positions) const;

  nlohmann::json to_json() const;
  static FeatureIndex from_json(const nlohmann::json& j);

  bool operator==(const FeatureIndex&) const = default;

 private:
  std::vector<FeatureKey> entries_;
};

struct FeatureConfig {
  std::vector<Family> families = {Family::kGraph, Family::kBarcode,
                                  Family::kTemplate};
  double edge_threshold = kDefaultEdgeThreshold;
  double birth_threshold = kDefaultBirthThreshold;
  double death_threshold = kDefaultDeathThreshold;
  // Cross-barcode pairs; only used when kCrossBarcode is enabled.
  std::vector<HeadPair> pairs;
};

// The pair grid of the cross-barcode study: rows (i, k) for i in
// {2, 4, ..., 12}, columns (k, j) for j in {1, 3, ..., 11}, k = 12 (1-based).
struct PairGrid {
  std::vector<HeadRef> rows;
  std::vector<HeadRef> cols;
};
PairGrid default_pair_grid();

FeatureIndex build_index(const FeatureConfig& config, std::size_t num_layers,
                         std::size_t num_heads);

struct FeatureMatrix {
  RowMatrix values;  // samples x features
  FeatureIndex index;
  // Training-split column statistics; empty until attached.
  std::vector<double> train_mean;
  std::vector<double> train_std;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

// Raw features; template CLS distances may hold kMissingValue. Samples are
// processed on `threads` workers (0 = hardware concurrency).
FeatureMatrix extract_features(const AttentionDump& dump,
                               const FeatureConfig& config, int threads = 1);

// One column per (family, subtype) holding the mean over layers, heads and
// pairs. Missing values are skipped.
FeatureMatrix aggregate_mean(const FeatureMatrix& fm);

// Keeps the listed columns in the listed order.
FeatureMatrix select_columns(const FeatureMatrix& fm,
                             std::span<const std::size_t> positions);

struct ColumnStats {
  std::vector<double> mean;
  std::vector<double> std;  // population
};

// Ignores missing values; an all-missing column gets mean 0 and std 0.
ColumnStats fit_column_stats(const RowMatrix& values);

// Replaces missing values by the given column means.
void impute_missing(RowMatrix& values, std::span<const double> mean);

// Imputes both splits with training means and records the training
// statistics on both.
void attach_train_stats(FeatureMatrix& train, FeatureMatrix& test);

// Column selection and z-scoring fitted on training data. Columns with zero
// training variance are dropped.
struct Standardizer {
  std::vector<std::size_t> kept;
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<std::size_t> dropped;

  static Standardizer fit(const RowMatrix& train);
  // Missing values map to 0, the training mean.
  RowMatrix apply(const RowMatrix& values) const;

  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& j);
};

// `<stem>.npy` holds the float64 values, `<stem>.json` the index and
// training statistics.
void save_feature_matrix(const FeatureMatrix& fm,
                         const std::filesystem::path& stem);
FeatureMatrix load_feature_matrix(const std::filesystem::path& stem);

nlohmann::json head_pair_to_json(const HeadPair& pair);
HeadPair head_pair_from_json(const nlohmann::json& j);

}  // namespace attn_topo

#endif  // ATTN_TOPO_FEATURES_H_
