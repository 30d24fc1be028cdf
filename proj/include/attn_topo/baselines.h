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

// Classical uncertainty estimators that only need dumped artifacts. All of
// them return an uncertainty u (larger = less confident); negate it to rank
// samples by confidence.

#ifndef ATTN_TOPO_BASELINES_H_
#define ATTN_TOPO_BASELINES_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

#include "attn_topo/confidence_model.h"
#include "attn_topo/dataset.h"
#include "attn_topo/linalg.h"

namespace attn_topo {

// u = 1 - max_c p_c.
double softmax_response(std::span<const double> p);

struct MahalanobisStats {
  RowMatrix centroids;         // C x D
  Eigen::MatrixXd covariance;  // D x D, regularized
  Eigen::MatrixXd precision;   // inverse of covariance
  double ridge = 0.0;
};

// Class centroids and the pooled within-class covariance (normalized by
// S - C) plus gamma * I with gamma = 1e-3 * trace / D, or 1e-3 when the
// trace is zero. Every class needs at least two samples.
MahalanobisStats fit_mahalanobis(const RowMatrix& embeddings,
                                 std::span<const std::uint32_t> labels,
                                 std::size_t num_classes);

// Builds stats from given centroids and covariance (precision via LLT).
MahalanobisStats make_mahalanobis(RowMatrix centroids, Eigen::MatrixXd covariance);

// min_c (h - mu_c)^T Sigma^-1 (h - mu_c).
double mahalanobis_uncertainty(const MahalanobisStats& stats,
                               std::span<const double> h);

enum class McMode { kSrOfMean, kPredictiveEntropy, kProbabilityVariance };

McMode parse_mc_mode(std::string_view name);
std::string_view mc_mode_name(McMode mode);

// `runs` is R x C row-major with R >= 2.
//   kSrOfMean: 1 - max of the mean probability vector.
//   kPredictiveEntropy: entropy (natural log) of the mean vector.
//   kProbabilityVariance: population variance across runs of the
//     probability of the class predicted by the mean vector.
double mc_dropout_uncertainty(std::span<const double> runs,
                              std::size_t num_classes,
                              McMode mode = McMode::kSrOfMean);

struct EmbeddingEstimate {
  Eigen::VectorXd train_confidence;
  Eigen::VectorXd test_confidence;
  std::size_t input_dim = 0;
};

// Trains the confidence model on embeddings instead of topological
// features. Throws ValidationError when either dump lacks embeddings.
EmbeddingEstimate embedding_estimator(const AttentionDump& train,
                                      const AttentionDump& test,
                                      const TrainConfig& config);

RowMatrix embedding_matrix(const AttentionDump& dump);

}  // namespace attn_topo

#endif  // ATTN_TOPO_BASELINES_H_
