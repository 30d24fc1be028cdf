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

#include "attn_topo/baselines.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "attn_topo/errors.h"
#include "attn_topo/predictor.h"

namespace attn_topo {

double softmax_response(std::span<const double> p) {
  if (p.empty()) throw ValidationError("softmax_response: empty probability vector");
  return 1.0 - *std::max_element(p.begin(), p.end());
}

MahalanobisStats make_mahalanobis(RowMatrix centroids,
                                  Eigen::MatrixXd covariance) {
  if (covariance.rows() != covariance.cols() ||
      covariance.rows() != centroids.cols()) {
    throw ValidationError("mahalanobis: covariance and centroid dimensions differ");
  }
  MahalanobisStats s;
  s.centroids = std::move(centroids);
  s.covariance = std::move(covariance);
  Eigen::LLT<Eigen::MatrixXd> llt(s.covariance);
  if (llt.info() != Eigen::Success) {
    throw Error("mahalanobis: covariance is not positive definite");
  }
  s.precision = llt.solve(
      Eigen::MatrixXd::Identity(s.covariance.rows(), s.covariance.cols()));
  s.precision = 0.5 * (s.precision + s.precision.transpose()).eval();
  return s;
}

MahalanobisStats fit_mahalanobis(const RowMatrix& embeddings,
                                 std::span<const std::uint32_t> labels,
                                 std::size_t num_classes) {
  const Eigen::Index n = embeddings.rows(), d = embeddings.cols();
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw ValidationError("mahalanobis: embeddings and labels differ in length");
  }
  if (d == 0) throw ValidationError("mahalanobis: zero-dimensional embeddings");
  std::vector<std::size_t> counts(num_classes, 0);
  RowMatrix centroids = RowMatrix::Zero(static_cast<Eigen::Index>(num_classes), d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::uint32_t c = labels[static_cast<std::size_t>(i)];
    if (c >= num_classes) throw ValidationError("mahalanobis: label out of range");
    centroids.row(c) += embeddings.row(i);
    ++counts[c];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] < 2) {
      throw ValidationError("mahalanobis: class " + std::to_string(c) +
                            " has " + std::to_string(counts[c]) +
                            " training samples, need at least 2");
    }
    centroids.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(counts[c]);
  }
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd diff =
        embeddings.row(i) - centroids.row(labels[static_cast<std::size_t>(i)]);
    cov.noalias() += diff.transpose() * diff;
  }
  cov /= static_cast<double>(n - static_cast<Eigen::Index>(num_classes));
  const double trace = cov.trace();
  const double ridge = trace > 0.0 ? 1e-3 * trace / static_cast<double>(d) : 1e-3;
  cov.diagonal().array() += ridge;
  MahalanobisStats s = make_mahalanobis(std::move(centroids), std::move(cov));
  s.ridge = ridge;
  return s;
}

double mahalanobis_uncertainty(const MahalanobisStats& stats,
                               std::span<const double> h) {
  if (static_cast<Eigen::Index>(h.size()) != stats.centroids.cols()) {
    throw ValidationError("mahalanobis: embedding dimension mismatch");
  }
  const Eigen::Map<const Eigen::RowVectorXd> x(h.data(),
                                               static_cast<Eigen::Index>(h.size()));
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < stats.centroids.rows(); ++c) {
    const Eigen::RowVectorXd diff = x - stats.centroids.row(c);
    best = std::min(best, (diff * stats.precision * diff.transpose())(0, 0));
  }
  return std::max(0.0, best);
}

McMode parse_mc_mode(std::string_view name) {
  for (McMode m : {McMode::kSrOfMean, McMode::kPredictiveEntropy,
                   McMode::kProbabilityVariance}) {
    if (mc_mode_name(m) == name) return m;
  }
  throw ValidationError("unknown MC-dropout mode '" + std::string(name) +
                        "' (expected sr-of-mean, predictive-entropy or "
                        "probability-variance)");
}

std::string_view mc_mode_name(McMode mode) {
  switch (mode) {
    case McMode::kSrOfMean: return "sr-of-mean";
    case McMode::kPredictiveEntropy: return "predictive-entropy";
    case McMode::kProbabilityVariance: return "probability-variance";
  }
  return "?";
}

double mc_dropout_uncertainty(std::span<const double> runs,
                              std::size_t num_classes, McMode mode) {
  if (num_classes == 0 || runs.size() % num_classes != 0) {
    throw ValidationError("mc_dropout: run buffer is not R x C");
  }
  const std::size_t r = runs.size() / num_classes;
  if (r < 2) {
    throw ValidationError("mc_dropout: need at least 2 runs, got " +
                          std::to_string(r));
  }
  std::vector<double> mean(num_classes, 0.0);
  for (std::size_t k = 0; k < r; ++k) {
    for (std::size_t c = 0; c < num_classes; ++c) mean[c] += runs[k * num_classes + c];
  }
  for (double& v : mean) v /= static_cast<double>(r);
  switch (mode) {
    case McMode::kSrOfMean:
      return softmax_response(mean);
    case McMode::kPredictiveEntropy: {
      double h = 0.0;
      for (double p : mean) {
        if (p > 0.0) h -= p * std::log(p);
      }
      return h;
    }
    case McMode::kProbabilityVariance: {
      const std::size_t top = static_cast<std::size_t>(
          std::max_element(mean.begin(), mean.end()) - mean.begin());
      double sq = 0.0;
      for (std::size_t k = 0; k < r; ++k) {
        const double diff = runs[k * num_classes + top] - mean[top];
        sq += diff * diff;
      }
      return sq / static_cast<double>(r);
    }
  }
  return 0.0;
}

RowMatrix embedding_matrix(const AttentionDump& dump) {
  if (!dump.has_embeddings()) {
    throw ValidationError(dump.split + ": dump has no embeddings file");
  }
  RowMatrix m(static_cast<Eigen::Index>(dump.num_samples),
              static_cast<Eigen::Index>(dump.embedding_dim));
  for (std::size_t i = 0; i < dump.embeddings.size(); ++i) {
    m.data()[i] = dump.embeddings[i];
  }
  return m;
}

EmbeddingEstimate embedding_estimator(const AttentionDump& train,
                                      const AttentionDump& test,
                                      const TrainConfig& config) {
  const RowMatrix train_x = embedding_matrix(train);
  const RowMatrix test_x = embedding_matrix(test);
  if (train_x.cols() != test_x.cols()) {
    throw ValidationError("embedding estimator: train and test embedding sizes differ");
  }
  const ScorePredictor p =
      ScorePredictor::fit(train_x, ClassifierOutputs::from_dump(train), config);
  return {p.score(train_x), p.score(test_x), p.model.inputs()};
}

}  // namespace attn_topo
