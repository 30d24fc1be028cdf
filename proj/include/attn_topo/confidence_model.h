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

// The score predictor: a two-layer sigmoid network c = s(w2 . s(W1^T z + b1)
// + b2) trained with the confidence-interpolated cross-entropy
//
//   p'_i = c p_i + (1 - c) y_i,   L = -sum_i y_i log p'_i - lambda log c
//
// where p is the frozen classifier's softmax output and y the one-hot true
// label. Gradients are written out by hand and the optimizer is Adam.

#ifndef ATTN_TOPO_CONFIDENCE_MODEL_H_
#define ATTN_TOPO_CONFIDENCE_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "attn_topo/dataset.h"
#include "attn_topo/linalg.h"
#include "json.hpp"

namespace attn_topo {

inline constexpr double kDefaultConfidenceClamp = 1e-7;

struct TrainConfig {
  int epochs = 250;
  double learning_rate = 1e-3;
  double lambda = 0.01;
  // 0 selects full-batch training below 512 samples and 128 otherwise.
  int batch_size = 0;
  int hidden = 64;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clamp = kDefaultConfidenceClamp;

  void validate() const;
  std::size_t effective_batch(std::size_t samples) const;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Frozen classifier outputs paired with one-hot targets.
struct ClassifierOutputs {
  RowMatrix probs;    // S x C
  RowMatrix targets;  // S x C one-hot

  static ClassifierOutputs from_dump(const AttentionDump& dump);
  static ClassifierOutputs from_labels(RowMatrix probs,
                                       std::span<const std::uint32_t> labels);
};

class ConfidenceModel {
 public:
  ConfidenceModel() = default;
  // All parameters zero.
  ConfidenceModel(std::size_t inputs, std::size_t hidden);
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every layer.
  static ConfidenceModel initialize(std::size_t inputs, std::size_t hidden,
                                    std::uint64_t seed);

  std::size_t inputs() const { return static_cast<std::size_t>(w1.rows()); }
  std::size_t hidden() const { return static_cast<std::size_t>(w1.cols()); }

  double forward(std::span<const double> z) const;
  Eigen::VectorXd forward(const RowMatrix& z) const;

  bool operator==(const ConfidenceModel& o) const {
    return w1 == o.w1 && b1 == o.b1 && w2 == o.w2 && b2 == o.b2;
  }

  Eigen::MatrixXd w1;  // inputs x hidden
  Eigen::VectorXd b1;  // hidden
  Eigen::VectorXd w2;  // hidden
  double b2 = 0.0;
};

struct Gradients {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::VectorXd w2;
  double b2 = 0.0;
  double loss = 0.0;  // mean loss over the batch
};

// c is clamped to [clamp, 1]; mixed probabilities are floored at clamp.
double confidence_loss(std::span<const double> p, std::span<const double> y,
                       double c, double lambda,
                       double clamp = kDefaultConfidenceClamp);

// dL/dc at c (zero outside [clamp, 1]; floored terms contribute nothing).
double confidence_loss_dc(std::span<const double> p, std::span<const double> y,
                          double c, double lambda,
                          double clamp = kDefaultConfidenceClamp);

double mean_loss(const ConfidenceModel& model, const RowMatrix& z,
                 const RowMatrix& probs, const RowMatrix& targets,
                 double lambda, double clamp = kDefaultConfidenceClamp);

// Exact gradients of mean_loss with respect to every parameter.
Gradients gradients(const ConfidenceModel& model, const RowMatrix& z,
                    const RowMatrix& probs, const RowMatrix& targets,
                    double lambda, double clamp = kDefaultConfidenceClamp);

struct TrainResult {
  ConfidenceModel model;
  std::vector<double> loss_curve;  // mean training loss per epoch
};

// Adam over shuffled mini-batches; single-threaded and deterministic for a
// given seed. Throws Error if the loss becomes non-finite.
TrainResult train(const RowMatrix& features, const ClassifierOutputs& outputs,
                  const TrainConfig& config);

}  // namespace attn_topo

#endif  // ATTN_TOPO_CONFIDENCE_MODEL_H_
