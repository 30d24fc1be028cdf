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

#ifndef ATTN_TOPO_PREDICTOR_H_
#define ATTN_TOPO_PREDICTOR_H_

#include <filesystem>
#include <vector>

#include "attn_topo/confidence_model.h"
#include "attn_topo/features.h"

namespace attn_topo {

// A trained confidence model together with the feature preprocessing it
// was trained on. Checkpoints are a JSON header plus float64 NPY blobs.
struct ScorePredictor {
  Standardizer standardizer;
  ConfidenceModel model;
  TrainConfig config;
  std::vector<double> loss_curve;

  static ScorePredictor fit(const RowMatrix& train_features,
                            const ClassifierOutputs& outputs,
                            const TrainConfig& config);

  // Confidence per row of raw (unstandardized) features.
  Eigen::VectorXd score(const RowMatrix& features) const;

  void save(const std::filesystem::path& dir) const;
  static ScorePredictor load(const std::filesystem::path& dir);
};

}  // namespace attn_topo

#endif  // ATTN_TOPO_PREDICTOR_H_
