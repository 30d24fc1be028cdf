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

#include "attn_topo/predictor.h"

#include <fstream>
#include <string>

#include "attn_topo/errors.h"
#include "attn_topo/npy.h"

namespace attn_topo {
namespace {

Tensor to_tensor(const Eigen::MatrixXd& m) {
  std::vector<double> v(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      v[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
    }
  }
  return Tensor({static_cast<std::size_t>(m.rows()),
                 static_cast<std::size_t>(m.cols())},
                std::move(v));
}

Eigen::MatrixXd from_tensor(const Tensor& t, std::size_t rows, std::size_t cols,
                            const std::filesystem::path& path) {
  if (t.shape != std::vector<std::size_t>{rows, cols}) {
    throw ValidationError(path.string() + ": shape mismatch: file has " +
                          shape_to_string(t.shape) + ", checkpoint expects " +
                          shape_to_string({rows, cols}));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          t.as_double(i * cols + j);
    }
  }
  return m;
}

Eigen::VectorXd vector_from_tensor(const Tensor& t, std::size_t n,
                                   const std::filesystem::path& path) {
  if (t.shape != std::vector<std::size_t>{n}) {
    throw ValidationError(path.string() + ": shape mismatch: file has " +
                          shape_to_string(t.shape) + ", checkpoint expects " +
                          shape_to_string({n}));
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = t.as_double(i);
  return v;
}

}  // namespace

ScorePredictor ScorePredictor::fit(const RowMatrix& train_features,
                                   const ClassifierOutputs& outputs,
                                   const TrainConfig& config) {
  ScorePredictor p;
  p.config = config;
  p.standardizer = Standardizer::fit(train_features);
  TrainResult r = train(p.standardizer.apply(train_features), outputs, config);
  p.model = std::move(r.model);
  p.loss_curve = std::move(r.loss_curve);
  return p;
}

Eigen::VectorXd ScorePredictor::score(const RowMatrix& features) const {
  return model.forward(standardizer.apply(features));
}

void ScorePredictor::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  const std::size_t inputs = model.inputs(), hidden = model.hidden();
  nlohmann::json header = {
      {"format", "attn-topo-uq/confidence-model"},
      {"version", 1},
      {"inputs", inputs},
      {"hidden", hidden},
      {"seed", config.seed},
      {"config", config.to_json()},
      {"standardizer", standardizer.to_json()},
      {"loss_curve", loss_curve},
      {"parameters",
       {{"w1", "w1.npy"}, {"b1", "b1.npy"}, {"w2", "w2.npy"}, {"b2", "b2.npy"}}},
  };
  write_tensor(dir / "w1.npy", to_tensor(model.w1));
  write_tensor(dir / "b1.npy", Tensor({hidden}, std::vector<double>(
                                                   model.b1.data(),
                                                   model.b1.data() + hidden)));
  write_tensor(dir / "w2.npy", to_tensor(model.w2));
  write_tensor(dir / "b2.npy", Tensor({1}, std::vector<double>{model.b2}));
  std::ofstream out(dir / "model.json");
  out << header.dump(2) << '\n';
  if (!out) throw Error("cannot write " + (dir / "model.json").string());
}

ScorePredictor ScorePredictor::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) throw ValidationError("cannot open " + (dir / "model.json").string());
  nlohmann::json header;
  try {
    in >> header;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError((dir / "model.json").string() + ": " + e.what());
  }
  ScorePredictor p;
  p.config = TrainConfig::from_json(header.at("config"));
  p.standardizer = Standardizer::from_json(header.at("standardizer"));
  p.loss_curve = header.value("loss_curve", std::vector<double>{});
  const auto inputs = header.at("inputs").get<std::size_t>();
  const auto hidden = header.at("hidden").get<std::size_t>();
  if (inputs != p.standardizer.kept.size()) {
    throw ValidationError("checkpoint input width " + std::to_string(inputs) +
                          " does not match its standardizer (" +
                          std::to_string(p.standardizer.kept.size()) + ")");
  }
  p.model = ConfidenceModel(inputs, hidden);
  p.model.w1 = from_tensor(read_tensor(dir / "w1.npy"), inputs, hidden, dir / "w1.npy");
  p.model.b1 = vector_from_tensor(read_tensor(dir / "b1.npy"), hidden, dir / "b1.npy");
  p.model.w2 = from_tensor(read_tensor(dir / "w2.npy"), hidden, 1, dir / "w2.npy").col(0);
  p.model.b2 = vector_from_tensor(read_tensor(dir / "b2.npy"), 1, dir / "b2.npy")(0);
  return p;
}

}  // namespace attn_topo
