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

#include "attn_topo/confidence_model.h"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>

#include "attn_topo/errors.h"
#include "attn_topo/rng.h"

namespace attn_topo {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& x) {
  return 1.0 / (1.0 + (-x).exp());
}

struct Forward {
  RowMatrix hidden;     // B x H activations
  Eigen::VectorXd c;    // unclamped confidences
};

Forward run_forward(const ConfidenceModel& m, const RowMatrix& z) {
  Forward f;
  RowMatrix pre = z * m.w1;
  pre.rowwise() += m.b1.transpose();
  f.hidden = sigmoid(pre.array()).matrix();
  Eigen::VectorXd out = f.hidden * m.w2;
  out.array() += m.b2;
  f.c = sigmoid(out.array().eval()).matrix();
  return f;
}

std::span<const double> row_span(const RowMatrix& m, Eigen::Index r) {
  return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ValidationError("train.epochs must be >= 0");
  if (!(learning_rate > 0)) throw ValidationError("train.learning_rate must be > 0");
  if (!(lambda >= 0)) throw ValidationError("train.lambda must be >= 0");
  if (batch_size < 0) throw ValidationError("train.batch_size must be >= 0");
  if (hidden < 1) throw ValidationError("train.hidden must be >= 1");
  if (!(clamp > 0 && clamp < 0.5)) {
    throw ValidationError("train.clamp must be in (0, 0.5)");
  }
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && epsilon > 0)) {
    throw ValidationError("train Adam parameters out of range");
  }
}

std::size_t TrainConfig::effective_batch(std::size_t samples) const {
  if (batch_size > 0) return std::min<std::size_t>(batch_size, samples);
  return samples < 512 ? samples : 128;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},   {"learning_rate", learning_rate},
          {"lambda", lambda},   {"batch_size", batch_size},
          {"hidden", hidden},   {"seed", seed},
          {"beta1", beta1},     {"beta2", beta2},
          {"epsilon", epsilon}, {"clamp", clamp}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  static constexpr std::string_view kKeys[] = {
      "epochs", "learning_rate", "lambda", "batch_size", "hidden", "seed",
      "beta1",  "beta2",         "epsilon", "clamp"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw ValidationError("train config: unknown key '" + key + "'");
    }
  }
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.lambda = j.value("lambda", c.lambda);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.hidden = j.value("hidden", c.hidden);
  c.seed = j.value("seed", c.seed);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.clamp = j.value("clamp", c.clamp);
  c.validate();
  return c;
}

ClassifierOutputs ClassifierOutputs::from_labels(
    RowMatrix probs, std::span<const std::uint32_t> labels) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size()) {
    throw ValidationError("classifier outputs: probability rows and labels differ");
  }
  ClassifierOutputs out;
  out.targets = RowMatrix::Zero(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= probs.cols()) {
      throw ValidationError("classifier outputs: label out of range");
    }
    out.targets(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  out.probs = std::move(probs);
  return out;
}

ClassifierOutputs ClassifierOutputs::from_dump(const AttentionDump& dump) {
  RowMatrix probs(static_cast<Eigen::Index>(dump.num_samples),
                  static_cast<Eigen::Index>(dump.num_classes));
  for (std::size_t s = 0; s < dump.num_samples; ++s) {
    const std::vector<double> p = dump.probabilities(s);
    for (std::size_t c = 0; c < p.size(); ++c) {
      probs(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c)) = p[c];
    }
  }
  return from_labels(std::move(probs), dump.labels);
}

ConfidenceModel::ConfidenceModel(std::size_t inputs, std::size_t hidden)
    : w1(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(inputs),
                               static_cast<Eigen::Index>(hidden))),
      b1(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hidden))),
      w2(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hidden))) {}

ConfidenceModel ConfidenceModel::initialize(std::size_t inputs,
                                            std::size_t hidden,
                                            std::uint64_t seed) {
  ConfidenceModel m(inputs, hidden);
  Rng rng(seed);
  const double r1 = inputs ? 1.0 / std::sqrt(static_cast<double>(inputs)) : 0.0;
  const double r2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (Eigen::Index i = 0; i < m.w1.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.w1.cols(); ++j) m.w1(i, j) = rng.uniform(-r1, r1);
  }
  for (Eigen::Index j = 0; j < m.b1.size(); ++j) m.b1(j) = rng.uniform(-r1, r1);
  for (Eigen::Index j = 0; j < m.w2.size(); ++j) m.w2(j) = rng.uniform(-r2, r2);
  m.b2 = rng.uniform(-r2, r2);
  return m;
}

double ConfidenceModel::forward(std::span<const double> z) const {
  const Eigen::Map<const Eigen::VectorXd> x(z.data(),
                                            static_cast<Eigen::Index>(z.size()));
  const Eigen::VectorXd h =
      sigmoid((w1.transpose() * x + b1).array().eval()).matrix();
  return sigmoid(w2.dot(h) + b2);
}

Eigen::VectorXd ConfidenceModel::forward(const RowMatrix& z) const {
  return run_forward(*this, z).c;
}

double confidence_loss(std::span<const double> p, std::span<const double> y,
                       double c, double lambda, double clamp) {
  c = std::clamp(c, clamp, 1.0);
  double loss = -lambda * std::log(c);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (y[i] == 0.0) continue;
    loss -= y[i] * std::log(std::max(c * p[i] + (1.0 - c) * y[i], clamp));
  }
  return loss;
}

double confidence_loss_dc(std::span<const double> p, std::span<const double> y,
                          double c, double lambda, double clamp) {
  if (c < clamp || c > 1.0) return 0.0;
  double grad = -lambda / c;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (y[i] == 0.0) continue;
    const double mixed = c * p[i] + (1.0 - c) * y[i];
    if (mixed < clamp) continue;
    grad -= y[i] * (p[i] - y[i]) / mixed;
  }
  return grad;
}

double mean_loss(const ConfidenceModel& model, const RowMatrix& z,
                 const RowMatrix& probs, const RowMatrix& targets,
                 double lambda, double clamp) {
  const Eigen::VectorXd c = model.forward(z);
  double total = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    total += confidence_loss(row_span(probs, r), row_span(targets, r), c(r),
                             lambda, clamp);
  }
  return total / static_cast<double>(z.rows());
}

Gradients gradients(const ConfidenceModel& model, const RowMatrix& z,
                    const RowMatrix& probs, const RowMatrix& targets,
                    double lambda, double clamp) {
  const Eigen::Index batch = z.rows();
  if (batch == 0) throw ValidationError("gradients: empty batch");
  const Forward f = run_forward(model, z);
  const double inv = 1.0 / static_cast<double>(batch);

  // dL/da2 per sample, already divided by the batch size.
  Eigen::VectorXd g_out(batch);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < batch; ++r) {
    const double c = f.c(r);
    const auto p = row_span(probs, r);
    const auto y = row_span(targets, r);
    loss += confidence_loss(p, y, c, lambda, clamp);
    g_out(r) = confidence_loss_dc(p, y, c, lambda, clamp) * c * (1.0 - c) * inv;
  }

  Gradients g;
  g.loss = loss * inv;
  g.w2 = f.hidden.transpose() * g_out;
  g.b2 = g_out.sum();
  const RowMatrix g_hidden =
      ((g_out * model.w2.transpose()).array() * f.hidden.array() *
       (1.0 - f.hidden.array()))
          .matrix();
  g.w1 = z.transpose() * g_hidden;
  g.b1 = g_hidden.colwise().sum().transpose();
  return g;
}

TrainResult train(const RowMatrix& features, const ClassifierOutputs& outputs,
                  const TrainConfig& config) {
  config.validate();
  const std::size_t samples = static_cast<std::size_t>(features.rows());
  if (samples == 0) throw ValidationError("train: no samples");
  if (outputs.probs.rows() != features.rows() ||
      outputs.targets.rows() != features.rows()) {
    throw ValidationError("train: features and classifier outputs differ in rows");
  }
  if (!features.allFinite()) {
    throw ValidationError("train: features contain NaN or Inf");
  }

  Rng rng(config.seed);
  TrainResult result;
  result.model = ConfidenceModel::initialize(
      static_cast<std::size_t>(features.cols()),
      static_cast<std::size_t>(config.hidden), rng.next());
  ConfidenceModel& m = result.model;

  Eigen::MatrixXd m_w1 = Eigen::MatrixXd::Zero(m.w1.rows(), m.w1.cols());
  Eigen::MatrixXd v_w1 = m_w1;
  Eigen::VectorXd m_b1 = Eigen::VectorXd::Zero(m.b1.size()), v_b1 = m_b1;
  Eigen::VectorXd m_w2 = Eigen::VectorXd::Zero(m.w2.size()), v_w2 = m_w2;
  double m_b2 = 0.0, v_b2 = 0.0;
  const double b1c = config.beta1, b2c = config.beta2;
  long long step = 0;

  auto adam = [&](auto& param, auto& first, auto& second, const auto& grad,
                  double lr_t) {
    first = b1c * first + (1.0 - b1c) * grad;
    second = b2c * second + (1.0 - b2c) * grad.cwiseProduct(grad);
    param -= (lr_t * first.array() /
              (second.array().sqrt() + config.epsilon))
                 .matrix();
  };

  const std::size_t batch = config.effective_batch(samples);
  std::vector<std::size_t> order(samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RowMatrix zb, pb, yb;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < samples; start += batch) {
      const std::size_t count = std::min(batch, samples - start);
      zb.resize(static_cast<Eigen::Index>(count), features.cols());
      pb.resize(static_cast<Eigen::Index>(count), outputs.probs.cols());
      yb.resize(static_cast<Eigen::Index>(count), outputs.targets.cols());
      for (std::size_t k = 0; k < count; ++k) {
        const auto src = static_cast<Eigen::Index>(order[start + k]);
        const auto dst = static_cast<Eigen::Index>(k);
        zb.row(dst) = features.row(src);
        pb.row(dst) = outputs.probs.row(src);
        yb.row(dst) = outputs.targets.row(src);
      }
      const Gradients g = gradients(m, zb, pb, yb, config.lambda, config.clamp);
      if (!std::isfinite(g.loss)) {
        std::ostringstream msg;
        msg << "train: non-finite loss at epoch " << epoch << ", batch starting "
            << start << " (batch size " << count << ", lr "
            << config.learning_rate << ", lambda " << config.lambda << ")";
        throw Error(msg.str());
      }
      epoch_loss += g.loss * static_cast<double>(count);

      ++step;
      const double lr_t = config.learning_rate *
                          std::sqrt(1.0 - std::pow(b2c, static_cast<double>(step))) /
                          (1.0 - std::pow(b1c, static_cast<double>(step)));
      adam(m.w1, m_w1, v_w1, g.w1, lr_t);
      adam(m.b1, m_b1, v_b1, g.b1, lr_t);
      adam(m.w2, m_w2, v_w2, g.w2, lr_t);
      m_b2 = b1c * m_b2 + (1.0 - b1c) * g.b2;
      v_b2 = b2c * v_b2 + (1.0 - b2c) * g.b2 * g.b2;
      m.b2 -= lr_t * m_b2 / (std::sqrt(v_b2) + config.epsilon);
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(samples));
  }
  return result;
}

}  // namespace attn_topo
