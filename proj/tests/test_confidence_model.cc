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

#include <gtest/gtest.h>

#include <cmath>

#include "attn_topo/confidence_model.h"
#include "attn_topo/errors.h"
#include "attn_topo/predictor.h"
#include "test_util.h"

namespace attn_topo {
namespace {

using testing::TempDir;

// Direct evaluation of the loss for one sample.
double loss_by_hand(const std::vector<double>& p, const std::vector<double>& y, double c,
                    double lambda) {
  double total = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (y[k] != 0) total -= y[k] * std::log(c * p[k] + (1 - c) * y[k]);
  }
  return total - lambda * std::log(c);
}

TEST(ConfidenceLoss, SpotValues) {
  const std::vector<double> p = {0.6, 0.4}, y = {1, 0};
  EXPECT_NEAR(confidence_loss(p, y, 1.0, 0.01), -std::log(0.6), 1e-9);
  EXPECT_NEAR(confidence_loss(p, y, 0.7, 0.01), 0.3321, 1e-3);
  EXPECT_NEAR(confidence_loss(p, y, 0.7, 0.01), loss_by_hand(p, y, 0.7, 0.01), 1e-15);
}

TEST(ConfidenceLoss, MinimizerClosedForm) {
  // dL/dc = 0 at c* = lambda / ((1 - p_y)(1 + lambda)).
  const std::vector<double> p = {0.9, 0.1}, y = {1, 0};
  const double lambda = 0.01, star = lambda / (0.1 * (1 + lambda));
  EXPECT_NEAR(confidence_loss_dc(p, y, star, lambda), 0.0, 1e-12);
  EXPECT_LT(confidence_loss(p, y, star, lambda), confidence_loss(p, y, star * 0.9, lambda));
  EXPECT_LT(confidence_loss(p, y, star, lambda), confidence_loss(p, y, star * 1.1, lambda));
  EXPECT_GT(confidence_loss(p, y, 0.9, lambda), confidence_loss(p, y, 0.5, lambda));
  // Larger lambda pushes c* up.
  EXPECT_LT(confidence_loss(p, y, 0.9, 1.0), confidence_loss(p, y, 0.5, 1.0));
}

TEST(ConfidenceLoss, DerivativeMatchesDifference) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = u(gen);
    const std::vector<double> p = {a, 1 - a}, y = {trial % 2 ? 1.0 : 0.0, trial % 2 ? 0.0 : 1.0};
    const double c = u(gen), h = 1e-6;
    const double fd = (confidence_loss(p, y, c + h, 0.05) - confidence_loss(p, y, c - h, 0.05)) / (2 * h);
    EXPECT_NEAR(confidence_loss_dc(p, y, c, 0.05), fd, 1e-6);
  }
}

TEST(ConfidenceLoss, ClampedOutsideInterval) {
  const std::vector<double> p = {0.0, 1.0}, y = {1, 0};
  EXPECT_TRUE(std::isfinite(confidence_loss(p, y, 1.0, 0.01)));
  EXPECT_TRUE(std::isfinite(confidence_loss(p, y, 0.0, 0.01)));
  EXPECT_EQ(confidence_loss_dc(p, y, 1.0, 0.01), -0.01);
  EXPECT_EQ(confidence_loss_dc(p, y, 1.5, 0.01), 0.0);
  EXPECT_EQ(confidence_loss_dc(p, y, 0.0, 0.01), 0.0);
}

struct Problem {
  ConfidenceModel model;
  RowMatrix z, probs, targets;
};

Problem random_problem(std::mt19937_64& gen, std::size_t f, std::size_t h, std::size_t s,
                       std::size_t c) {
  Problem pr{ConfidenceModel::initialize(f, h, gen()), RowMatrix(s, f), RowMatrix(s, c),
             RowMatrix::Zero(s, c)};
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (Eigen::Index i = 0; i < pr.z.size(); ++i) pr.z.data()[i] = n(gen);
  for (std::size_t i = 0; i < s; ++i) {
    double total = 0;
    for (std::size_t k = 0; k < c; ++k) total += (pr.probs(i, k) = u(gen));
    pr.probs.row(i) /= total;
    pr.targets(i, gen() % c) = 1.0;
  }
  pr.model.b2 = n(gen) * 0.5;
  return pr;
}

TEST(Gradients, MatchCentralDifferences) {
  std::mt19937_64 gen(17);
  for (int draw = 0; draw < 20; ++draw) {
    Problem pr = random_problem(gen, 1 + gen() % 6, 1 + gen() % 8, 1 + gen() % 10, 2 + gen() % 3);
    const double lambda = 0.01 + 0.1 * (draw % 3);
    const Gradients g = gradients(pr.model, pr.z, pr.probs, pr.targets, lambda);
    const double h = 1e-6;
    auto fd = [&](double& param) {
      const double saved = param;
      param = saved + h;
      const double up = mean_loss(pr.model, pr.z, pr.probs, pr.targets, lambda);
      param = saved - h;
      const double down = mean_loss(pr.model, pr.z, pr.probs, pr.targets, lambda);
      param = saved;
      return (up - down) / (2 * h);
    };
    double diff = 0, norm = 0;
    auto acc = [&](double analytic, double numeric) {
      diff += (analytic - numeric) * (analytic - numeric);
      norm += analytic * analytic + numeric * numeric;
    };
    for (Eigen::Index i = 0; i < pr.model.w1.size(); ++i) acc(g.w1.data()[i], fd(pr.model.w1.data()[i]));
    for (Eigen::Index i = 0; i < pr.model.b1.size(); ++i) acc(g.b1[i], fd(pr.model.b1[i]));
    for (Eigen::Index i = 0; i < pr.model.w2.size(); ++i) acc(g.w2[i], fd(pr.model.w2[i]));
    acc(g.b2, fd(pr.model.b2));
    EXPECT_LE(std::sqrt(diff / std::max(norm, 1e-300)), 1e-4) << "draw " << draw;
    EXPECT_NEAR(g.loss, mean_loss(pr.model, pr.z, pr.probs, pr.targets, lambda), 1e-12);
  }
}

TEST(ConfidenceModel, InitializationBounds) {
  const ConfidenceModel m = ConfidenceModel::initialize(9, 16, 4);
  EXPECT_LE(m.w1.cwiseAbs().maxCoeff(), 1.0 / 3.0);
  EXPECT_LE(m.b1.cwiseAbs().maxCoeff(), 1.0 / 3.0);
  EXPECT_LE(m.w2.cwiseAbs().maxCoeff(), 0.25);
  EXPECT_LE(std::abs(m.b2), 0.25);
  EXPECT_EQ(m, ConfidenceModel::initialize(9, 16, 4));
  EXPECT_FALSE(m == ConfidenceModel::initialize(9, 16, 5));
}

TEST(ConfidenceModel, ForwardMatchesFormula) {
  const ConfidenceModel m = ConfidenceModel::initialize(3, 4, 1);
  const std::vector<double> z = {0.5, -1.0, 2.0};
  double out = m.b2;
  for (int k = 0; k < 4; ++k) {
    double a = m.b1[k];
    for (int i = 0; i < 3; ++i) a += m.w1(i, k) * z[i];
    out += m.w2[k] / (1 + std::exp(-a));
  }
  EXPECT_NEAR(m.forward(z), 1 / (1 + std::exp(-out)), 1e-15);
  RowMatrix batch(1, 3);
  batch << 0.5, -1.0, 2.0;
  EXPECT_NEAR(m.forward(batch)[0], m.forward(z), 1e-15);
}

TEST(TrainConfig, ValidationAndJson) {
  TrainConfig c;
  EXPECT_EQ(c.effective_batch(100), 100u);
  EXPECT_EQ(c.effective_batch(2000), 128u);
  c.batch_size = 32;
  EXPECT_EQ(c.effective_batch(10), 10u);
  const TrainConfig back = TrainConfig::from_json(c.to_json());
  EXPECT_EQ(back.batch_size, 32);
  EXPECT_EQ(back.epochs, 250);
  EXPECT_EQ(back.learning_rate, 1e-3);
  EXPECT_EQ(back.lambda, 0.01);
  EXPECT_THROW(TrainConfig::from_json({{"epoch", 3}}), ValidationError);
  EXPECT_THROW(TrainConfig::from_json({{"epochs", -1}}), ValidationError);
  EXPECT_THROW(TrainConfig::from_json({{"learning_rate", -1.0}}), ValidationError);
}

TEST(Train, LowersLossAndIsDeterministic) {
  std::mt19937_64 gen(23);
  Problem pr = random_problem(gen, 5, 8, 200, 2);
  // Make correctness depend on z0.
  for (Eigen::Index i = 0; i < pr.z.rows(); ++i) {
    const bool right = pr.z(i, 0) > 0;
    pr.probs.row(i) << 0.8, 0.2;
    pr.targets.row(i) << (right ? 1.0 : 0.0), (right ? 0.0 : 1.0);
  }
  TrainConfig cfg;
  cfg.hidden = 8;
  cfg.epochs = 300;
  cfg.learning_rate = 1e-2;
  cfg.seed = 5;
  const ClassifierOutputs out{pr.probs, pr.targets};
  const TrainResult a = train(pr.z, out, cfg);
  const TrainResult b = train(pr.z, out, cfg);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.loss_curve, b.loss_curve);
  ASSERT_EQ(a.loss_curve.size(), 300u);
  EXPECT_LT(a.loss_curve.back(), 0.7 * a.loss_curve.front());
  const Eigen::VectorXd c = a.model.forward(pr.z);
  double right = 0, wrong = 0;
  int nr = 0;
  for (Eigen::Index i = 0; i < pr.z.rows(); ++i) {
    (pr.z(i, 0) > 0 ? right : wrong) += c[i];
    nr += pr.z(i, 0) > 0;
  }
  EXPECT_GT(right / nr, wrong / static_cast<double>(pr.z.rows() - nr));
}

TEST(Train, PlantedSignalSeparatesErrors) {
  // feature 0 is +1 on correct predictions, -1 on errors; the rest is noise.
  std::mt19937_64 gen(31);
  std::normal_distribution<double> n(0.0, 1.0);
  const Eigen::Index s = 400, f = 6;
  RowMatrix z(s, f), probs(s, 2), targets = RowMatrix::Zero(s, 2);
  std::vector<bool> right(static_cast<std::size_t>(s));
  for (Eigen::Index i = 0; i < s; ++i) {
    right[static_cast<std::size_t>(i)] = i % 5 != 0;
    for (Eigen::Index j = 1; j < f; ++j) z(i, j) = n(gen);
    z(i, 0) = right[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
    probs.row(i) << 0.7, 0.3;
    targets(i, right[static_cast<std::size_t>(i)] ? 0 : 1) = 1.0;
  }
  TrainConfig cfg;
  cfg.seed = 2;
  const TrainResult r = train(z, ClassifierOutputs{probs, targets}, cfg);

  int upticks = 0;
  for (std::size_t e = 1; e < 10; ++e) upticks += r.loss_curve[e] > r.loss_curve[e - 1];
  EXPECT_LE(upticks, 2);
  EXPECT_LT(r.loss_curve[9], r.loss_curve[0]);

  const Eigen::VectorXd c = r.model.forward(z);
  double mr = 0, mw = 0;
  for (Eigen::Index i = 0; i < s; ++i) (right[static_cast<std::size_t>(i)] ? mr : mw) += c[i];
  mr /= 0.8 * static_cast<double>(s);
  mw /= 0.2 * static_cast<double>(s);
  EXPECT_GT(mr, mw);
  EXPECT_NEAR(mr, 0.0359, 5e-4);
  EXPECT_NEAR(mw, 0.0343, 5e-4);
}

TEST(ClassifierOutputs, FromLabels) {
  RowMatrix p(2, 3);
  p << 0.2, 0.3, 0.5, 0.1, 0.1, 0.8;
  const std::vector<std::uint32_t> labels = {2, 0};
  const ClassifierOutputs o = ClassifierOutputs::from_labels(p, labels);
  EXPECT_EQ(o.targets(0, 2), 1.0);
  EXPECT_EQ(o.targets(1, 0), 1.0);
  EXPECT_EQ(o.targets.sum(), 2.0);
  const std::vector<std::uint32_t> bad = {3, 0};
  EXPECT_THROW(ClassifierOutputs::from_labels(p, bad), ValidationError);
}

TEST(ScorePredictor, SaveLoadRoundTrip) {
  TempDir dir("pred");
  std::mt19937_64 gen(29);
  Problem pr = random_problem(gen, 6, 4, 50, 2);
  pr.z.col(3).setConstant(2.0);  // dropped by the standardizer
  TrainConfig cfg;
  cfg.hidden = 4;
  cfg.epochs = 20;
  const ScorePredictor p = ScorePredictor::fit(pr.z, {pr.probs, pr.targets}, cfg);
  EXPECT_EQ(p.standardizer.dropped, std::vector<std::size_t>{3});
  EXPECT_EQ(p.model.inputs(), 5u);
  p.save(dir.path());
  const ScorePredictor q = ScorePredictor::load(dir.path());
  EXPECT_EQ(q.model, p.model);
  EXPECT_EQ(q.loss_curve, p.loss_curve);
  EXPECT_TRUE(q.score(pr.z).cwiseEqual(p.score(pr.z)).all());
  const Eigen::VectorXd s = p.score(pr.z);
  EXPECT_GT(s.minCoeff(), 0.0);
  EXPECT_LT(s.maxCoeff(), 1.0);
}

}  // namespace
}  // namespace attn_topo
