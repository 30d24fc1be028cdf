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

#include "attn_topo/errors.h"
#include "attn_topo/shapley.h"
#include "test_util.h"

namespace attn_topo {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

RowMatrix random_rows(std::mt19937_64& gen, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(gen);
  return m;
}

TEST(Shapley, NullPlayerAndEfficiencyForLinearSigmoid) {
  std::mt19937_64 gen(1);
  const RowMatrix z = random_rows(gen, 20, 2);
  const std::vector<double> base = {0.0, 0.0};
  const ValueFunction v = [](std::span<const double> x) { return sigmoid(2 * x[0] + 0 * x[1] + 0.3); };
  ShapleyOptions opts;
  opts.exhaustive = true;
  const ShapleyReport r = shapley_values(v, z, base, opts);
  for (Eigen::Index s = 0; s < z.rows(); ++s) {
    EXPECT_NEAR(r.phi(s, 1), 0.0, 1e-12);
    const std::vector<double> zs = {z(s, 0), z(s, 1)};
    EXPECT_NEAR(r.phi(s, 0) + r.phi(s, 1), v(zs) - v(base), 1e-12);
  }
  EXPECT_EQ(r.ranking.front(), 0u);
}

TEST(Shapley, SymmetryForSum) {
  std::mt19937_64 gen(2);
  const RowMatrix z = random_rows(gen, 10, 2);
  const std::vector<double> base = {0.5, 0.5};
  const ValueFunction v = [](std::span<const double> x) { return x[0] + x[1]; };
  ShapleyOptions opts;
  opts.exhaustive = true;
  const ShapleyReport r = shapley_values(v, z, base, opts);
  for (Eigen::Index s = 0; s < z.rows(); ++s) {
    EXPECT_NEAR(r.phi(s, 0), z(s, 0) - 0.5, 1e-12);
    EXPECT_NEAR(r.phi(s, 1), z(s, 1) - 0.5, 1e-12);
  }
}

TEST(Shapley, ExhaustiveMatchesCoalitionFormula) {
  std::mt19937_64 gen(3);
  for (std::size_t f = 1; f <= 6; ++f) {
    const RowMatrix z = random_rows(gen, 3, static_cast<Eigen::Index>(f));
    std::vector<double> base(f);
    for (double& b : base) b = 0.1 * static_cast<double>(gen() % 10);
    const ValueFunction v = [f](std::span<const double> x) {
      double out = 0;
      for (std::size_t i = 0; i < f; ++i) out += (i + 1) * x[i] + x[i] * x[(i + 1) % f];
      return std::tanh(out);
    };
    ShapleyOptions opts;
    opts.exhaustive = true;
    const ShapleyReport r = shapley_values(v, z, base, opts);
    for (Eigen::Index s = 0; s < z.rows(); ++s) {
      const auto coalition = [&](const std::vector<bool>& in) {
        std::vector<double> x = base;
        for (std::size_t i = 0; i < f; ++i) {
          if (in[i]) x[i] = z(s, static_cast<Eigen::Index>(i));
        }
        return v(x);
      };
      const std::vector<double> want = testing::exact_shapley(coalition, f);
      for (std::size_t i = 0; i < f; ++i) {
        EXPECT_NEAR(r.phi(s, static_cast<Eigen::Index>(i)), want[i], 1e-12);
      }
    }
  }
}

TEST(Shapley, IncrementalModelMatchesGeneric) {
  std::mt19937_64 gen(4);
  const ConfidenceModel m = ConfidenceModel::initialize(7, 5, 9);
  const RowMatrix z = random_rows(gen, 6, 7);
  const std::vector<double> base(7, 0.0);
  ShapleyOptions opts;
  opts.permutations = 40;
  opts.seed = 77;
  const ValueFunction v = [&](std::span<const double> x) { return m.forward(x); };
  const ShapleyReport a = shapley_attribution(m, z, base, opts);
  const ShapleyReport b = shapley_values(v, z, base, opts);
  EXPECT_LT((a.phi - b.phi).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(a.ranking, b.ranking);
  for (Eigen::Index s = 0; s < z.rows(); ++s) {
    const std::vector<double> zs(z.row(s).data(), z.row(s).data() + 7);
    EXPECT_NEAR(a.phi.row(s).sum(), m.forward(zs) - m.forward(base), 1e-9);
  }
}

TEST(Shapley, SamplingConvergesToExact) {
  std::mt19937_64 gen(5);
  const ConfidenceModel m = ConfidenceModel::initialize(5, 6, 2);
  const RowMatrix z = random_rows(gen, 4, 5);
  const std::vector<double> base(5, 0.0);
  ShapleyOptions exact;
  exact.exhaustive = true;
  ShapleyOptions sampled;
  sampled.permutations = 4000;
  const ShapleyReport a = shapley_attribution(m, z, base, exact);
  const ShapleyReport b = shapley_attribution(m, z, base, sampled);
  EXPECT_LT((a.phi - b.phi).cwiseAbs().maxCoeff(), 5e-3);
}

TEST(Shapley, RankingAndVariance) {
  const std::vector<double> base = {0, 0, 0};
  RowMatrix z(2, 3);
  z << 1, 0, 2, -1, 0, -2;
  const ValueFunction v = [](std::span<const double> x) { return x[0] + x[1] + x[2]; };
  ShapleyOptions opts;
  opts.exhaustive = true;
  const ShapleyReport r = shapley_values(v, z, base, opts);
  EXPECT_NEAR(r.variance[0], 1.0, 1e-12);
  EXPECT_NEAR(r.variance[2], 4.0, 1e-12);
  EXPECT_NEAR(r.mean_abs[2], 2.0, 1e-12);
  EXPECT_EQ(r.ranking, (std::vector<std::size_t>{2, 0, 1}));
  const auto j = r.to_json();
  EXPECT_EQ(j["components"][0]["position"], 2);
}

TEST(SelectTop, Examples) {
  ShapleyReport r;
  r.variance = {0.5, 0.1, 0.9};
  r.ranking = {2, 0, 1};
  EXPECT_EQ(select_top(r, 2), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(select_top(r, 3), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_THROW(select_top(r, 4), ValidationError);

  // Equal variances: position order wins.
  std::mt19937_64 gen(6);
  const RowMatrix z = RowMatrix::Ones(3, 4);
  const ValueFunction v = [](std::span<const double> x) { return x[0] + x[1] + x[2] + x[3]; };
  ShapleyOptions opts;
  const ShapleyReport flat = shapley_values(v, z, std::vector<double>(4, 0.0), opts);
  EXPECT_EQ(select_top(flat, 1), std::vector<std::size_t>{0});
}

TEST(RankHeads, SumsVarianceByHead) {
  ShapleyReport r;
  r.variance = {1.0, 0.5, 2.0, 9.0, 0.25};
  const FeatureIndex index({
      {Family::kGraph, 0, HeadRef{0, 0}, std::nullopt},
      {Family::kGraph, 1, HeadRef{0, 0}, std::nullopt},
      {Family::kTemplate, 0, HeadRef{1, 1}, std::nullopt},
      {Family::kGraph, 0, std::nullopt, std::nullopt},
      {Family::kCrossBarcode, 0, HeadRef{0, 0}, HeadRef{1, 1}},
  });
  const auto heads = rank_heads(r, index);
  ASSERT_EQ(heads.size(), 2u);
  EXPECT_EQ(heads[0].head, (HeadRef{1, 1}));
  EXPECT_EQ(heads[0].score, 2.0);
  EXPECT_EQ(heads[1].head, (HeadRef{0, 0}));
  EXPECT_EQ(heads[1].score, 1.75);
  EXPECT_EQ(heads[1].features, 3u);
  EXPECT_THROW(rank_heads(r, index.subset(std::vector<std::size_t>{0})), ValidationError);
}

TEST(Shapley, Errors) {
  const RowMatrix z = RowMatrix::Zero(1, 9);
  const ValueFunction v = [](std::span<const double>) { return 0.0; };
  ShapleyOptions opts;
  opts.exhaustive = true;
  EXPECT_THROW(shapley_values(v, z, std::vector<double>(9, 0.0), opts), ValidationError);
  opts.exhaustive = false;
  opts.permutations = 0;
  EXPECT_THROW(shapley_values(v, z, std::vector<double>(9, 0.0), opts), ValidationError);
  opts.permutations = 1;
  EXPECT_THROW(shapley_values(v, z, std::vector<double>(3, 0.0), opts), ValidationError);
}

}  // namespace
}  // namespace attn_topo
