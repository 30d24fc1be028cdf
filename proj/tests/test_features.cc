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
#include <cstring>
#include <numeric>
#include <random>

#include "attn_topo/errors.h"
#include "attn_topo/features.h"
#include "attn_topo/shapley.h"
#include "attn_topo/synth.h"
#include "test_util.h"

namespace attn_topo {
namespace {

using testing::TempDir;

AttentionDump small_dump(std::size_t samples = 12, std::uint64_t seed = 3) {
  SynthSpec spec;
  spec.num_layers = 2;
  spec.num_heads = 3;
  spec.max_tokens = 8;
  spec.min_length = 3;
  return synthesize(spec, samples, seed, "t");
}

TEST(FeatureIndex, TwelveByTwelveCount) {
  EXPECT_EQ(build_index(FeatureConfig{}, 12, 12).size(), 3744u);
  FeatureConfig graph_only;
  graph_only.families = {Family::kGraph};
  EXPECT_EQ(build_index(graph_only, 1, 1).size(), 7u);
  FeatureConfig with_pairs;
  with_pairs.families.push_back(Family::kCrossBarcode);
  with_pairs.pairs = {{{11, 11}, {11, 8}}, {{11, 11}, {11, 10}}};
  EXPECT_EQ(build_index(with_pairs, 12, 12).size(), 3746u);
  with_pairs.pairs.push_back({{12, 0}, {0, 0}});
  EXPECT_THROW(build_index(with_pairs, 12, 12), ValidationError);
}

TEST(FeatureIndex, FamilyMajorOrder) {
  const FeatureIndex idx = build_index(FeatureConfig{}, 2, 2);
  ASSERT_EQ(idx.size(), 4u * 26u);
  EXPECT_EQ(idx[0].family, Family::kGraph);
  EXPECT_EQ(idx[0].head, (HeadRef{0, 0}));
  EXPECT_EQ(idx[7].head, (HeadRef{0, 1}));
  EXPECT_EQ(idx[28].family, Family::kBarcode);
  EXPECT_EQ(idx[4 * 7 + 4 * 14].family, Family::kTemplate);
  EXPECT_EQ(idx[0].name(), "graph/vertices@1.1");
}

TEST(FeatureIndex, JsonRoundTripAndDuplicates) {
  FeatureConfig cfg;
  cfg.families.push_back(Family::kCrossBarcode);
  cfg.pairs = {{{1, 1}, {1, 0}}};
  const FeatureIndex idx = build_index(cfg, 2, 2);
  EXPECT_EQ(FeatureIndex::from_json(idx.to_json()), idx);
  std::vector<FeatureKey> dup = {idx[0], idx[0]};
  EXPECT_THROW(FeatureIndex{dup}, ValidationError);
}

TEST(DefaultPairGrid, TableLayout) {
  const PairGrid g = default_pair_grid();
  ASSERT_EQ(g.rows.size(), 6u);
  ASSERT_EQ(g.cols.size(), 6u);
  EXPECT_EQ(g.rows.front(), (HeadRef{1, 11}));
  EXPECT_EQ(g.rows.back(), (HeadRef{11, 11}));
  EXPECT_EQ(g.cols.front(), (HeadRef{11, 0}));
  EXPECT_EQ(g.cols.back(), (HeadRef{11, 10}));
}

TEST(ExtractFeatures, MatchesDirectComputation) {
  const AttentionDump d = small_dump();
  FeatureConfig cfg;
  cfg.families = {Family::kTemplate, Family::kGraph, Family::kBarcode, Family::kCrossBarcode};
  cfg.pairs = {{{1, 2}, {0, 1}}};
  const FeatureMatrix fm = extract_features(d, cfg, 1);
  ASSERT_EQ(fm.cols(), 6u * 26u + 1u);
  for (std::size_t c = 0; c < fm.cols(); ++c) {
    const FeatureKey& k = fm.index[c];
    for (std::size_t s = 0; s < d.num_samples; ++s) {
      double want = 0;
      if (k.family == Family::kCrossBarcode) {
        want = cross_barcode(d.attention(s, k.head->layer, k.head->head),
                             d.attention(s, k.partner->layer, k.partner->head))
                   .total_length;
      } else {
        const AttentionMatrix a = d.attention(s, k.head->layer, k.head->head);
        if (k.family == Family::kGraph) {
          want = graph_features(a).values()[k.subtype];
        } else if (k.family == Family::kBarcode) {
          want = barcode_stats(vr_barcode(to_distance(a))).values()[k.subtype];
        } else {
          want = template_features(a, d.flags(s)).values()[k.subtype];
        }
      }
      ASSERT_EQ(fm.values(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c)), want)
          << k.name() << " sample " << s;
    }
  }
}

TEST(ExtractFeatures, ThreadCountDoesNotChangeResult) {
  const AttentionDump d = small_dump(40);
  const FeatureMatrix a = extract_features(d, FeatureConfig{}, 1);
  const FeatureMatrix b = extract_features(d, FeatureConfig{}, 4);
  EXPECT_TRUE(a.values.cwiseEqual(b.values).all());
  EXPECT_EQ(a.index, b.index);
}

TEST(AggregateMean, AveragesHeads) {
  FeatureMatrix fm;
  fm.index = FeatureIndex({{Family::kGraph, 0, HeadRef{0, 0}, {}},
                           {Family::kGraph, 0, HeadRef{1, 0}, {}},
                           {Family::kGraph, 1, HeadRef{0, 0}, {}},
                           {Family::kTemplate, 3, HeadRef{0, 0}, {}},
                           {Family::kTemplate, 3, HeadRef{1, 0}, {}}});
  fm.values = RowMatrix(1, 5);
  fm.values << 1.0, 3.0, 5.0, kMissingValue, 4.0;
  const FeatureMatrix out = aggregate_mean(fm);
  ASSERT_EQ(out.cols(), 3u);
  EXPECT_EQ(out.values(0, 0), 2.0);
  EXPECT_EQ(out.values(0, 1), 5.0);
  EXPECT_EQ(out.values(0, 2), 4.0);
  EXPECT_FALSE(out.index[0].head.has_value());

  const FeatureMatrix full = aggregate_mean(extract_features(small_dump(), FeatureConfig{}, 2));
  EXPECT_EQ(full.cols(), 26u);
}

TEST(SelectColumns, IdentityForAllColumns) {
  const FeatureMatrix fm = extract_features(small_dump(), FeatureConfig{}, 1);
  std::vector<std::size_t> all(fm.cols());
  std::iota(all.begin(), all.end(), 0);
  const FeatureMatrix same = select_columns(fm, all);
  EXPECT_EQ(same.index, fm.index);
  ASSERT_EQ(same.values.size(), fm.values.size());
  EXPECT_EQ(std::memcmp(same.values.data(), fm.values.data(),
                        sizeof(double) * static_cast<std::size_t>(fm.values.size())),
            0);
  const std::vector<std::size_t> two = {5, 1};
  const FeatureMatrix sub = select_columns(fm, two);
  EXPECT_EQ(sub.index[0], fm.index[5]);
  EXPECT_EQ(sub.values(3, 1), fm.values(3, 1));
}

TEST(Standardizer, TrainOnlyStatistics) {
  RowMatrix train(4, 3), test(2, 3);
  train << 1, 5, 0.1, 2, 5, 0.1, 3, 5, 0.1, kMissingValue, 5, 0.1;
  test << 10, 7, 3, kMissingValue, 1, 0;
  const Standardizer s = Standardizer::fit(train);
  EXPECT_EQ(s.kept, std::vector<std::size_t>{0});
  EXPECT_EQ(s.dropped, (std::vector<std::size_t>{1, 2}));
  const RowMatrix z = s.apply(test);
  ASSERT_EQ(z.cols(), 1);
  EXPECT_NEAR(z(0, 0), (10 - 2) / std::sqrt(2.0 / 3.0), 1e-12);
  EXPECT_EQ(z(1, 0), 0.0);
  const Standardizer back = Standardizer::from_json(s.to_json());
  EXPECT_EQ(back.kept, s.kept);
  EXPECT_EQ(back.mean, s.mean);
}

TEST(Standardizer, NoTestLeakage) {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> n(0.0, 1.0);
  RowMatrix train(300, 4), test(300, 4);
  for (Eigen::Index i = 0; i < train.size(); ++i) train.data()[i] = n(gen);
  for (Eigen::Index i = 0; i < test.size(); ++i) test.data()[i] = 0.5 + 2.0 * n(gen);
  const Standardizer s = Standardizer::fit(train);
  const RowMatrix zt = s.apply(train), ze = s.apply(test);
  for (Eigen::Index j = 0; j < 4; ++j) {
    EXPECT_NEAR(zt.col(j).mean(), 0.0, 1e-12);
    EXPECT_GT(std::abs(ze.col(j).mean()), 0.2);
  }
}

TEST(SelectColumns, TopAllIsIdentity) {
  const AttentionDump d = small_dump();
  const FeatureMatrix fm = extract_features(d, FeatureConfig{});
  ShapleyReport r;
  r.variance.resize(fm.cols());
  for (std::size_t j = 0; j < fm.cols(); ++j) r.variance[j] = static_cast<double>((j * 7919) % 13);
  std::vector<std::size_t> order(fm.cols());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return r.variance[a] > r.variance[b]; });
  r.ranking = order;
  const FeatureMatrix all = select_columns(fm, select_top(r, fm.cols()));
  EXPECT_EQ(all.index, fm.index);
  ASSERT_EQ(all.values.size(), fm.values.size());
  EXPECT_EQ(std::memcmp(all.values.data(), fm.values.data(), sizeof(double) * fm.values.size()), 0);
}

TEST(AttachTrainStats, ImputesWithTrainingMeans) {
  FeatureMatrix tr, te;
  tr.index = te.index = FeatureIndex({{Family::kTemplate, 3, HeadRef{0, 0}, {}}});
  tr.values = RowMatrix(3, 1);
  tr.values << 1, kMissingValue, 3;
  te.values = RowMatrix(2, 1);
  te.values << kMissingValue, 9;
  attach_train_stats(tr, te);
  EXPECT_EQ(tr.values(1, 0), 2.0);
  EXPECT_EQ(te.values(0, 0), 2.0);
  EXPECT_EQ(te.train_mean, std::vector<double>{2.0});
  EXPECT_EQ(tr.train_std, std::vector<double>{1.0});
}

TEST(FeatureMatrixIo, RoundTrip) {
  TempDir dir("fm");
  FeatureMatrix a = extract_features(small_dump(), FeatureConfig{}, 1);
  FeatureMatrix b = a;
  attach_train_stats(a, b);
  save_feature_matrix(a, dir / "train");
  const FeatureMatrix back = load_feature_matrix(dir / "train");
  EXPECT_EQ(back.index, a.index);
  EXPECT_TRUE(back.values.cwiseEqual(a.values).all());
  EXPECT_EQ(back.train_mean, a.train_mean);
}

TEST(HeadPairJson, OneBased) {
  const HeadPair p{{11, 11}, {11, 8}};
  EXPECT_EQ(head_pair_to_json(p).dump(), "[[12,12],[12,9]]");
  EXPECT_EQ(head_pair_from_json(head_pair_to_json(p)), p);
  EXPECT_THROW(head_pair_from_json(nlohmann::json::parse("[[0,1],[1,1]]")), ValidationError);
}

}  // namespace
}  // namespace attn_topo
