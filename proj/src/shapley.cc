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

#include "attn_topo/shapley.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "attn_topo/errors.h"
#include "attn_topo/rng.h"

namespace attn_topo {
namespace {

// Calls visit(order) once per ordering and returns the number of orderings.
template <typename Visit>
std::size_t for_each_ordering(std::size_t features, const ShapleyOptions& options,
                              Rng& rng, Visit&& visit) {
  std::vector<std::size_t> order(features);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (options.exhaustive) {
    std::size_t count = 0;
    do {
      visit(order);
      ++count;
    } while (std::next_permutation(order.begin(), order.end()));
    return count;
  }
  for (int p = 0; p < options.permutations; ++p) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    visit(order);
  }
  return static_cast<std::size_t>(options.permutations);
}

void check(const RowMatrix& samples, std::span<const double> baseline,
           const ShapleyOptions& options) {
  if (static_cast<std::size_t>(samples.cols()) != baseline.size()) {
    throw ValidationError("shapley: baseline has " +
                          std::to_string(baseline.size()) +
                          " entries for " + std::to_string(samples.cols()) +
                          " features");
  }
  if (options.exhaustive) {
    if (baseline.size() > kMaxExhaustiveFeatures) {
      throw ValidationError("shapley: exhaustive enumeration needs at most " +
                            std::to_string(kMaxExhaustiveFeatures) + " features");
    }
  } else if (options.permutations < 1) {
    throw ValidationError("shapley: permutations must be >= 1");
  }
}

void summarize(ShapleyReport& r) {
  const auto f = static_cast<std::size_t>(r.phi.cols());
  const double n = static_cast<double>(r.phi.rows());
  r.mean_abs.assign(f, 0.0);
  r.variance.assign(f, 0.0);
  for (std::size_t j = 0; j < f; ++j) {
    const auto col = r.phi.col(static_cast<Eigen::Index>(j));
    if (n == 0) continue;
    r.mean_abs[j] = col.cwiseAbs().sum() / n;
    const double mean = col.sum() / n;
    r.variance[j] = (col.array() - mean).square().sum() / n;
  }
  r.ranking.resize(f);
  std::iota(r.ranking.begin(), r.ranking.end(), std::size_t{0});
  std::stable_sort(r.ranking.begin(), r.ranking.end(),
                   [&](std::size_t a, std::size_t b) {
                     return r.variance[a] > r.variance[b];
                   });
}

}  // namespace

nlohmann::json ShapleyReport::to_json(const FeatureIndex* index) const {
  nlohmann::json components = nlohmann::json::array();
  for (std::size_t rank = 0; rank < ranking.size(); ++rank) {
    const std::size_t j = ranking[rank];
    nlohmann::json c = {{"position", j},
                        {"rank", rank + 1},
                        {"variance", variance[j]},
                        {"mean_abs", mean_abs[j]}};
    if (index) c["name"] = (*index)[j].name();
    components.push_back(std::move(c));
  }
  return {{"samples", phi.rows()}, {"features", phi.cols()},
          {"components", components}};
}

ShapleyReport shapley_values(const ValueFunction& value, const RowMatrix& samples,
                             std::span<const double> baseline,
                             const ShapleyOptions& options) {
  check(samples, baseline, options);
  const std::size_t f = baseline.size();
  ShapleyReport report;
  report.phi = RowMatrix::Zero(samples.rows(), static_cast<Eigen::Index>(f));
  Rng rng(options.seed);
  std::vector<double> x(f);
  const double base_value = value(baseline);
  for (Eigen::Index s = 0; s < samples.rows(); ++s) {
    auto phi = report.phi.row(s);
    const std::size_t count = for_each_ordering(f, options, rng, [&](const auto& order) {
      std::copy(baseline.begin(), baseline.end(), x.begin());
      double prev = base_value;
      for (std::size_t j : order) {
        x[j] = samples(s, static_cast<Eigen::Index>(j));
        const double next = value(x);
        phi(static_cast<Eigen::Index>(j)) += next - prev;
        prev = next;
      }
    });
    phi /= static_cast<double>(count);
  }
  summarize(report);
  return report;
}

ShapleyReport shapley_attribution(const ConfidenceModel& model,
                                  const RowMatrix& samples,
                                  std::span<const double> baseline,
                                  const ShapleyOptions& options) {
  check(samples, baseline, options);
  if (baseline.size() != model.inputs()) {
    throw ValidationError("shapley: model expects " +
                          std::to_string(model.inputs()) + " features, got " +
                          std::to_string(baseline.size()));
  }
  const std::size_t f = baseline.size();
  const Eigen::Map<const Eigen::VectorXd> base(baseline.data(),
                                               static_cast<Eigen::Index>(f));
  const Eigen::VectorXd base_pre = model.w1.transpose() * base + model.b1;
  auto output = [&](const Eigen::VectorXd& pre) {
    const Eigen::ArrayXd h = 1.0 / (1.0 + (-pre.array()).exp());
    return 1.0 / (1.0 + std::exp(-(model.w2.dot(h.matrix()) + model.b2)));
  };
  const double base_value = output(base_pre);

  ShapleyReport report;
  report.phi = RowMatrix::Zero(samples.rows(), static_cast<Eigen::Index>(f));
  Rng rng(options.seed);
  Eigen::VectorXd pre;
  for (Eigen::Index s = 0; s < samples.rows(); ++s) {
    auto phi = report.phi.row(s);
    const std::size_t count = for_each_ordering(f, options, rng, [&](const auto& order) {
      pre = base_pre;
      double prev = base_value;
      for (std::size_t j : order) {
        const auto col = static_cast<Eigen::Index>(j);
        pre += model.w1.row(col).transpose() * (samples(s, col) - baseline[j]);
        const double next = output(pre);
        phi(col) += next - prev;
        prev = next;
      }
    });
    phi /= static_cast<double>(count);
  }
  summarize(report);
  return report;
}

std::vector<std::size_t> select_top(const ShapleyReport& report, std::size_t k) {
  if (k > report.ranking.size()) {
    throw ValidationError("select_top: k = " + std::to_string(k) +
                          " exceeds the " + std::to_string(report.ranking.size()) +
                          " available components");
  }
  std::vector<std::size_t> out(report.ranking.begin(),
                               report.ranking.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<HeadImportance> rank_heads(const ShapleyReport& report, const FeatureIndex& index) {
  if (index.size() != report.variance.size()) {
    throw ValidationError("rank_heads: index has " + std::to_string(index.size()) +
                          " entries, report has " + std::to_string(report.variance.size()));
  }
  std::map<HeadRef, HeadImportance> totals;
  for (std::size_t j = 0; j < index.size(); ++j) {
    const auto& head = index[j].head;
    if (!head) continue;
    HeadImportance& h = totals[*head];
    h.head = *head;
    h.score += report.variance[j];
    ++h.features;
  }
  std::vector<HeadImportance> out;
  for (const auto& [key, h] : totals) out.push_back(h);
  std::stable_sort(out.begin(), out.end(),
                   [](const HeadImportance& a, const HeadImportance& b) { return a.score > b.score; });
  return out;
}

}  // namespace attn_topo
