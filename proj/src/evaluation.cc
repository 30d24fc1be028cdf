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

#include "attn_topo/evaluation.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "attn_topo/errors.h"

namespace attn_topo {

nlohmann::json EvalOptions::to_json() const {
  return {{"step", step}, {"max_rejection", max_rejection}};
}

EvalOptions EvalOptions::from_json(const nlohmann::json& j) {
  EvalOptions o;
  for (const auto& [key, value] : j.items()) {
    if (key == "step") {
      o.step = value.get<std::size_t>();
    } else if (key == "max_rejection") {
      o.max_rejection = value.get<double>();
    } else {
      throw ValidationError("evaluation: unknown key '" + key + "'");
    }
  }
  if (!(o.max_rejection > 0.0 && o.max_rejection <= 1.0)) {
    throw ValidationError("evaluation: max_rejection must be in (0, 1]");
  }
  return o;
}

std::size_t default_step(std::size_t n) { return std::max<std::size_t>(1, n / 100); }

double area_above(std::span<const CurvePoint> points, double base) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double a = std::max(points[i - 1].accuracy - base, 0.0);
    const double b = std::max(points[i].accuracy - base, 0.0);
    area += 0.5 * (a + b) * (points[i].rejection - points[i - 1].rejection);
  }
  return area;
}

RejectionCurve rejection_curve(std::span<const double> confidences,
                               std::span<const std::uint8_t> correct,
                               const EvalOptions& options) {
  const std::size_t n = confidences.size();
  if (n == 0) throw ValidationError("rejection_curve: no samples");
  if (correct.size() != n) {
    throw ValidationError("rejection_curve: " + std::to_string(n) +
                          " confidences but " + std::to_string(correct.size()) +
                          " correctness labels");
  }
  for (double c : confidences) {
    if (std::isnan(c)) throw ValidationError("rejection_curve: NaN confidence");
  }
  const std::size_t r = options.step == 0 ? default_step(n) : options.step;
  if (r >= n) {
    throw ValidationError("rejection_curve: step " + std::to_string(r) +
                          " must be below the sample count " + std::to_string(n));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return confidences[a] < confidences[b];
  });
  // suffix[k] = correct count among order[k..n).
  std::vector<std::size_t> suffix(n + 1, 0);
  for (std::size_t k = n; k-- > 0;) suffix[k] = suffix[k + 1] + (correct[order[k]] ? 1 : 0);

  RejectionCurve curve;
  curve.step = r;
  curve.samples = n;
  curve.base_accuracy = static_cast<double>(suffix[0]) / static_cast<double>(n);
  const double dn = static_cast<double>(n);
  for (std::size_t i = 0; i <= (n - 1) / r; ++i) {
    const std::size_t removed = i * r;
    const double x = static_cast<double>(removed) / dn;
    if (x > options.max_rejection) break;
    curve.points.push_back(
        {x, static_cast<double>(suffix[removed]) / static_cast<double>(n - removed)});
  }
  curve.area_above_base = area_above(curve.points, curve.base_accuracy);
  return curve;
}

RejectionCurve oracle_curve(std::span<const std::uint8_t> correct,
                            const EvalOptions& options) {
  std::vector<double> conf(correct.size());
  for (std::size_t i = 0; i < correct.size(); ++i) conf[i] = correct[i] ? 1.0 : 0.0;
  return rejection_curve(conf, correct, options);
}

}  // namespace attn_topo
