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

// Accuracy rejection curves.

#ifndef ATTN_TOPO_EVALUATION_H_
#define ATTN_TOPO_EVALUATION_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace attn_topo {

struct CurvePoint {
  double rejection = 0.0;
  double accuracy = 0.0;
};

struct RejectionCurve {
  std::vector<CurvePoint> points;
  double base_accuracy = 0.0;
  double area_above_base = 0.0;
  std::size_t step = 1;
  std::size_t samples = 0;
};

struct EvalOptions {
  // 0 picks max(1, N / 100).
  std::size_t step = 0;
  // Points with rejection rate above this are dropped before integrating.
  double max_rejection = 1.0;

  nlohmann::json to_json() const;
  static EvalOptions from_json(const nlohmann::json& j);
};

std::size_t default_step(std::size_t n);

// Trapezoid area of max(acc - base, 0) over the points.
double area_above(std::span<const CurvePoint> points, double base);

RejectionCurve rejection_curve(std::span<const double> confidences,
                               std::span<const std::uint8_t> correct,
                               const EvalOptions& options = {});

RejectionCurve oracle_curve(std::span<const std::uint8_t> correct,
                            const EvalOptions& options = {});

struct NamedCurve {
  std::string name;
  RejectionCurve curve;
};

// report.csv, report.json and curves.svg. The oracle goes into the JSON
// summary and is drawn dashed, but gets no CSV column.
void emit_report(const std::vector<NamedCurve>& curves,
                 const RejectionCurve* oracle,
                 const std::filesystem::path& out_dir);

std::string render_svg(const std::vector<NamedCurve>& curves,
                       const RejectionCurve* oracle);

}  // namespace attn_topo

#endif  // ATTN_TOPO_EVALUATION_H_
