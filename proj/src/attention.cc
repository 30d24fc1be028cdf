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

#include "attn_topo/attention.h"

#include <cmath>
#include <string>

#include "attn_topo/errors.h"

namespace attn_topo {

AttentionMatrix::AttentionMatrix(std::size_t n, std::vector<double> weights)
    : n_(n), w_(std::move(weights)) {
  if (w_.size() != n_ * n_) {
    throw ValidationError("attention matrix of size " + std::to_string(n_) +
                          " needs " + std::to_string(n_ * n_) +
                          " weights, got " + std::to_string(w_.size()));
  }
}

AttentionMatrix::AttentionMatrix(
    std::initializer_list<std::initializer_list<double>> rows)
    : n_(rows.size()) {
  w_.reserve(n_ * n_);
  for (const auto& row : rows) {
    if (row.size() != n_) {
      throw ValidationError("attention matrix rows must be square");
    }
    w_.insert(w_.end(), row.begin(), row.end());
  }
}

AttentionMatrix AttentionMatrix::identity(std::size_t n) {
  AttentionMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void AttentionMatrix::validate() const {
  if (n_ == 0) throw ValidationError("attention matrix is empty");
  for (std::size_t k = 0; k < w_.size(); ++k) {
    const double v = w_[k];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValidationError("attention weight (" + std::to_string(k / n_) +
                            ", " + std::to_string(k % n_) + ") = " +
                            std::to_string(v) + " outside [0, 1]");
    }
  }
}

}  // namespace attn_topo
