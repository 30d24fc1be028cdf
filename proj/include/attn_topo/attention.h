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

#ifndef ATTN_TOPO_ATTENTION_H_
#define ATTN_TOPO_ATTENTION_H_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace attn_topo {

// Per-token bitmask stored in token_flags files.
enum TokenFlag : std::uint8_t {
  kTokenCls = 1,
  kTokenSep = 2,
  kTokenPunct = 4,
  kTokenPad = 8,
};

// Square attention weights over the n real tokens of one sample. Row i is
// the query token, column j the key token.
class AttentionMatrix {
 public:
  AttentionMatrix() = default;
  explicit AttentionMatrix(std::size_t n) : n_(n), w_(n * n, 0.0) {}
  AttentionMatrix(std::size_t n, std::vector<double> weights);
  AttentionMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static AttentionMatrix identity(std::size_t n);

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return w_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return w_[i * n_ + j]; }
  std::span<const double> weights() const { return w_; }

  // Throws ValidationError unless n >= 1 and every entry is in [0, 1].
  void validate() const;

  bool operator==(const AttentionMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> w_;
};

}  // namespace attn_topo

#endif  // ATTN_TOPO_ATTENTION_H_
