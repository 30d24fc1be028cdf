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

#ifndef ATTN_TOPO_ERRORS_H_
#define ATTN_TOPO_ERRORS_H_

#include <stdexcept>
#include <string>

namespace attn_topo {

// Base for every failure raised by the library. Maps to CLI exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed files, inconsistent shapes, invalid configuration.
// Maps to CLI exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace attn_topo

#endif  // ATTN_TOPO_ERRORS_H_
