# Copyright 2026 The attn-topo-uq Authors
# SPDX-License-Identifier: Apache-2.0
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Topological uncertainty features for attention maps."""

from ._core import (
    ValidationError,
    barcode,
    barcode_stats,
    confidence_loss,
    cross_barcode,
    extract_features,
    oracle_curve,
    read_npy,
    rejection_curve,
    run_cli,
    softmax_response,
    to_distance,
    write_npy,
)

__all__ = [
    "ValidationError",
    "barcode",
    "barcode_stats",
    "confidence_loss",
    "cross_barcode",
    "extract_features",
    "oracle_curve",
    "read_npy",
    "rejection_curve",
    "run_cli",
    "softmax_response",
    "to_distance",
    "write_npy",
]
__version__ = "0.1.0"
