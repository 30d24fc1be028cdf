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

// Subcommands of the attn-topo-uq tool. Each reads a RunConfig and writes
// its artifacts plus a config.json echo under config.workdir.

#ifndef ATTN_TOPO_CLI_H_
#define ATTN_TOPO_CLI_H_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "attn_topo/config.h"

namespace attn_topo {

struct CommandContext {
  int threads = 0;  // 0 = hardware concurrency
  std::ostream* log = nullptr;
};

// Output layout under workdir.
std::filesystem::path features_dir(const RunConfig& c);
std::filesystem::path model_dir(const RunConfig& c);
std::filesystem::path scores_dir(const RunConfig& c);
std::filesystem::path evaluation_dir(const RunConfig& c);
std::filesystem::path baselines_dir(const RunConfig& c);
std::filesystem::path shapley_dir(const RunConfig& c);
std::filesystem::path pairgrid_dir(const RunConfig& c);
std::filesystem::path synth_dir(const RunConfig& c);

void cmd_featurize(const RunConfig& c, const CommandContext& ctx);
void cmd_train(const RunConfig& c, const CommandContext& ctx);
void cmd_score(const RunConfig& c, const CommandContext& ctx);
void cmd_evaluate(const RunConfig& c, const CommandContext& ctx);
void cmd_baselines(const RunConfig& c, const CommandContext& ctx);
void cmd_shapley(const RunConfig& c, const CommandContext& ctx);
void cmd_pairgrid(const RunConfig& c, const CommandContext& ctx);
void cmd_synth(const RunConfig& c, const CommandContext& ctx);

// Table label of a 0-based head: "(layer, head)" 1-based.
std::string head_label(const HeadRef& h);

// Full command line handling. Returns the process exit code: 0 success,
// 2 validation/usage error, 3 runtime error.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace attn_topo

#endif  // ATTN_TOPO_CLI_H_
