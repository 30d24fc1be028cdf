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

#include "attn_topo/config.h"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>

#include "attn_topo/errors.h"

namespace attn_topo {
namespace {

using json = nlohmann::json;

void check_keys(const json& j, std::initializer_list<std::string_view> keys,
                const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ValidationError(where + ": unknown key '" + key + "'");
    }
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

HeadRef head_ref(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_unsigned() ||
      !j[1].is_number_unsigned() || j[0].get<std::uint32_t>() == 0 ||
      j[1].get<std::uint32_t>() == 0) {
    throw ValidationError("expected a 1-based [layer, head], got " + j.dump());
  }
  return {j[0].get<std::uint32_t>() - 1, j[1].get<std::uint32_t>() - 1};
}

json head_json(const HeadRef& h) { return json::array({h.layer + 1, h.head + 1}); }

FeatureConfig parse_features(const json& j) {
  check_keys(j, {"families", "edge_threshold", "birth_threshold", "death_threshold",
                 "pairs"},
             "features");
  FeatureConfig f;
  if (j.contains("families")) {
    f.families.clear();
    for (const auto& name : j["families"]) f.families.push_back(parse_family(name.get<std::string>()));
    if (f.families.empty()) throw ValidationError("features: families is empty");
  }
  f.edge_threshold = j.value("edge_threshold", f.edge_threshold);
  f.birth_threshold = j.value("birth_threshold", f.birth_threshold);
  f.death_threshold = j.value("death_threshold", f.death_threshold);
  if (j.contains("pairs")) {
    for (const auto& p : j["pairs"]) f.pairs.push_back(head_pair_from_json(p));
  }
  return f;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, {"train_manifest", "test_manifest", "workdir", "seed", "features",
                 "aggregate", "columns", "train", "evaluation", "baselines", "shapley",
                 "pairgrid", "synth"},
             "config");
  RunConfig c;
  c.source = j;
  try {
    if (j.contains("train_manifest")) {
      c.train_manifest = resolve(base_dir, j["train_manifest"].get<std::string>());
    }
    if (j.contains("test_manifest")) {
      c.test_manifest = resolve(base_dir, j["test_manifest"].get<std::string>());
    }
    c.workdir = resolve(base_dir, j.value("workdir", std::string("work")));
    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("features")) c.features = parse_features(j["features"]);
    c.aggregate = j.value("aggregate", false);
    if (j.contains("columns")) c.columns = j["columns"].get<std::vector<std::size_t>>();

    json train = j.value("train", json::object());
    if (train.contains("seed")) {
      throw ValidationError("train: set the top-level 'seed' instead of train.seed");
    }
    train["seed"] = c.seed;
    c.train = TrainConfig::from_json(train);

    if (j.contains("evaluation")) c.evaluation = EvalOptions::from_json(j["evaluation"]);

    if (j.contains("baselines")) {
      const json& b = j["baselines"];
      check_keys(b, {"methods", "mc_mode"}, "baselines");
      if (b.contains("methods")) {
        c.baselines.methods = b["methods"].get<std::vector<std::string>>();
        for (const auto& m : c.baselines.methods) {
          if (m != "softmax_response" && m != "mahalanobis" && m != "mc_dropout" &&
              m != "embedding") {
            throw ValidationError("baselines: unknown method '" + m + "'");
          }
        }
      }
      if (b.contains("mc_mode")) c.baselines.mc_mode = parse_mc_mode(b["mc_mode"].get<std::string>());
    }

    if (j.contains("shapley")) {
      const json& s = j["shapley"];
      check_keys(s, {"permutations", "max_samples", "top_k", "exhaustive"}, "shapley");
      c.shapley.permutations = s.value("permutations", c.shapley.permutations);
      c.shapley.max_samples = s.value("max_samples", c.shapley.max_samples);
      c.shapley.top_k = s.value("top_k", c.shapley.top_k);
      c.shapley.exhaustive = s.value("exhaustive", c.shapley.exhaustive);
      if (c.shapley.permutations < 1) throw ValidationError("shapley: permutations must be >= 1");
    }

    if (j.contains("pairgrid")) {
      const json& g = j["pairgrid"];
      check_keys(g, {"rows", "cols"}, "pairgrid");
      if (g.contains("rows")) {
        c.pairgrid.rows.clear();
        for (const auto& h : g["rows"]) c.pairgrid.rows.push_back(head_ref(h));
      }
      if (g.contains("cols")) {
        c.pairgrid.cols.clear();
        for (const auto& h : g["cols"]) c.pairgrid.cols.push_back(head_ref(h));
      }
      if (c.pairgrid.rows.empty() || c.pairgrid.cols.empty()) {
        throw ValidationError("pairgrid: rows and cols must be non-empty");
      }
    }

    json synth = j.value("synth", json::object());
    if (synth.contains("seed")) {
      throw ValidationError("synth: set the top-level 'seed' instead of synth.seed");
    }
    synth["seed"] = c.seed;
    c.synth = SynthSpec::from_json(synth);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

json RunConfig::to_json() const {
  json j;
  j["train_manifest"] = train_manifest.string();
  j["test_manifest"] = test_manifest.string();
  j["workdir"] = workdir.string();
  j["seed"] = seed;
  json f;
  for (Family fam : features.families) f["families"].push_back(family_name(fam));
  f["edge_threshold"] = features.edge_threshold;
  f["birth_threshold"] = features.birth_threshold;
  f["death_threshold"] = features.death_threshold;
  f["pairs"] = json::array();
  for (const auto& p : features.pairs) f["pairs"].push_back(head_pair_to_json(p));
  j["features"] = f;
  j["aggregate"] = aggregate;
  j["columns"] = columns;
  json t = train.to_json();
  t.erase("seed");
  j["train"] = t;
  j["evaluation"] = evaluation.to_json();
  j["baselines"] = {{"methods", baselines.methods},
                    {"mc_mode", std::string(mc_mode_name(baselines.mc_mode))}};
  j["shapley"] = {{"permutations", shapley.permutations},
                  {"max_samples", shapley.max_samples},
                  {"top_k", shapley.top_k},
                  {"exhaustive", shapley.exhaustive}};
  json rows = json::array(), cols = json::array();
  for (const auto& h : pairgrid.rows) rows.push_back(head_json(h));
  for (const auto& h : pairgrid.cols) cols.push_back(head_json(h));
  j["pairgrid"] = {{"rows", rows}, {"cols", cols}};
  json s = synth.to_json();
  s.erase("seed");
  j["synth"] = s;
  return j;
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ValidationError("--set expects key=value, got '" + std::string(assignment) + "'");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ValidationError("--set: malformed key '" + key + "'");
    if (!node->is_object()) throw ValidationError("--set: '" + key + "' crosses a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ValidationError("config " + path.string() + " is not valid JSON");
  for (const auto& o : overrides) apply_override(doc, o);
  return RunConfig::from_json(doc, path.parent_path());
}

std::string config_help() {
  const RunConfig defaults = RunConfig::from_json(json::object());
  std::ostringstream s;
  s << "Config keys (JSON object; unknown keys are rejected; relative paths\n"
       "resolve against the config file's directory). Defaults:\n\n"
    << defaults.to_json().dump(2) << "\n\n"
       "train_manifest / test_manifest: manifest.json of each split.\n"
       "features.families: any of graph, barcode, template, crossbarcode.\n"
       "features.pairs: [[[layer, head], [layer, head]], ...], 1-based.\n"
       "columns: feature positions to keep (e.g. from shapley/selected.json).\n"
       "train.batch_size: 0 = full batch below 512 samples, else 128.\n"
       "evaluation.step: 0 = max(1, N / 100).\n";
  return s.str();
}

}  // namespace attn_topo
