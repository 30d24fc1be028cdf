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

#include "attn_topo/cli.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "attn_topo/baselines.h"
#include "attn_topo/dataset.h"
#include "attn_topo/errors.h"
#include "attn_topo/evaluation.h"
#include "attn_topo/npy.h"
#include "attn_topo/predictor.h"
#include "attn_topo/rng.h"
#include "attn_topo/shapley.h"
#include "attn_topo/synth.h"

namespace attn_topo {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::ostream& log_of(const CommandContext& ctx) { return ctx.log ? *ctx.log : std::cerr; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

void prepare(const fs::path& dir, const RunConfig& c) {
  fs::create_directories(dir);
  write_text(dir / "config.json", c.to_json().dump(2) + "\n");
}

void require_file(const fs::path& p, const char* produced_by) {
  if (!fs::exists(p)) {
    throw ValidationError("missing " + p.string() + " (run '" + produced_by + "' first)");
  }
}

AttentionDump load_split(const fs::path& manifest, const char* which) {
  if (manifest.empty()) throw ValidationError(std::string(which) + "_manifest is not set");
  return load_dataset(manifest);
}

void save_vector(const fs::path& path, const Eigen::VectorXd& v) {
  write_tensor(path, Tensor{{static_cast<std::size_t>(v.size())},
                            std::vector<double>(v.data(), v.data() + v.size())});
}

std::vector<double> load_vector(const fs::path& path) {
  const Tensor t = read_tensor(path);
  if (t.shape.size() != 1) throw ValidationError(path.string() + ": expected a 1-D tensor");
  std::vector<double> v(t.element_count());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = t.as_double(i);
  return v;
}

std::vector<std::uint8_t> correctness(const AttentionDump& d) {
  std::vector<std::uint8_t> out(d.num_samples);
  for (std::size_t s = 0; s < d.num_samples; ++s) out[s] = d.correct(s) ? 1 : 0;
  return out;
}

std::vector<double> negate(std::vector<double> u) {
  for (double& v : u) v = -v;
  return u;
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

FeatureMatrix featurize_split(const AttentionDump& d, const RunConfig& c, int threads) {
  FeatureMatrix fm = extract_features(d, c.features, threads);
  if (c.aggregate) fm = aggregate_mean(fm);
  if (!c.columns.empty()) {
    for (std::size_t p : c.columns) {
      if (p >= fm.cols()) {
        throw ValidationError("columns: position " + std::to_string(p) + " out of range (F = " +
                              std::to_string(fm.cols()) + ")");
      }
    }
    fm = select_columns(fm, c.columns);
  }
  return fm;
}

Eigen::VectorXd train_and_score(const RowMatrix& train_x, const ClassifierOutputs& outputs,
                                const RowMatrix& test_x, const TrainConfig& tc) {
  return ScorePredictor::fit(train_x, outputs, tc).score(test_x);
}

}  // namespace

fs::path features_dir(const RunConfig& c) { return c.workdir / "features"; }
fs::path model_dir(const RunConfig& c) { return c.workdir / "model"; }
fs::path scores_dir(const RunConfig& c) { return c.workdir / "scores"; }
fs::path evaluation_dir(const RunConfig& c) { return c.workdir / "evaluation"; }
fs::path baselines_dir(const RunConfig& c) { return c.workdir / "baselines"; }
fs::path shapley_dir(const RunConfig& c) { return c.workdir / "shapley"; }
fs::path pairgrid_dir(const RunConfig& c) { return c.workdir / "pairgrid"; }
fs::path synth_dir(const RunConfig& c) { return c.workdir / "data"; }

std::string head_label(const HeadRef& h) {
  return "(" + std::to_string(h.layer + 1) + ", " + std::to_string(h.head + 1) + ")";
}

void cmd_featurize(const RunConfig& c, const CommandContext& ctx) {
  const AttentionDump train = load_split(c.train_manifest, "train");
  const AttentionDump test = load_split(c.test_manifest, "test");
  if (train.num_layers != test.num_layers || train.num_heads != test.num_heads) {
    throw ValidationError("train and test dumps have different layer/head counts");
  }
  FeatureMatrix tr = featurize_split(train, c, ctx.threads);
  FeatureMatrix te = featurize_split(test, c, ctx.threads);
  attach_train_stats(tr, te);
  const fs::path dir = features_dir(c);
  prepare(dir, c);
  save_feature_matrix(tr, dir / "train");
  save_feature_matrix(te, dir / "test");
  log_of(ctx) << "featurize: F = " << tr.cols() << " features, " << tr.rows()
              << " train / " << te.rows() << " test samples\n";
}

void cmd_train(const RunConfig& c, const CommandContext& ctx) {
  require_file(features_dir(c) / "train.npy", "featurize");
  const FeatureMatrix tr = load_feature_matrix(features_dir(c) / "train");
  const AttentionDump train = load_split(c.train_manifest, "train");
  if (train.num_samples != tr.rows()) {
    throw ValidationError("train features have " + std::to_string(tr.rows()) +
                          " rows but the train dump has " +
                          std::to_string(train.num_samples) + " samples");
  }
  const ScorePredictor p = ScorePredictor::fit(tr.values, ClassifierOutputs::from_dump(train), c.train);
  const fs::path dir = model_dir(c);
  prepare(dir, c);
  p.save(dir);
  log_of(ctx) << "train: " << p.model.inputs() << " inputs after dropping "
              << p.standardizer.dropped.size() << " constant columns, final loss "
              << (p.loss_curve.empty() ? 0.0 : p.loss_curve.back()) << "\n";
}

void cmd_score(const RunConfig& c, const CommandContext& ctx) {
  require_file(model_dir(c) / "model.json", "train");
  require_file(features_dir(c) / "test.npy", "featurize");
  const ScorePredictor p = ScorePredictor::load(model_dir(c));
  const fs::path dir = scores_dir(c);
  prepare(dir, c);
  for (const char* split : {"train", "test"}) {
    const FeatureMatrix fm = load_feature_matrix(features_dir(c) / split);
    save_vector(dir / (std::string(split) + ".npy"), p.score(fm.values));
  }
  log_of(ctx) << "score: wrote " << (dir / "test.npy").string() << "\n";
}

void cmd_evaluate(const RunConfig& c, const CommandContext& ctx) {
  require_file(scores_dir(c) / "test.npy", "score");
  const std::vector<double> conf = load_vector(scores_dir(c) / "test.npy");
  const AttentionDump test = load_split(c.test_manifest, "test");
  if (conf.size() != test.num_samples) {
    throw ValidationError("scores have " + std::to_string(conf.size()) +
                          " entries but the test dump has " +
                          std::to_string(test.num_samples) + " samples");
  }
  const auto correct = correctness(test);
  const RejectionCurve topo = rejection_curve(conf, correct, c.evaluation);
  const RejectionCurve oracle = oracle_curve(correct, c.evaluation);
  const fs::path dir = evaluation_dir(c);
  prepare(dir, c);
  emit_report({{"topological", topo}}, &oracle, dir);
  log_of(ctx) << "evaluate: area " << topo.area_above_base << " (oracle "
              << oracle.area_above_base << ", base accuracy " << topo.base_accuracy << ")\n";
}

void cmd_baselines(const RunConfig& c, const CommandContext& ctx) {
  const AttentionDump test = load_split(c.test_manifest, "test");
  const auto correct = correctness(test);
  std::vector<NamedCurve> curves;
  const fs::path dir = baselines_dir(c);
  prepare(dir, c);
  auto add = [&](const std::string& name, const std::vector<double>& conf) {
    save_vector(dir / (name + ".npy"),
                Eigen::Map<const Eigen::VectorXd>(conf.data(), static_cast<Eigen::Index>(conf.size())));
    curves.push_back({name, rejection_curve(conf, correct, c.evaluation)});
  };

  std::optional<AttentionDump> train;
  auto train_dump = [&]() -> const AttentionDump& {
    if (!train) train = load_split(c.train_manifest, "train");
    return *train;
  };

  for (const std::string& m : c.baselines.methods) {
    std::vector<double> u(test.num_samples);
    if (m == "softmax_response") {
      for (std::size_t s = 0; s < test.num_samples; ++s) {
        u[s] = softmax_response(test.probabilities(s));
      }
    } else if (m == "mahalanobis") {
      if (!test.has_embeddings() || !train_dump().has_embeddings()) {
        log_of(ctx) << "baselines: warning: no embeddings, skipping mahalanobis\n";
        continue;
      }
      const MahalanobisStats stats =
          fit_mahalanobis(embedding_matrix(train_dump()), train_dump().labels, train_dump().num_classes);
      const RowMatrix h = embedding_matrix(test);
      for (std::size_t s = 0; s < test.num_samples; ++s) {
        u[s] = mahalanobis_uncertainty(
            stats, std::span<const double>(h.row(static_cast<Eigen::Index>(s)).data(),
                                           static_cast<std::size_t>(h.cols())));
      }
    } else if (m == "mc_dropout") {
      if (!test.has_mc_probs()) {
        log_of(ctx) << "baselines: warning: test manifest has no mc_probs, skipping mc_dropout\n";
        continue;
      }
      for (std::size_t s = 0; s < test.num_samples; ++s) {
        u[s] = mc_dropout_uncertainty(test.mc_sample(s), test.num_classes, c.baselines.mc_mode);
      }
    } else if (m == "embedding") {
      if (!test.has_embeddings() || !train_dump().has_embeddings()) {
        log_of(ctx) << "baselines: warning: no embeddings, skipping embedding estimator\n";
        continue;
      }
      const EmbeddingEstimate e = embedding_estimator(train_dump(), test, c.train);
      add(m, std::vector<double>(e.test_confidence.data(),
                                 e.test_confidence.data() + e.test_confidence.size()));
      continue;
    }
    add(m, negate(std::move(u)));
  }
  if (fs::exists(scores_dir(c) / "test.npy")) {
    const std::vector<double> conf = load_vector(scores_dir(c) / "test.npy");
    if (conf.size() == test.num_samples) {
      curves.push_back({"topological", rejection_curve(conf, correct, c.evaluation)});
    }
  }
  if (curves.empty()) throw ValidationError("baselines: no estimator could be computed");
  const RejectionCurve oracle = oracle_curve(correct, c.evaluation);
  emit_report(curves, &oracle, dir);
  for (const auto& nc : curves) {
    log_of(ctx) << "baselines: " << nc.name << " area " << nc.curve.area_above_base << "\n";
  }
}

void cmd_shapley(const RunConfig& c, const CommandContext& ctx) {
  require_file(model_dir(c) / "model.json", "train");
  const ScorePredictor p = ScorePredictor::load(model_dir(c));
  const FeatureMatrix tr = load_feature_matrix(features_dir(c) / "train");
  const RowMatrix z = p.standardizer.apply(tr.values);

  std::vector<std::size_t> rows(static_cast<std::size_t>(z.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  if (c.shapley.max_samples > 0 && rows.size() > c.shapley.max_samples) {
    Rng rng(c.seed);
    rng.shuffle(std::span<std::size_t>(rows));
    rows.resize(c.shapley.max_samples);
    std::sort(rows.begin(), rows.end());
  }
  RowMatrix sample(static_cast<Eigen::Index>(rows.size()), z.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    sample.row(static_cast<Eigen::Index>(i)) = z.row(static_cast<Eigen::Index>(rows[i]));
  }
  const std::vector<double> baseline(static_cast<std::size_t>(z.cols()), 0.0);
  ShapleyOptions opts;
  opts.permutations = c.shapley.permutations;
  opts.seed = c.seed;
  opts.exhaustive = c.shapley.exhaustive;
  const ShapleyReport report = shapley_attribution(p.model, sample, baseline, opts);

  const FeatureIndex kept_index = tr.index.subset(p.standardizer.kept);
  const std::size_t k = std::min(c.shapley.top_k, report.ranking.size());
  std::vector<std::size_t> columns;
  for (std::size_t pos : select_top(report, k)) columns.push_back(p.standardizer.kept[pos]);
  std::sort(columns.begin(), columns.end());
  json names = json::array();
  for (std::size_t col : columns) names.push_back(tr.index[col].name());

  const fs::path dir = shapley_dir(c);
  prepare(dir, c);
  json rj = report.to_json(&kept_index);
  rj["samples"] = rows.size();
  const std::vector<HeadImportance> heads = rank_heads(report, kept_index);
  json hj = json::array();
  for (const HeadImportance& h : heads) {
    hj.push_back({{"head", head_label(h.head)}, {"score", h.score}, {"features", h.features}});
  }
  rj["heads"] = hj;
  write_text(dir / "shapley.json", rj.dump(2) + "\n");
  write_text(dir / "selected.json", json{{"columns", columns}, {"names", names}}.dump(2) + "\n");
  if (!report.ranking.empty()) {
    log_of(ctx) << "shapley: top feature " << kept_index[report.ranking.front()].name();
    if (!heads.empty()) log_of(ctx) << ", top head " << head_label(heads.front().head);
    log_of(ctx) << "\n";
  }
}

void cmd_pairgrid(const RunConfig& c, const CommandContext& ctx) {
  require_file(features_dir(c) / "train.npy", "featurize");
  const FeatureMatrix base_tr = load_feature_matrix(features_dir(c) / "train");
  const FeatureMatrix base_te = load_feature_matrix(features_dir(c) / "test");
  const AttentionDump train = load_split(c.train_manifest, "train");
  const AttentionDump test = load_split(c.test_manifest, "test");

  FeatureConfig cross = c.features;
  cross.families = {Family::kCrossBarcode};
  cross.pairs.clear();
  for (const HeadRef& r : c.pairgrid.rows) {
    for (const HeadRef& col : c.pairgrid.cols) cross.pairs.push_back({r, col});
  }
  for (const HeadPair& hp : cross.pairs) {
    for (const HeadRef& h : {hp.first, hp.second}) {
      if (h.layer >= train.num_layers || h.head >= train.num_heads) {
        throw ValidationError("pairgrid: head " + head_label(h) + " outside the dump's " +
                              std::to_string(train.num_layers) + " x " +
                              std::to_string(train.num_heads) + " heads");
      }
    }
  }
  const FeatureMatrix cross_tr = extract_features(train, cross, ctx.threads);
  const FeatureMatrix cross_te = extract_features(test, cross, ctx.threads);
  const ClassifierOutputs outputs = ClassifierOutputs::from_dump(train);
  const auto correct = correctness(test);

  const std::size_t nr = c.pairgrid.rows.size(), nc = c.pairgrid.cols.size();
  std::vector<double> areas(nr * nc);
  auto append = [](const RowMatrix& a, const RowMatrix& b, Eigen::Index col) {
    RowMatrix out(a.rows(), a.cols() + 1);
    out.leftCols(a.cols()) = a;
    out.col(a.cols()) = b.col(col);
    return out;
  };
  for (std::size_t k = 0; k < nr * nc; ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    const Eigen::VectorXd conf = train_and_score(append(base_tr.values, cross_tr.values, col),
                                                 outputs,
                                                 append(base_te.values, cross_te.values, col),
                                                 c.train);
    areas[k] = rejection_curve(std::span<const double>(conf.data(), static_cast<std::size_t>(conf.size())),
                               correct, c.evaluation)
                   .area_above_base;
  }

  const fs::path dir = pairgrid_dir(c);
  prepare(dir, c);
  std::ostringstream csv;
  csv << "pair";
  for (const HeadRef& h : c.pairgrid.cols) csv << ",\"" << head_label(h) << '"';
  csv << '\n';
  json grid = json::array();
  for (std::size_t i = 0; i < nr; ++i) {
    csv << '"' << head_label(c.pairgrid.rows[i]) << '"';
    for (std::size_t j = 0; j < nc; ++j) {
      csv << ',' << fmt17(areas[i * nc + j]);
      grid.push_back({{"row", head_label(c.pairgrid.rows[i])},
                      {"col", head_label(c.pairgrid.cols[j])},
                      {"area", areas[i * nc + j]}});
    }
    csv << '\n';
  }
  write_text(dir / "grid.csv", csv.str());
  write_text(dir / "grid.json", grid.dump(2) + "\n");
  log_of(ctx) << "pairgrid: " << nr << " x " << nc << " grid written\n";
}

void cmd_synth(const RunConfig& c, const CommandContext& ctx) {
  const fs::path dir = synth_dir(c);
  prepare(dir, c);
  const SynthPaths paths = write_synthetic(c.synth, dir);
  log_of(ctx) << "synth: wrote " << paths.train_manifest.string() << " and "
              << paths.test_manifest.string() << "\n";
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attention-topology confidence estimation for transformer classifiers", "attn-topo-uq"};
  app.footer(config_help());
  std::string command;
  std::string config_path;
  std::vector<std::string> overrides;
  int threads = -1;
  bool json_errors = false;
  app.add_option("command", command, "Subcommand")
      ->required()
      ->check(CLI::IsMember({"featurize", "train", "score", "evaluate", "baselines",
                             "shapley", "pairgrid", "synth"}));
  app.add_option("--config", config_path, "Run configuration (JSON)")->required();
  app.add_option("--set", overrides, "Override a config key: key.sub=value");
  app.add_option("--threads", threads,
                 "Worker threads (default: $ATTN_TOPO_UQ_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--json-errors", json_errors, "Report errors as JSON on stderr");

  auto report = [&](int code, const std::string& kind, const std::string& message) {
    if (json_errors) {
      err << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << "\n";
    } else {
      err << "attn-topo-uq: " << message << "\n";
    }
    return code;
  };

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    for (const auto& a : args) json_errors = json_errors || a == "--json-errors";
    return report(2, "usage", e.what());
  }

  if (threads < 0) {
    threads = 0;
    if (const char* env = std::getenv("ATTN_TOPO_UQ_THREADS"); env && *env) {
      try {
        threads = std::stoi(env);
      } catch (const std::exception&) {
        return report(2, "validation", "ATTN_TOPO_UQ_THREADS must be an integer");
      }
      if (threads < 0) return report(2, "validation", "ATTN_TOPO_UQ_THREADS must be >= 0");
    }
  }

  try {
    const RunConfig config = load_run_config(config_path, overrides);
    const CommandContext ctx{threads, &out};
    if (command == "featurize") cmd_featurize(config, ctx);
    else if (command == "train") cmd_train(config, ctx);
    else if (command == "score") cmd_score(config, ctx);
    else if (command == "evaluate") cmd_evaluate(config, ctx);
    else if (command == "baselines") cmd_baselines(config, ctx);
    else if (command == "shapley") cmd_shapley(config, ctx);
    else if (command == "pairgrid") cmd_pairgrid(config, ctx);
    else cmd_synth(config, ctx);
  } catch (const ValidationError& e) {
    return report(2, "validation", e.what());
  } catch (const std::exception& e) {
    return report(3, "runtime", e.what());
  }
  return 0;
}

}  // namespace attn_topo
