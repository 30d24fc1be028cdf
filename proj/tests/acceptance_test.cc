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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "attn_topo/baselines.h"
#include "attn_topo/cli.h"
#include "attn_topo/confidence_model.h"
#include "attn_topo/evaluation.h"
#include "attn_topo/features.h"
#include "attn_topo/persistence.h"
#include "attn_topo/predictor.h"
#include "attn_topo/rng.h"
#include "attn_topo/shapley.h"
#include "attn_topo/synth.h"
#include "json.hpp"
#include "test_util.h"

namespace attn_topo {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double limit_seconds, const std::function<Outcome()>& fn) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (limit_seconds > 0 && secs > limit_seconds) {
    o.pass = false;
    o.detail += " [over time limit " + std::to_string(limit_seconds) + " s]";
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f s", secs);
  std::printf("%s  %s  (%s; %s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), buf);
  std::fflush(stdout);
  failures += !o.pass;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Outcome oracle_equivalence() {
  std::mt19937_64 gen(2024);
  int mismatches = 0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(t % 6);
    const DistanceMatrix d = testing::random_distance(gen, n, t % 3 == 0 ? 5 : 0);
    mismatches += vr_barcode(d).sorted() != brute_force_barcode(d).sorted();
  }
  return {mismatches == 0, "500 matrices, " + std::to_string(mismatches) + " mismatches"};
}

Outcome h0_mst() {
  std::mt19937_64 gen(7);
  int bad = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + gen() % 40;
    const DistanceMatrix d = testing::random_distance(gen, n);
    std::vector<double> deaths;
    const Barcode b = vr_barcode(d, 0);
    for (const Bar& bar : b.dimension(0)) {
      if (!bar.essential) deaths.push_back(bar.death);
    }
    std::sort(deaths.begin(), deaths.end());
    bad += deaths != testing::mst_weights(d) || b.dimension(0).size() != n;
  }
  return {bad == 0, "200 matrices, " + std::to_string(bad) + " mismatches"};
}

Outcome four_cycle() {
  DistanceMatrix d(4);
  for (std::size_t i = 0; i < 4; ++i) d.set(i, (i + 1) % 4, 0.5);
  d.set(0, 2, 0.7);
  d.set(1, 3, 0.7);
  const auto h1 = vr_barcode(d).dimension(1);
  const auto oracle = brute_force_barcode(d).dimension(1);
  const bool ok = h1.size() == 1 && h1[0].birth == 0.5 && h1[0].death == 0.7 && oracle == h1;
  return {ok, std::to_string(h1.size()) + " H1 bar(s)" +
                  (h1.empty() ? "" : ", first (" + num(h1[0].birth) + ", " + num(h1[0].death) + ")")};
}

Outcome cross_null() {
  std::mt19937_64 gen(11);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const AttentionMatrix a = testing::random_attention(gen, 2 + gen() % 15);
    worst = std::max(worst, cross_barcode(a, a).total_length);
  }
  return {worst == 0.0, "max total_length " + num(worst)};
}

Outcome gradient_check() {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd(0, 1);
  std::uniform_real_distribution<double> ud(0.05, 1);
  double worst = 0;
  for (int draw = 0; draw < 50; ++draw) {
    const std::size_t f = 1 + gen() % 8, h = 1 + gen() % 10, s = 1 + gen() % 12, c = 2 + gen() % 3;
    ConfidenceModel m = ConfidenceModel::initialize(f, h, gen());
    RowMatrix z(s, f), p(s, c), y = RowMatrix::Zero(s, c);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = nd(gen);
    for (std::size_t i = 0; i < s; ++i) {
      double tot = 0;
      for (std::size_t k = 0; k < c; ++k) tot += (p(i, k) = ud(gen));
      p.row(i) /= tot;
      y(i, gen() % c) = 1;
    }
    const double lambda = 0.01 * (1 + draw % 5);
    const Gradients g = gradients(m, z, p, y, lambda);
    const double eps = 1e-5;
    double diff = 0, norm = 0;
    auto fd = [&](double& param, double analytic) {
      const double saved = param;
      param = saved + eps;
      const double up = mean_loss(m, z, p, y, lambda);
      param = saved - eps;
      const double down = mean_loss(m, z, p, y, lambda);
      param = saved;
      const double numeric = (up - down) / (2 * eps);
      diff += (numeric - analytic) * (numeric - analytic);
      norm += numeric * numeric + analytic * analytic;
    };
    for (Eigen::Index i = 0; i < m.w1.size(); ++i) fd(m.w1.data()[i], g.w1.data()[i]);
    for (Eigen::Index i = 0; i < m.b1.size(); ++i) fd(m.b1[i], g.b1[i]);
    for (Eigen::Index i = 0; i < m.w2.size(); ++i) fd(m.w2[i], g.w2[i]);
    fd(m.b2, g.b2);
    worst = std::max(worst, std::sqrt(diff / std::max(norm, 1e-300)));
  }
  return {worst <= 1e-4, "50 draws, worst relative error " + num(worst)};
}

Outcome loss_spots() {
  const std::vector<double> p = {0.6, 0.4}, y = {1, 0};
  const double a = confidence_loss(p, y, 1.0, 0.01);
  const double b = confidence_loss(p, y, 0.7, 0.01);
  const bool ok = std::abs(a + std::log(0.6)) <= 1e-9 && std::abs(b - 0.3321) <= 1e-3;
  return {ok, "c=1: " + num(a) + ", c=0.7: " + num(b)};
}

Outcome oracle_closed_form() {
  std::string detail;
  bool ok = true;
  for (double a : {0.85, 0.5}) {
    const std::size_t n = 10000;
    std::vector<std::uint8_t> correct(n, 0);
    std::fill(correct.begin(), correct.begin() + static_cast<long>(std::llround(a * n)), 1);
    EvalOptions o;
    o.step = 1;
    const double area = oracle_curve(correct, o).area_above_base;
    const double want = a == 0.85 ? 0.1379 : 0.3466;
    ok = ok && std::abs(area - want) <= 0.01;
    detail += (detail.empty() ? "" : ", ") + std::string("a=") + num(a) + ": " + num(area);
  }
  return {ok, detail};
}

Outcome hand_arc() {
  const std::vector<double> conf = {0.1, 0.5, 0.6, 0.9};
  const std::vector<std::uint8_t> correct = {0, 1, 1, 1};
  EvalOptions o;
  o.step = 1;
  const double area = rejection_curve(conf, correct, o).area_above_base;
  return {area == 0.15625, "area " + num(area)};
}

struct SynthRun {
  double topo = 0, sr = 0, oracle = 0;
  std::vector<double> conf;
  std::vector<std::uint8_t> correct;
  ScorePredictor predictor;
  FeatureMatrix train_features;
};

SynthRun synth_run(double signal, std::uint64_t seed) {
  SynthSpec spec;
  spec.signal = signal;
  spec.seed = seed;
  Rng master(seed);
  const AttentionDump train = synthesize(spec, 2000, master.next(), "train");
  const AttentionDump test = synthesize(spec, 2000, master.next(), "test");
  FeatureMatrix tr = extract_features(train, FeatureConfig{}, 0);
  FeatureMatrix te = extract_features(test, FeatureConfig{}, 0);
  attach_train_stats(tr, te);
  TrainConfig tc;
  tc.seed = seed;
  SynthRun r;
  r.predictor = ScorePredictor::fit(tr.values, ClassifierOutputs::from_dump(train), tc);
  const Eigen::VectorXd c = r.predictor.score(te.values);
  r.conf.assign(c.data(), c.data() + c.size());
  std::vector<double> sr(test.num_samples);
  for (std::size_t s = 0; s < test.num_samples; ++s) {
    r.correct.push_back(test.correct(s));
    sr[s] = -softmax_response(test.probabilities(s));
  }
  r.topo = rejection_curve(r.conf, r.correct).area_above_base;
  r.sr = rejection_curve(sr, r.correct).area_above_base;
  r.oracle = oracle_curve(r.correct).area_above_base;
  r.train_features = std::move(tr);
  return r;
}

std::vector<SynthRun> strong_runs;

Outcome synthetic_end_to_end() {
  int beats_sr = 0, near_oracle = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    strong_runs.push_back(synth_run(0.7, seed));
    const SynthRun& r = strong_runs.back();
    beats_sr += r.topo > r.sr;
    near_oracle += r.topo >= 0.9 * r.oracle;
    detail += (seed > 1 ? "; " : "") + std::string("seed ") + std::to_string(seed) + ": topo " +
              num(r.topo) + " sr " + num(r.sr) + " oracle " + num(r.oracle);
  }
  bool null_ok = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SynthRun r = synth_run(0.0, seed);
    Rng rng(1000 + seed);
    std::vector<double> areas;
    std::vector<double> shuffled = r.conf;
    for (int k = 0; k < 200; ++k) {
      rng.shuffle(std::span<double>(shuffled));
      areas.push_back(rejection_curve(shuffled, r.correct).area_above_base);
    }
    double mean = 0, var = 0;
    for (double a : areas) mean += a;
    mean /= static_cast<double>(areas.size());
    for (double a : areas) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(areas.size() - 1));
    const bool ok = std::abs(r.topo - mean) <= 3 * sd;
    null_ok = null_ok && ok;
    detail += "; s=0 seed " + std::to_string(seed) + ": topo " + num(r.topo) + " control " +
              num(mean) + "+-" + num(sd);
  }
  return {beats_sr == 5 && near_oracle >= 4 && null_ok,
          "topo>SR " + std::to_string(beats_sr) + "/5, >=0.9 oracle " + std::to_string(near_oracle) +
              "/5, null " + (null_ok ? "ok" : "out of band") + "; " + detail};
}

Outcome shapley_checks() {
  // Axioms, exhaustive, F <= 6.
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd(0, 1);
  double eff = 0, null_phi = 0;
  for (std::size_t f = 2; f <= 6; ++f) {
    ConfidenceModel m = ConfidenceModel::initialize(f, 6, f);
    m.w1.row(static_cast<Eigen::Index>(f - 1)).setZero();
    RowMatrix z(5, f);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = nd(gen);
    const std::vector<double> base(f, 0.0);
    ShapleyOptions o;
    o.exhaustive = true;
    const ShapleyReport r = shapley_attribution(m, z, base, o);
    for (Eigen::Index s = 0; s < z.rows(); ++s) {
      const std::vector<double> zs(z.row(s).data(), z.row(s).data() + f);
      eff = std::max(eff, std::abs(r.phi.row(s).sum() - (m.forward(zs) - m.forward(base))));
      null_phi = std::max(null_phi, std::abs(r.phi(s, static_cast<Eigen::Index>(f - 1))));
    }
  }
  const bool axioms = eff <= 1e-9 && null_phi == 0.0;

  // Planted component on the strong synthetic runs.
  int hits = 0;
  std::string picks;
  const SynthSpec spec;
  const HeadRef planted{static_cast<std::uint32_t>(spec.signal_layer_index()),
                        static_cast<std::uint32_t>(spec.signal_head_index())};
  for (std::size_t k = 0; k < strong_runs.size(); ++k) {
    const SynthRun& r = strong_runs[k];
    const RowMatrix z = r.predictor.standardizer.apply(r.train_features.values.topRows(256));
    ShapleyOptions o;
    o.seed = k + 1;
    const ShapleyReport rep =
        shapley_attribution(r.predictor.model, z, std::vector<double>(static_cast<std::size_t>(z.cols()), 0.0), o);
    const auto heads = rank_heads(rep, r.train_features.index.subset(r.predictor.standardizer.kept));
    hits += !heads.empty() && heads.front().head == planted;
    picks += (k ? ", " : "") + (heads.empty() ? std::string("none") : head_label(heads.front().head));
  }
  return {axioms && hits >= 4 && strong_runs.size() == 5,
          "efficiency err " + num(eff) + ", null phi " + num(null_phi) + ", planted top-1 " +
              std::to_string(hits) + "/5 (" + picks + ")"};
}

Outcome feature_count_and_grid() {
  const std::size_t f = build_index(FeatureConfig{}, 12, 12).size();
  testing::TempDir dir("accept_grid");
  SynthSpec spec;
  spec.num_layers = 12;
  spec.num_heads = 12;
  spec.max_tokens = 6;
  spec.min_length = 4;
  spec.train_samples = 40;
  spec.test_samples = 20;
  spec.error_rate = 0.25;
  write_synthetic(spec, dir / "data");
  testing::spit(dir / "cfg.json",
                json{{"train_manifest", "data/train/manifest.json"},
                     {"test_manifest", "data/test/manifest.json"},
                     {"workdir", "work"},
                     {"train", {{"epochs", 5}, {"hidden", 4}}},
                     {"evaluation", {{"step", 1}}}}
                    .dump());
  std::ostringstream out, err;
  const std::string cfg = (dir / "cfg.json").string();
  int rc = run_cli({"featurize", "--config", cfg}, out, err);
  const bool logged = out.str().find("F = 3744 features") != std::string::npos;
  if (rc == 0) rc = run_cli({"pairgrid", "--config", cfg}, out, err);
  if (rc != 0) return {false, "exit " + std::to_string(rc) + ": " + err.str()};
  std::istringstream grid(testing::slurp(dir / "work/pairgrid/grid.csv"));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(grid, line)) lines.push_back(line);
  const std::string header =
      "pair,\"(12, 1)\",\"(12, 3)\",\"(12, 5)\",\"(12, 7)\",\"(12, 9)\",\"(12, 11)\"";
  bool rows_ok = lines.size() == 7 && lines[0] == header;
  for (int i = 1; rows_ok && i <= 6; ++i) {
    const std::string label = "\"(" + std::to_string(2 * i) + ", 12)\"";
    rows_ok = lines[static_cast<std::size_t>(i)].rfind(label + ",", 0) == 0 &&
              std::count(lines[static_cast<std::size_t>(i)].begin(),
                         lines[static_cast<std::size_t>(i)].end(), ',') == 7;
  }
  return {f == 3744 && logged && rows_ok,
          "F = " + std::to_string(f) + (logged ? " (logged by featurize)" : " (not logged)") +
              ", grid " + std::to_string(lines.size() ? lines.size() - 1 : 0) + " rows" +
              (rows_ok ? " with the expected labels" : " with wrong labels")};
}

Outcome determinism() {
  testing::TempDir dir("accept_det");
  testing::spit(dir / "cfg.json",
                json{{"train_manifest", "work/data/train/manifest.json"},
                     {"test_manifest", "work/data/test/manifest.json"},
                     {"workdir", "work"},
                     {"seed", 3},
                     {"synth", {{"train_samples", 300}, {"test_samples", 300}}},
                     {"train", {{"epochs", 50}}}}
                    .dump());
  const std::string cfg = (dir / "cfg.json").string();
  const std::vector<std::string> files = {
      "data/train/attentions.npy", "features/train.npy", "features/test.npy", "features/train.json",
      "model/model.json", "model/w1.npy", "scores/test.npy", "evaluation/report.csv",
      "evaluation/report.json", "evaluation/curves.svg"};
  std::vector<std::string> first;
  for (int round = 0; round < 2; ++round) {
    for (const char* cmd : {"synth", "featurize", "train", "score", "evaluate"}) {
      std::ostringstream out, err;
      const std::string threads = round == 0 ? "1" : "4";
      const int rc = run_cli({cmd, "--config", cfg, "--threads", threads}, out, err);
      if (rc != 0) return {false, std::string(cmd) + " exit " + std::to_string(rc) + ": " + err.str()};
    }
    for (std::size_t k = 0; k < files.size(); ++k) {
      const std::string bytes = testing::slurp(dir / "work" / files[k]);
      if (round == 0) {
        first.push_back(bytes);
      } else if (bytes != first[k] || bytes.empty()) {
        return {false, files[k] + " differs between runs"};
      }
    }
  }
  return {true, std::to_string(files.size()) + " artifacts byte-identical across reruns (1 vs 4 threads)"};
}

}  // namespace
}  // namespace attn_topo

int main() {
  using namespace attn_topo;
  criterion("Persistence oracle equivalence (500 matrices, n in 2..7)", 30, oracle_equivalence);
  criterion("H0/MST identity (200 matrices)", 5, h0_mst);
  criterion("Known H1 case: 4-cycle gives (0.5, 0.7)", 0, four_cycle);
  criterion("Cross-barcode null: cross_barcode(A, A) = 0 (100 matrices)", 0, cross_null);
  criterion("Gradient check vs central differences (50 draws, rel err <= 1e-4)", 10, gradient_check);
  criterion("Loss spot values", 0, loss_spots);
  criterion("Oracle ARC closed form (a = 0.85, 0.5)", 0, oracle_closed_form);
  criterion("Hand ARC area 0.15625", 0, hand_arc);
  criterion("Synthetic end-to-end ordering (S = 2000, 5 seeds)", 300, synthetic_end_to_end);
  criterion("Shapley axioms and planted top-1 selection", 0, shapley_checks);
  criterion("Feature count F = 3744 and 6x6 pair grid", 0, feature_count_and_grid);
  criterion("Determinism of featurize/train/evaluate", 0, determinism);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
