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

#include "attn_topo/synth.h"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <string_view>
#include <vector>

#include "attn_topo/errors.h"
#include "attn_topo/rng.h"

namespace attn_topo {
namespace {

constexpr std::string_view kKeys[] = {
    "train_samples", "test_samples", "max_tokens",   "min_length",
    "num_classes",   "num_layers",   "num_heads",    "error_rate",
    "signal",        "base_diagonal", "jitter",      "signal_layer",
    "signal_head",   "embedding_dim", "embedding_signal", "margin",
    "margin_gap",    "mc_runs",      "mc_noise",     "punct_rate",
    "seed"};

// Fills row i of an n x n block with weights summing to 1.
void random_row(Rng& rng, std::vector<float>& out, std::size_t offset,
                std::size_t stride, std::size_t n, std::size_t i,
                double diagonal) {
  std::vector<double> w(n, 0.0);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i && diagonal >= 0.0) continue;
    const double u = rng.uniform();
    w[j] = u * u;
    total += w[j];
  }
  double rest = 1.0;
  if (diagonal >= 0.0) {
    w[i] = diagonal;
    rest = 1.0 - diagonal;
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i && diagonal >= 0.0) continue;
    w[j] = total > 0.0 ? w[j] / total * rest : rest / static_cast<double>(n - 1);
  }
  for (std::size_t j = 0; j < n; ++j) {
    out[offset + i * stride + j] = static_cast<float>(w[j]);
  }
}

}  // namespace

void SynthSpec::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("synth: " + m); };
  if (train_samples == 0 || test_samples == 0) fail("sample counts must be positive");
  if (max_tokens < 2 || max_tokens > 255) fail("max_tokens must be in [2, 255]");
  if (min_length < 2 || min_length > max_tokens) fail("min_length must be in [2, max_tokens]");
  if (num_classes < 2 || num_classes > 255) fail("num_classes must be in [2, 255]");
  if (num_layers == 0 || num_heads == 0) fail("num_layers and num_heads must be positive");
  if (!(error_rate >= 0.0 && error_rate <= 1.0)) fail("error_rate must be in [0, 1]");
  if (!(base_diagonal >= 0.0 && base_diagonal <= 1.0)) fail("base_diagonal must be in [0, 1]");
  if (!(base_diagonal + signal >= 0.0 && base_diagonal + signal <= 1.0)) {
    fail("base_diagonal + signal must be in [0, 1]");
  }
  if (!(jitter >= 0.0)) fail("jitter must be non-negative");
  if (signal_layer > num_layers) fail("signal_layer out of range");
  if (signal_head > num_heads) fail("signal_head out of range");
  if (mc_runs == 1) fail("mc_runs must be 0 or at least 2");
  if (!(mc_noise >= 0.0)) fail("mc_noise must be non-negative");
  if (!(punct_rate >= 0.0 && punct_rate <= 1.0)) fail("punct_rate must be in [0, 1]");
}

std::size_t SynthSpec::signal_layer_index() const {
  return signal_layer == 0 ? num_layers - 1 : signal_layer - 1;
}

std::size_t SynthSpec::signal_head_index() const {
  return signal_head == 0 ? num_heads - 1 : signal_head - 1;
}

nlohmann::json SynthSpec::to_json() const {
  return {{"train_samples", train_samples}, {"test_samples", test_samples},
          {"max_tokens", max_tokens},       {"min_length", min_length},
          {"num_classes", num_classes},     {"num_layers", num_layers},
          {"num_heads", num_heads},         {"error_rate", error_rate},
          {"signal", signal},               {"base_diagonal", base_diagonal},
          {"jitter", jitter},               {"signal_layer", signal_layer},
          {"signal_head", signal_head},     {"embedding_dim", embedding_dim},
          {"embedding_signal", embedding_signal}, {"margin", margin},
          {"margin_gap", margin_gap},       {"mc_runs", mc_runs},
          {"mc_noise", mc_noise},           {"punct_rate", punct_rate},
          {"seed", seed}};
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("synth must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw ValidationError("synth: unknown key '" + key + "'");
    }
  }
  SynthSpec s;
  s.train_samples = j.value("train_samples", s.train_samples);
  s.test_samples = j.value("test_samples", s.test_samples);
  s.max_tokens = j.value("max_tokens", s.max_tokens);
  s.min_length = j.value("min_length", s.min_length);
  s.num_classes = j.value("num_classes", s.num_classes);
  s.num_layers = j.value("num_layers", s.num_layers);
  s.num_heads = j.value("num_heads", s.num_heads);
  s.error_rate = j.value("error_rate", s.error_rate);
  s.signal = j.value("signal", s.signal);
  s.base_diagonal = j.value("base_diagonal", s.base_diagonal);
  s.jitter = j.value("jitter", s.jitter);
  s.signal_layer = j.value("signal_layer", s.signal_layer);
  s.signal_head = j.value("signal_head", s.signal_head);
  s.embedding_dim = j.value("embedding_dim", s.embedding_dim);
  s.embedding_signal = j.value("embedding_signal", s.embedding_signal);
  s.margin = j.value("margin", s.margin);
  s.margin_gap = j.value("margin_gap", s.margin_gap);
  s.mc_runs = j.value("mc_runs", s.mc_runs);
  s.mc_noise = j.value("mc_noise", s.mc_noise);
  s.punct_rate = j.value("punct_rate", s.punct_rate);
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

AttentionDump synthesize(const SynthSpec& spec, std::size_t samples,
                         std::uint64_t seed, const std::string& split) {
  spec.validate();
  if (samples == 0) throw ValidationError("synth: sample count must be positive");
  Rng rng(seed);
  const std::size_t S = samples, T = spec.max_tokens, C = spec.num_classes;
  const std::size_t L = spec.num_layers, H = spec.num_heads, D = spec.embedding_dim;

  AttentionDump d;
  d.split = split;
  d.num_samples = S;
  d.num_layers = L;
  d.num_heads = H;
  d.max_tokens = T;
  d.num_classes = C;
  d.lengths.resize(S);
  d.labels.resize(S);
  d.logits.assign(S * C, 0.0f);
  d.attentions.assign(S * L * H * T * T, 0.0f);
  d.token_flags.assign(S * T, 0);
  d.embedding_dim = D;
  d.embeddings.assign(S * D, 0.0f);
  d.embedding_source = "synthetic";

  const auto errors = static_cast<std::size_t>(
      std::llround(spec.error_rate * static_cast<double>(S)));
  std::vector<std::uint8_t> wrong(S, 0);
  std::fill(wrong.begin(), wrong.begin() + static_cast<std::ptrdiff_t>(errors), 1);
  rng.shuffle(std::span<std::uint8_t>(wrong));

  const std::size_t sig_l = spec.signal_layer_index(), sig_h = spec.signal_head_index();
  std::vector<std::size_t> predicted(S);

  for (std::size_t s = 0; s < S; ++s) {
    const std::size_t n = spec.min_length + rng.below(T - spec.min_length + 1);
    d.lengths[s] = static_cast<std::uint32_t>(n);
    const std::size_t label = rng.below(C);
    d.labels[s] = static_cast<std::uint32_t>(label);
    std::size_t pred = label;
    if (wrong[s]) pred = (label + 1 + rng.below(C - 1)) % C;
    predicted[s] = pred;

    // Logits: predicted class leads by a margin.
    float* logit = &d.logits[s * C];
    double best_other = -1e300;
    for (std::size_t c = 0; c < C; ++c) {
      logit[c] = static_cast<float>(0.3 * rng.normal());
      if (c != pred) best_other = std::max(best_other, static_cast<double>(logit[c]));
    }
    const double m = rng.uniform(spec.margin, spec.margin + 2.0) -
                     (wrong[s] ? spec.margin_gap : 0.0);
    logit[pred] = static_cast<float>(best_other + std::max(m, 0.05));

    // Flags.
    std::uint8_t* flags = &d.token_flags[s * T];
    for (std::size_t t = 0; t < T; ++t) {
      if (t >= n) {
        flags[t] = kTokenPad;
      } else if (t == 0) {
        flags[t] = kTokenCls;
      } else if (t == n - 1) {
        flags[t] = kTokenSep;
      } else if (rng.uniform() < spec.punct_rate) {
        flags[t] = kTokenPunct;
      }
    }

    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t h = 0; h < H; ++h) {
        const std::size_t offset = (((s * L + l) * H + h) * T) * T;
        const bool signal_head = l == sig_l && h == sig_h;
        for (std::size_t i = 0; i < n; ++i) {
          double diag = -1.0;
          if (signal_head) {
            diag = spec.base_diagonal + (wrong[s] ? spec.signal : 0.0) +
                   spec.jitter * rng.uniform(-1.0, 1.0);
            diag = std::clamp(diag, 0.0, 1.0);
            if (n == 1) diag = 1.0;
          }
          random_row(rng, d.attentions, offset, T, n, i, diag);
        }
      }
    }

    float* emb = &d.embeddings[s * D];
    for (std::size_t k = 0; k < D; ++k) {
      const double mean = (k % C == pred) ? 1.0 : 0.0;
      emb[k] = static_cast<float>(mean + rng.normal());
    }
    if (D > 0 && wrong[s]) emb[D - 1] += static_cast<float>(spec.embedding_signal);
  }

  if (spec.mc_runs > 0) {
    const std::size_t R = spec.mc_runs;
    d.mc_runs = R;
    d.mc_probs.assign(R * S * C, 0.0f);
    std::vector<double> z(C);
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t s = 0; s < S; ++s) {
        double mx = -1e300;
        for (std::size_t c = 0; c < C; ++c) {
          z[c] = d.logits[s * C + c] + spec.mc_noise * rng.normal();
          mx = std::max(mx, z[c]);
        }
        double total = 0.0;
        for (double& v : z) total += (v = std::exp(v - mx));
        for (std::size_t c = 0; c < C; ++c) {
          d.mc_probs[(r * S + s) * C + c] = static_cast<float>(z[c] / total);
        }
      }
    }
  }
  d.validate();
  return d;
}

SynthPaths write_synthetic(const SynthSpec& spec, const std::filesystem::path& out) {
  Rng master(spec.seed);
  const std::uint64_t train_seed = master.next();
  const std::uint64_t test_seed = master.next();
  const AttentionDump train = synthesize(spec, spec.train_samples, train_seed, "train");
  const AttentionDump test = synthesize(spec, spec.test_samples, test_seed, "test");
  save_dataset(train, out / "train");
  save_dataset(test, out / "test");
  return {out / "train" / "manifest.json", out / "test" / "manifest.json"};
}

}  // namespace attn_topo
