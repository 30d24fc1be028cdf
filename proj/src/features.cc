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

#include "attn_topo/features.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <tuple>

#include "attn_topo/errors.h"
#include "attn_topo/npy.h"
#include "attn_topo/parallel.h"

namespace attn_topo {
namespace {

using nlohmann::json;

std::string suffix(const std::optional<HeadRef>& h) {
  if (!h) return "";
  return "@" + std::to_string(h->layer + 1) + "." + std::to_string(h->head + 1);
}

json head_to_json(const HeadRef& h) { return json::array({h.layer + 1, h.head + 1}); }

HeadRef head_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() ||
      !j[1].is_number_integer() || j[0].get<long long>() < 1 ||
      j[1].get<long long>() < 1) {
    throw ValidationError("expected a 1-based [layer, head] pair, got " +
                          j.dump());
  }
  return {static_cast<std::uint32_t>(j[0].get<long long>() - 1),
          static_cast<std::uint32_t>(j[1].get<long long>() - 1)};
}

std::vector<Family> canonical_families(const std::vector<Family>& families) {
  std::vector<Family> out = families;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

std::string_view family_name(Family family) {
  switch (family) {
    case Family::kGraph: return "graph";
    case Family::kBarcode: return "barcode";
    case Family::kTemplate: return "template";
    case Family::kCrossBarcode: return "crossbarcode";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  for (Family f : {Family::kGraph, Family::kBarcode, Family::kTemplate,
                   Family::kCrossBarcode}) {
    if (family_name(f) == name) return f;
  }
  throw ValidationError("unknown feature family '" + std::string(name) + "'");
}

std::size_t family_width(Family family) {
  switch (family) {
    case Family::kGraph: return GraphFeatures::kCount;
    case Family::kBarcode: return BarcodeStats::kCount;
    case Family::kTemplate: return TemplateFeatures::kCount;
    case Family::kCrossBarcode: return 1;
  }
  return 0;
}

std::string_view subtype_name(Family family, std::size_t subtype) {
  switch (family) {
    case Family::kGraph: return GraphFeatures::kNames.at(subtype);
    case Family::kBarcode: return BarcodeStats::kNames.at(subtype);
    case Family::kTemplate: return TemplateFeatures::kNames.at(subtype);
    case Family::kCrossBarcode: return "total_length";
  }
  return "?";
}

std::string FeatureKey::name() const {
  std::string out(family_name(family));
  out += "/";
  out += subtype_name(family, subtype);
  out += suffix(head);
  if (partner) out += "~" + suffix(partner).substr(1);
  return out;
}

FeatureIndex::FeatureIndex(std::vector<FeatureKey> entries)
    : entries_(std::move(entries)) {
  std::vector<FeatureKey> sorted = entries_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("feature index contains duplicate entries");
  }
}

FeatureIndex FeatureIndex::subset(std::span<const std::size_t> positions) const {
  std::vector<FeatureKey> out;
  out.reserve(positions.size());
  for (std::size_t p : positions) out.push_back(entries_.at(p));
  return FeatureIndex(std::move(out));
}

json FeatureIndex::to_json() const {
  json out = json::array();
  for (const FeatureKey& k : entries_) {
    json e = {{"family", family_name(k.family)},
              {"subtype", subtype_name(k.family, k.subtype)},
              {"layer", nullptr},
              {"head", nullptr}};
    if (k.head) {
      e["layer"] = k.head->layer + 1;
      e["head"] = k.head->head + 1;
    }
    if (k.partner) e["partner"] = head_to_json(*k.partner);
    out.push_back(std::move(e));
  }
  return out;
}

FeatureIndex FeatureIndex::from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("feature index must be an array");
  std::vector<FeatureKey> entries;
  for (const json& e : j) {
    FeatureKey k;
    k.family = parse_family(e.at("family").get<std::string>());
    const std::string sub = e.at("subtype").get<std::string>();
    bool found = false;
    for (std::size_t s = 0; s < family_width(k.family); ++s) {
      if (subtype_name(k.family, s) == sub) {
        k.subtype = static_cast<std::uint32_t>(s);
        found = true;
      }
    }
    if (!found) throw ValidationError("unknown feature subtype '" + sub + "'");
    if (!e.at("layer").is_null()) {
      k.head = head_from_json(json::array({e.at("layer"), e.at("head")}));
    }
    if (e.contains("partner")) k.partner = head_from_json(e["partner"]);
    entries.push_back(k);
  }
  return FeatureIndex(std::move(entries));
}

PairGrid default_pair_grid() {
  PairGrid grid;
  constexpr std::uint32_t k = 11;  // 0-based index of layer/head 12
  for (std::uint32_t i = 2; i <= 12; i += 2) grid.rows.push_back({i - 1, k});
  for (std::uint32_t j = 1; j <= 11; j += 2) grid.cols.push_back({k, j - 1});
  return grid;
}

FeatureIndex build_index(const FeatureConfig& config, std::size_t num_layers,
                         std::size_t num_heads) {
  std::vector<FeatureKey> entries;
  for (Family f : canonical_families(config.families)) {
    if (f == Family::kCrossBarcode) {
      for (const HeadPair& p : config.pairs) {
        for (const HeadRef& h : {p.first, p.second}) {
          if (h.layer >= num_layers || h.head >= num_heads) {
            throw ValidationError(
                "cross-barcode pair references layer " +
                std::to_string(h.layer + 1) + ", head " +
                std::to_string(h.head + 1) + " outside the dump's " +
                std::to_string(num_layers) + "x" + std::to_string(num_heads));
          }
        }
        entries.push_back({f, 0, p.first, p.second});
      }
      continue;
    }
    for (std::uint32_t l = 0; l < num_layers; ++l) {
      for (std::uint32_t h = 0; h < num_heads; ++h) {
        for (std::uint32_t s = 0; s < family_width(f); ++s) {
          entries.push_back({f, s, HeadRef{l, h}, std::nullopt});
        }
      }
    }
  }
  return FeatureIndex(std::move(entries));
}

FeatureMatrix extract_features(const AttentionDump& dump,
                               const FeatureConfig& config, int threads) {
  const std::vector<Family> families = canonical_families(config.families);
  const bool want_graph = std::count(families.begin(), families.end(), Family::kGraph) > 0;
  const bool want_barcode = std::count(families.begin(), families.end(), Family::kBarcode) > 0;
  const bool want_template = std::count(families.begin(), families.end(), Family::kTemplate) > 0;
  const bool want_cross = std::count(families.begin(), families.end(), Family::kCrossBarcode) > 0;

  FeatureMatrix fm;
  fm.index = build_index(config, dump.num_layers, dump.num_heads);
  const std::size_t heads = dump.num_layers * dump.num_heads;
  fm.values.resize(static_cast<Eigen::Index>(dump.num_samples),
                   static_cast<Eigen::Index>(fm.index.size()));

  // Start column of each family block.
  std::size_t offset = 0;
  std::array<std::size_t, 4> start{};
  for (Family f : families) {
    start[static_cast<std::size_t>(f)] = offset;
    offset += f == Family::kCrossBarcode ? config.pairs.size()
                                         : heads * family_width(f);
  }

  auto base = [&start](Family f) { return start[static_cast<std::size_t>(f)]; };

  parallel_for(dump.num_samples, threads, [&](std::size_t s) {
    auto row = fm.values.row(static_cast<Eigen::Index>(s));
    auto put = [&](std::size_t col, double v) {
      row(static_cast<Eigen::Index>(col)) = v;
    };
    try {
      for (std::size_t l = 0; l < dump.num_layers; ++l) {
        for (std::size_t h = 0; h < dump.num_heads; ++h) {
          const std::size_t slot = l * dump.num_heads + h;
          const AttentionMatrix a = dump.attention(s, l, h);
          if (want_graph) {
            const auto v = graph_features(a, config.edge_threshold).values();
            for (std::size_t k = 0; k < v.size(); ++k) {
              put(base(Family::kGraph) + slot * v.size() + k, v[k]);
            }
          }
          if (want_barcode) {
            const auto v = barcode_stats(vr_barcode(to_distance(a), 1),
                                         config.birth_threshold,
                                         config.death_threshold)
                               .values();
            for (std::size_t k = 0; k < v.size(); ++k) {
              put(base(Family::kBarcode) + slot * v.size() + k, v[k]);
            }
          }
          if (want_template) {
            const auto v = template_features(a, dump.flags(s)).values();
            for (std::size_t k = 0; k < v.size(); ++k) {
              put(base(Family::kTemplate) + slot * v.size() + k, v[k]);
            }
          }
        }
      }
      if (want_cross) {
        for (std::size_t p = 0; p < config.pairs.size(); ++p) {
          const HeadPair& pair = config.pairs[p];
          const double total =
              cross_barcode(dump.attention(s, pair.first.layer, pair.first.head),
                            dump.attention(s, pair.second.layer, pair.second.head))
                  .total_length;
          put(base(Family::kCrossBarcode) + p, total);
        }
      }
    } catch (const ValidationError& e) {
      throw ValidationError(dump.split + " sample " + std::to_string(s) + ": " +
                            e.what());
    } catch (const Error& e) {
      throw Error(dump.split + " sample " + std::to_string(s) + ": " +
                  e.what());
    }
  });
  return fm;
}

FeatureMatrix aggregate_mean(const FeatureMatrix& fm) {
  std::vector<FeatureKey> keys;
  std::map<std::pair<Family, std::uint32_t>, std::size_t> slot;
  std::vector<std::size_t> target(fm.cols());
  for (std::size_t c = 0; c < fm.cols(); ++c) {
    const FeatureKey& k = fm.index[c];
    auto [it, inserted] = slot.emplace(std::make_pair(k.family, k.subtype), keys.size());
    if (inserted) keys.push_back({k.family, k.subtype, std::nullopt, std::nullopt});
    target[c] = it->second;
  }
  FeatureMatrix out;
  out.index = FeatureIndex(keys);
  out.values = RowMatrix::Zero(fm.values.rows(), static_cast<Eigen::Index>(keys.size()));
  for (Eigen::Index r = 0; r < fm.values.rows(); ++r) {
    std::vector<double> sum(keys.size(), 0.0);
    std::vector<std::size_t> count(keys.size(), 0);
    for (std::size_t c = 0; c < fm.cols(); ++c) {
      const double v = fm.values(r, static_cast<Eigen::Index>(c));
      if (std::isnan(v)) continue;
      sum[target[c]] += v;
      ++count[target[c]];
    }
    for (std::size_t k = 0; k < keys.size(); ++k) {
      out.values(r, static_cast<Eigen::Index>(k)) =
          count[k] ? sum[k] / static_cast<double>(count[k]) : kMissingValue;
    }
  }
  return out;
}

FeatureMatrix select_columns(const FeatureMatrix& fm,
                             std::span<const std::size_t> positions) {
  FeatureMatrix out;
  out.index = fm.index.subset(positions);
  out.values.resize(fm.values.rows(), static_cast<Eigen::Index>(positions.size()));
  for (std::size_t k = 0; k < positions.size(); ++k) {
    out.values.col(static_cast<Eigen::Index>(k)) =
        fm.values.col(static_cast<Eigen::Index>(positions[k]));
    if (!fm.train_mean.empty()) {
      out.train_mean.push_back(fm.train_mean[positions[k]]);
      out.train_std.push_back(fm.train_std[positions[k]]);
    }
  }
  return out;
}

ColumnStats fit_column_stats(const RowMatrix& values) {
  const auto cols = static_cast<std::size_t>(values.cols());
  ColumnStats stats{std::vector<double>(cols, 0.0),
                    std::vector<double>(cols, 0.0)};
  for (std::size_t c = 0; c < cols; ++c) {
    double sum = 0.0;
    std::size_t n = 0;
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
      const double v = values(r, static_cast<Eigen::Index>(c));
      if (std::isnan(v)) continue;
      sum += v;
      ++n;
    }
    if (n == 0) continue;
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
      const double v = values(r, static_cast<Eigen::Index>(c));
      if (!std::isnan(v)) sq += (v - mean) * (v - mean);
    }
    stats.mean[c] = mean;
    stats.std[c] = std::sqrt(sq / static_cast<double>(n));
  }
  return stats;
}

void impute_missing(RowMatrix& values, std::span<const double> mean) {
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (std::isnan(values(r, c))) values(r, c) = mean[static_cast<std::size_t>(c)];
    }
  }
}

void attach_train_stats(FeatureMatrix& train, FeatureMatrix& test) {
  if (train.index != test.index) {
    throw ValidationError("train and test feature indices differ");
  }
  ColumnStats stats = fit_column_stats(train.values);
  impute_missing(train.values, stats.mean);
  impute_missing(test.values, stats.mean);
  train.train_mean = test.train_mean = stats.mean;
  train.train_std = test.train_std = stats.std;
}

Standardizer Standardizer::fit(const RowMatrix& train) {
  const ColumnStats stats = fit_column_stats(train);
  Standardizer s;
  for (std::size_t c = 0; c < stats.mean.size(); ++c) {
    // Rounding can leave a constant column with a tiny nonzero spread.
    if (stats.std[c] > 1e-12 * std::max(1.0, std::abs(stats.mean[c]))) {
      s.kept.push_back(c);
      s.mean.push_back(stats.mean[c]);
      s.scale.push_back(stats.std[c]);
    } else {
      s.dropped.push_back(c);
    }
  }
  return s;
}

RowMatrix Standardizer::apply(const RowMatrix& values) const {
  RowMatrix out(values.rows(), static_cast<Eigen::Index>(kept.size()));
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (std::size_t k = 0; k < kept.size(); ++k) {
      const double v = values(r, static_cast<Eigen::Index>(kept[k]));
      out(r, static_cast<Eigen::Index>(k)) =
          std::isnan(v) ? 0.0 : (v - mean[k]) / scale[k];
    }
  }
  return out;
}

json Standardizer::to_json() const {
  return {{"kept", kept}, {"mean", mean}, {"scale", scale}, {"dropped", dropped}};
}

Standardizer Standardizer::from_json(const json& j) {
  Standardizer s;
  s.kept = j.at("kept").get<std::vector<std::size_t>>();
  s.mean = j.at("mean").get<std::vector<double>>();
  s.scale = j.at("scale").get<std::vector<double>>();
  s.dropped = j.value("dropped", std::vector<std::size_t>{});
  if (s.mean.size() != s.kept.size() || s.scale.size() != s.kept.size()) {
    throw ValidationError("standardizer arrays have inconsistent lengths");
  }
  return s;
}

void save_feature_matrix(const FeatureMatrix& fm,
                         const std::filesystem::path& stem) {
  if (fm.index.size() != fm.cols()) {
    throw ValidationError("feature matrix has " + std::to_string(fm.cols()) +
                          " columns but the index has " +
                          std::to_string(fm.index.size()));
  }
  std::vector<double> buffer(fm.values.data(),
                             fm.values.data() + fm.values.size());
  auto npy = stem;
  npy += ".npy";
  write_tensor(npy, Tensor({fm.rows(), fm.cols()}, std::move(buffer)));
  json side = {{"rows", fm.rows()},
               {"cols", fm.cols()},
               {"index", fm.index.to_json()},
               {"train_mean", fm.train_mean},
               {"train_std", fm.train_std}};
  auto sidecar = stem;
  sidecar += ".json";
  std::ofstream out(sidecar);
  out << side.dump(2) << '\n';
  if (!out) throw Error("cannot write " + sidecar.string());
}

FeatureMatrix load_feature_matrix(const std::filesystem::path& stem) {
  auto npy = stem;
  npy += ".npy";
  auto sidecar = stem;
  sidecar += ".json";
  std::ifstream in(sidecar);
  if (!in) throw ValidationError("cannot open " + sidecar.string());
  json side;
  try {
    in >> side;
  } catch (const json::exception& e) {
    throw ValidationError(sidecar.string() + ": " + e.what());
  }
  const Tensor t = read_tensor(npy);
  if (t.shape.size() != 2) {
    throw ValidationError(npy.string() + ": feature matrix must be 2-D");
  }
  FeatureMatrix fm;
  fm.index = FeatureIndex::from_json(side.at("index"));
  if (fm.index.size() != t.shape[1]) {
    throw ValidationError(npy.string() + ": " + std::to_string(t.shape[1]) +
                          " columns but sidecar lists " +
                          std::to_string(fm.index.size()));
  }
  fm.values.resize(static_cast<Eigen::Index>(t.shape[0]),
                   static_cast<Eigen::Index>(t.shape[1]));
  for (std::size_t i = 0; i < t.element_count(); ++i) {
    fm.values.data()[i] = t.as_double(i);
  }
  fm.train_mean = side.value("train_mean", std::vector<double>{});
  fm.train_std = side.value("train_std", std::vector<double>{});
  return fm;
}

json head_pair_to_json(const HeadPair& pair) {
  return json::array({head_to_json(pair.first), head_to_json(pair.second)});
}

HeadPair head_pair_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) {
    throw ValidationError("expected [[layer, head], [layer, head]], got " +
                          j.dump());
  }
  return {head_from_json(j[0]), head_from_json(j[1])};
}

}  // namespace attn_topo
