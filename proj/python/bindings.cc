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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "attn_topo/attention.h"
#include "attn_topo/baselines.h"
#include "attn_topo/cli.h"
#include "attn_topo/confidence_model.h"
#include "attn_topo/dataset.h"
#include "attn_topo/errors.h"
#include "attn_topo/evaluation.h"
#include "attn_topo/features.h"
#include "attn_topo/matrix_features.h"
#include "attn_topo/npy.h"
#include "attn_topo/persistence.h"

namespace py = pybind11;
using namespace attn_topo;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> flat(const Array& a) { return {a.data(), a.data() + a.size()}; }

std::size_t square_side(const Array& a, const char* what) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1)) {
    throw ValidationError(std::string(what) + " must be a square 2-D array");
  }
  return static_cast<std::size_t>(a.shape(0));
}

AttentionMatrix to_attention(const Array& a) {
  AttentionMatrix m(square_side(a, "attention"), flat(a));
  m.validate();
  return m;
}

py::list bars_to_list(const Barcode& b) {
  py::list out;
  for (const Bar& bar : b.sorted()) out.append(py::make_tuple(bar.dim, bar.birth, bar.death, bar.essential));
  return out;
}

py::array tensor_to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
  return std::visit(
      [&](const auto& v) -> py::array {
        using T = typename std::decay_t<decltype(v)>::value_type;
        py::array_t<T> out(shape);
        std::copy(v.begin(), v.end(), out.mutable_data());
        return out;
      },
      t.data);
}

template <typename T>
Tensor make_tensor(const py::array& a) {
  auto c = py::array_t<T, py::array::c_style | py::array::forcecast>::ensure(a);
  std::vector<std::size_t> shape(c.shape(), c.shape() + c.ndim());
  return Tensor(std::move(shape), std::vector<T>(c.data(), c.data() + c.size()));
}

Tensor array_to_tensor(const py::array& a) {
  const py::dtype dt = a.dtype();
  if (dt.is(py::dtype::of<float>())) return make_tensor<float>(a);
  if (dt.is(py::dtype::of<double>())) return make_tensor<double>(a);
  if (dt.is(py::dtype::of<std::uint8_t>())) return make_tensor<std::uint8_t>(a);
  throw ValidationError("write_npy: dtype must be float32, float64 or uint8");
}

HeadRef head_from_label(const std::tuple<int, int>& h) {
  const auto [layer, head] = h;
  if (layer < 1 || head < 1) throw ValidationError("head indices are 1-based");
  return {static_cast<std::uint32_t>(layer - 1), static_cast<std::uint32_t>(head - 1)};
}

py::dict curve_to_dict(const RejectionCurve& c) {
  std::vector<double> x, y;
  for (const CurvePoint& p : c.points) {
    x.push_back(p.rejection);
    y.push_back(p.accuracy);
  }
  py::dict d;
  d["rejection"] = py::array_t<double>(static_cast<py::ssize_t>(x.size()), x.data());
  d["accuracy"] = py::array_t<double>(static_cast<py::ssize_t>(y.size()), y.data());
  d["base_accuracy"] = c.base_accuracy;
  d["area"] = c.area_above_base;
  d["step"] = c.step;
  return d;
}

std::vector<std::uint8_t> to_mask(const py::array& a) {
  auto c = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>::ensure(a);
  return {c.data(), c.data() + c.size()};
}

EvalOptions eval_options(std::size_t step, double max_rejection) {
  EvalOptions o;
  o.step = step;
  o.max_rejection = max_rejection;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Topological uncertainty features for attention maps.";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  m.def("read_npy", [](const std::string& path) { return tensor_to_array(read_tensor(path)); },
        py::arg("path"));
  m.def("write_npy",
        [](const std::string& path, const py::array& a) { write_tensor(path, array_to_tensor(a)); },
        py::arg("path"), py::arg("array"));

  m.def("to_distance",
        [](const Array& a) {
          const AttentionMatrix att = to_attention(a);
          const DistanceMatrix d = to_distance(att);
          const std::size_t n = d.size();
          py::array_t<double> out({n, n});
          auto r = out.mutable_unchecked<2>();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) r(i, j) = d(i, j);
          return out;
        },
        py::arg("attention"));
  m.def("barcode",
        [](const Array& d, int max_dim) {
          DistanceMatrix dm(square_side(d, "distance"), flat(d));
          dm.validate();
          return bars_to_list(vr_barcode(dm, max_dim));
        },
        py::arg("distance"), py::arg("max_dim") = 1,
        "Vietoris-Rips bars as (dim, birth, death, essential) tuples.");
  m.def("barcode_stats",
        [](const Array& d, double birth_threshold, double death_threshold) {
          DistanceMatrix dm(square_side(d, "distance"), flat(d));
          dm.validate();
          const auto v = barcode_stats(vr_barcode(dm), birth_threshold, death_threshold).values();
          py::dict out;
          for (std::size_t k = 0; k < v.size(); ++k) out[py::str(std::string(BarcodeStats::kNames[k]))] = v[k];
          return out;
        },
        py::arg("distance"), py::arg("birth_threshold") = kDefaultBirthThreshold,
        py::arg("death_threshold") = kDefaultDeathThreshold);
  m.def("cross_barcode",
        [](const Array& a, const Array& b) {
          const CrossBarcodeFeature f = cross_barcode(to_attention(a), to_attention(b));
          return py::make_tuple(f.total_length, bars_to_list(f.barcode));
        },
        py::arg("a"), py::arg("b"), "Returns (total_length, bars).");

  m.def("extract_features",
        [](const std::string& manifest, const std::vector<std::string>& families,
           const std::vector<std::tuple<std::tuple<int, int>, std::tuple<int, int>>>& pairs,
           int threads) {
          FeatureConfig c;
          c.families.clear();
          for (const std::string& f : families) c.families.push_back(parse_family(f));
          for (const auto& [first, second] : pairs) c.pairs.push_back({head_from_label(first), head_from_label(second)});
          const AttentionDump dump = load_dataset(manifest);
          FeatureMatrix fm;
          {
            py::gil_scoped_release release;
            fm = extract_features(dump, c, threads);
          }
          py::array_t<double> values({fm.rows(), fm.cols()});
          std::copy(fm.values.data(), fm.values.data() + fm.values.size(), values.mutable_data());
          std::vector<std::string> names;
          for (const FeatureKey& k : fm.index.entries()) names.push_back(k.name());
          return py::make_tuple(values, names);
        },
        py::arg("manifest"), py::arg("families") = std::vector<std::string>{"graph", "barcode", "template"},
        py::arg("pairs") = std::vector<std::tuple<std::tuple<int, int>, std::tuple<int, int>>>{},
        py::arg("threads") = 0, "Returns (values, names); heads in pairs are 1-based (layer, head).");

  m.def("confidence_loss",
        [](const std::vector<double>& p, const std::vector<double>& y, double c, double lambda) {
          if (p.size() != y.size()) throw ValidationError("confidence_loss: p and y differ in length");
          return confidence_loss(p, y, c, lambda);
        },
        py::arg("p"), py::arg("y"), py::arg("c"), py::arg("lam") = 0.01);

  m.def("rejection_curve",
        [](const Array& conf, const py::array& correct, std::size_t step, double max_rejection) {
          const std::vector<std::uint8_t> mask = to_mask(correct);
          return curve_to_dict(rejection_curve(std::span<const double>(conf.data(), static_cast<std::size_t>(conf.size())),
                                               mask, eval_options(step, max_rejection)));
        },
        py::arg("confidence"), py::arg("correct"), py::arg("step") = 0, py::arg("max_rejection") = 1.0);
  m.def("oracle_curve",
        [](const py::array& correct, std::size_t step, double max_rejection) {
          return curve_to_dict(oracle_curve(to_mask(correct), eval_options(step, max_rejection)));
        },
        py::arg("correct"), py::arg("step") = 0, py::arg("max_rejection") = 1.0);

  m.def("softmax_response", [](const std::vector<double>& p) { return softmax_response(p); }, py::arg("p"));

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          int code;
          {
            py::gil_scoped_release release;
            code = run_cli(args, out, err);
          }
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command line tool in-process; returns (exit_code, stdout, stderr).");
}
