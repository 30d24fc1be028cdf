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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <fstream>
#include <sstream>
#include <string>

#include "attn_topo/errors.h"
#include "attn_topo/evaluation.h"

namespace attn_topo {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                    "#bcbd22", "#17becf"};

}  // namespace

std::string render_svg(const std::vector<NamedCurve>& curves,
                       const RejectionCurve* oracle) {
  constexpr double kLeft = 70, kRight = 780, kTop = 20, kBottom = 540;
  double lo = 1.0;
  auto scan = [&](const RejectionCurve& c) {
    for (const auto& p : c.points) lo = std::min(lo, p.accuracy);
  };
  for (const auto& nc : curves) scan(nc.curve);
  if (oracle) scan(*oracle);
  lo = std::floor(lo * 10.0) / 10.0;
  if (lo >= 1.0) lo = 0.9;
  const auto px = [&](double x) { return kLeft + x * (kRight - kLeft); };
  const auto py = [&](double y) { return kBottom - (y - lo) / (1.0 - lo) * (kBottom - kTop); };

  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" "
       "width=\"800\" height=\"600\" viewBox=\"0 0 800 600\">\n"
    << "<rect width=\"800\" height=\"600\" fill=\"white\"/>\n"
    << "<g stroke=\"black\" stroke-width=\"1\">\n"
    << "<line x1=\"" << kLeft << "\" y1=\"" << kBottom << "\" x2=\"" << kRight
    << "\" y2=\"" << kBottom << "\"/>\n"
    << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
    << "\" y2=\"" << kBottom << "\"/>\n</g>\n"
    << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (int t = 0; t <= 5; ++t) {
    const double x = t / 5.0;
    s << "<text x=\"" << fmt_short(px(x)) << "\" y=\"" << kBottom + 18
      << "\" text-anchor=\"middle\">" << fmt_short(x) << "</text>\n";
    const double y = lo + (1.0 - lo) * t / 5.0;
    s << "<text x=\"" << kLeft - 8 << "\" y=\"" << fmt_short(py(y) + 4)
      << "\" text-anchor=\"end\">" << fmt_short(y) << "</text>\n";
  }
  s << "<text x=\"425\" y=\"580\" text-anchor=\"middle\">rejection rate</text>\n"
    << "<text x=\"18\" y=\"280\" text-anchor=\"middle\" "
       "transform=\"rotate(-90 18 280)\">accuracy</text>\n</g>\n";

  auto polyline = [&](const RejectionCurve& c, const char* color, bool dashed) {
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
    if (dashed) s << " stroke-dasharray=\"6 4\"";
    s << " points=\"";
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      if (i) s << ' ';
      s << fmt_short(px(c.points[i].rejection)) << ',' << fmt_short(py(c.points[i].accuracy));
    }
    s << "\"/>\n";
  };
  for (std::size_t k = 0; k < curves.size(); ++k) {
    polyline(curves[k].curve, kPalette[k % std::size(kPalette)], false);
  }
  if (oracle) polyline(*oracle, "black", true);

  s << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  double ly = kBottom - 16.0 * static_cast<double>(curves.size() + (oracle ? 1 : 0));
  auto legend = [&](const std::string& name, const char* color, bool dashed, double area) {
    s << "<line x1=\"560\" y1=\"" << fmt_short(ly) << "\" x2=\"590\" y2=\"" << fmt_short(ly)
      << "\" stroke=\"" << color << "\" stroke-width=\"2\""
      << (dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n"
      << "<text x=\"596\" y=\"" << fmt_short(ly + 4) << "\">" << escape_xml(name)
      << " (" << fmt_short(area * 1000.0) << "e-3)</text>\n";
    ly += 16.0;
  };
  for (std::size_t k = 0; k < curves.size(); ++k) {
    legend(curves[k].name, kPalette[k % std::size(kPalette)], false,
           curves[k].curve.area_above_base);
  }
  if (oracle) legend("oracle", "black", true, oracle->area_above_base);
  s << "</g>\n</svg>\n";
  return s.str();
}

void emit_report(const std::vector<NamedCurve>& curves, const RejectionCurve* oracle,
                 const std::filesystem::path& out_dir) {
  if (curves.empty()) throw ValidationError("emit_report: no curves");
  const RejectionCurve& first = curves.front().curve;
  for (const auto& nc : curves) {
    if (nc.name.empty()) throw ValidationError("emit_report: curve with empty name");
    if (nc.curve.points.size() != first.points.size()) {
      throw ValidationError("emit_report: curve '" + nc.name +
                            "' has a different rejection grid");
    }
    for (std::size_t i = 0; i < first.points.size(); ++i) {
      if (nc.curve.points[i].rejection != first.points[i].rejection) {
        throw ValidationError("emit_report: curve '" + nc.name +
                              "' has a different rejection grid");
      }
    }
  }
  std::filesystem::create_directories(out_dir);

  std::ostringstream csv;
  csv << "x";
  for (const auto& nc : curves) csv << ',' << csv_field(nc.name);
  csv << '\n';
  for (std::size_t i = 0; i < first.points.size(); ++i) {
    csv << fmt(first.points[i].rejection);
    for (const auto& nc : curves) csv << ',' << fmt(nc.curve.points[i].accuracy);
    csv << '\n';
  }
  write_file(out_dir / "report.csv", csv.str());

  nlohmann::ordered_json j;
  j["samples"] = first.samples;
  j["step"] = first.step;
  j["base_accuracy"] = first.base_accuracy;
  nlohmann::ordered_json areas = nlohmann::ordered_json::object();
  for (const auto& nc : curves) areas[nc.name] = nc.curve.area_above_base;
  j["areas"] = areas;
  j["oracle_area"] = oracle ? nlohmann::ordered_json(oracle->area_above_base)
                            : nlohmann::ordered_json(nullptr);
  write_file(out_dir / "report.json", j.dump(2) + "\n");

  write_file(out_dir / "curves.svg", render_svg(curves, oracle));
}

}  // namespace attn_topo
