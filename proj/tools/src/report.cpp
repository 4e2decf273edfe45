// Copyright 2026 The featscope Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "featscope/binary_io.hpp"
#include "featscope/cli/commands.hpp"
#include "featscope/error.hpp"
#include "featscope/metrics.hpp"
#include "featscope/stats.hpp"

namespace featscope::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Point {
  std::string label;
  double x = 0.0;
  double y = 0.0;
};

std::string scatter_svg(const std::string& title, const std::string& subtitle, const std::string& x_label,
                        const std::string& y_label, const std::vector<Point>& points) {
  constexpr double W = 520, H = 380, L = 70, R = 30, T = 60, B = 60;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!points.empty()) {
    auto [xa, xb] = std::minmax_element(points.begin(), points.end(), [](auto& a, auto& b) { return a.x < b.x; });
    auto [ya, yb] = std::minmax_element(points.begin(), points.end(), [](auto& a, auto& b) { return a.y < b.y; });
    x0 = xa->x, x1 = xb->x, y0 = ya->y, y1 = yb->y;
  }
  auto pad = [](double& lo, double& hi) {
    const double span = hi - lo;
    const double p = span > 0 ? 0.08 * span : (std::abs(lo) > 0 ? 0.1 * std::abs(lo) : 1.0);
    lo -= p;
    hi += p;
  };
  pad(x0, x1);
  pad(y0, y1);
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\" font-family=\"sans-serif\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title)
    << "</text>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"44\" text-anchor=\"middle\" font-size=\"12\" fill=\"#444\">"
    << xml_escape(subtitle) << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0;
    const double yv = y0 + (y1 - y0) * i / 4.0;
    s << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
      << num(std::round(xv * 1000) / 1000) << "</text>\n";
    s << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 3 << "\" text-anchor=\"end\" font-size=\"10\">"
      << num(std::round(yv * 1000) / 1000) << "</text>\n";
  }
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 16 << "\" text-anchor=\"middle\" font-size=\"12\">"
    << xml_escape(x_label) << "</text>\n";
  s << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
    << (T + H - B) / 2 << ")\">" << xml_escape(y_label) << "</text>\n";
  for (const auto& p : points) {
    s << "<circle cx=\"" << px(p.x) << "\" cy=\"" << py(p.y) << "\" r=\"4\" fill=\"#1f77b4\"/>\n";
    s << "<text x=\"" << px(p.x) + 6 << "\" y=\"" << py(p.y) - 6 << "\" font-size=\"10\">" << xml_escape(p.label)
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string file_safe(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return s;
}

}  // namespace

RunManifest cmd_report(const CommandContext& ctx) {
  RunManifest m;
  m.command = "report";
  if (!ctx.config.contains("inputs") || !ctx.config["inputs"].is_array() || ctx.config["inputs"].empty()) {
    fail(ErrorCode::kConfig, "config needs a non-empty 'inputs' list of scored exports");
  }
  MetricTable metrics;
  if (auto mp = ctx.optional_path("metrics")) {
    metrics = MetricTable::load(*mp);
    m.inputs.push_back(mp->generic_string());
  }

  std::ostringstream table1, kw, dunn, corr, gates, margins;
  table1 << "protocol,model,features,responses,median,reported,mean_confidence\n";
  kw << "protocol,statistic,df,p_value,method,groups\n";
  dunn << "protocol,group_a,group_b,z,p_raw,p_holm\n";
  corr << "protocol,metric,n,spearman_rho,spearman_p,spearman_method,pearson_r,pearson_p,status\n";
  gates << "study_id,protocol,sessions,included,excluded_practice,excluded_catch,excluded_duration\n";
  std::vector<fs::path> written;
  fs::create_directories(ctx.out_dir);

  for (const auto& in : ctx.config["inputs"]) {
    fs::path path(in.get<std::string>());
    if (!path.is_absolute()) path = ctx.base_dir / path;
    m.inputs.push_back(path.generic_string());
    const ExportData data = parse_export(io::read_file(path));
    const std::string protocol = data.header.value("protocol", std::string("localization"));
    const Measure measure = protocol == "naming" ? Measure::kNameability : Measure::kLocalizability;
    const auto summaries = model_score(main_scores(data.records), measure);

    ScoreGroups groups;
    for (const auto& s : summaries) {
      table1 << protocol << ',' << s.model << ',' << s.feature_scores.size() << ',' << s.responses << ','
             << num(s.median) << ',' << num(s.reported) << ',' << (s.mean_confidence ? num(*s.mean_confidence) : "")
             << '\n';
      ScoreGroup g{s.model, {}};
      for (const auto& [_, v] : s.feature_scores) g.scores.push_back(v);
      groups.push_back(std::move(g));
    }
    if (groups.size() >= 2) {
      const TestResult h = kruskal_wallis(groups);
      kw << protocol << ',' << num(h.statistic) << ',' << (h.df ? num(*h.df) : "") << ',' << num(h.p_value) << ','
         << h.method << ',' << groups.size() << '\n';
      for (const auto& p : dunn_posthoc(groups)) {
        dunn << protocol << ',' << p.group_a << ',' << p.group_b << ',' << num(p.z) << ',' << num(p.p_raw) << ','
             << num(p.p_adjusted) << '\n';
      }
    } else {
      m.warnings.push_back(protocol + ": fewer than two models, no group tests");
    }

    for (const auto& metric : metrics.metrics()) {
      std::vector<Point> pts;
      std::vector<double> xs, ys;
      for (const auto& s : summaries) {
        if (auto v = metrics.get(s.model, metric)) {
          pts.push_back({s.model, *v, s.reported});
          xs.push_back(*v);
          ys.push_back(s.reported);
        }
      }
      std::string subtitle;
      corr << protocol << ',' << metric << ',' << xs.size() << ',';
      try {
        const TestResult sp = spearman(xs, ys);
        const TestResult pe = pearson(xs, ys);
        corr << num(sp.statistic) << ',' << num(sp.p_value) << ',' << sp.method << ',' << num(pe.statistic) << ','
             << num(pe.p_value) << ",ok\n";
        char buf[96];
        std::snprintf(buf, sizeof buf, "Spearman rho = %.3f, p = %.3g (n = %zu)", sp.statistic, sp.p_value, xs.size());
        subtitle = buf;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kUndefinedCorrelation && e.code() != ErrorCode::kInsufficientData) throw;
        const std::string status(to_string(e.code()));
        corr << ",,,,," << status << '\n';
        m.warnings.push_back(protocol + "/" + metric + ": " + status);
        subtitle = status;
      }
      const auto svg = ctx.out_dir / ("scatter_" + file_safe(protocol) + "_" + file_safe(metric) + ".svg");
      io::write_file(svg, scatter_svg(protocol + " vs " + metric, subtitle, metric,
                                      measure == Measure::kLocalizability ? "localizability (x100)" : "nameability",
                                      pts));
      written.push_back(svg);
    }

    if (data.header.contains("gates") && data.header["gates"].is_object()) {
      const auto report = QualityGateReport::from_json(data.header["gates"]);
      std::size_t inc = 0, xp = 0, xc = 0, xd = 0;
      for (const auto& d : report.participants) {
        inc += d.included;
        for (const auto& r : d.reasons) {
          xp += r == "practice";
          xc += r == "catch";
          xd += r == "duration";
        }
      }
      gates << report.study_id << ',' << protocol << ',' << report.participants.size() << ',' << inc << ',' << xp << ','
            << xc << ',' << xd << '\n';
    }
  }

  const bool have_margins = [&] {
    const auto ms = metrics.metrics();
    return std::count(ms.begin(), ms.end(), "accuracy") && std::count(ms.begin(), ms.end(), "baseline_accuracy");
  }();
  if (have_margins) {
    margins << "model,accuracy,baseline_accuracy,margin\n";
    for (const auto& model : metrics.models()) {
      const auto a = metrics.get(model, "accuracy");
      const auto b = metrics.get(model, "baseline_accuracy");
      if (a && b) margins << model << ',' << num(*a) << ',' << num(*b) << ',' << num(baseline_margin(*a, *b)) << '\n';
    }
  }

  auto emit = [&](const std::string& name, const std::ostringstream& s) {
    const auto p = ctx.out_dir / name;
    io::write_file(p, s.str());
    written.push_back(p);
  };
  emit("table1.csv", table1);
  emit("kruskal_wallis.csv", kw);
  emit("dunn.csv", dunn);
  emit("correlations.csv", corr);
  emit("gates.csv", gates);
  if (have_margins) emit("margins.csv", margins);
  for (const auto& p : written) m.add_output(ctx.out_dir, p);
  for (const auto& w : m.warnings) ctx.note("warning: " + w);
  return m;
}

}  // namespace featscope::cli
