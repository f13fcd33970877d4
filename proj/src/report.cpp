#include "mmsi/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "mmsi/csv.hpp"
#include "mmsi/error.hpp"

namespace mmsi {

using nlohmann::json;

const char* to_string(DfMode m) noexcept {
  switch (m) {
    case DfMode::Normal: return "normal";
    case DfMode::DfMin: return "dfmin";
    case DfMode::DfMax: return "dfmax";
    case DfMode::DfInd: return "dfind";
  }
  return "normal";
}

DfMode parse_df_mode(const std::string& s) {
  if (s == "normal" || s == "mmm") return DfMode::Normal;
  if (s == "dfmin" || s == "mmm.dfmin") return DfMode::DfMin;
  if (s == "dfmax" || s == "mmm.dfmax") return DfMode::DfMax;
  if (s == "dfind" || s == "mmm.dfind") return DfMode::DfInd;
  throw Error(ErrorCode::Schema, "unknown df mode '" + s + "'");
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

// JSON has no infinities; they travel as strings.
json number(double v) {
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  if (std::isnan(v)) return "NaN";
  return v;
}

double number(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "Inf") return std::numeric_limits<double>::infinity();
    if (s == "-Inf") return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  return j.get<double>();
}

json to_json_value(const InferenceReport& r) {
  json j;
  j["method"] = r.method;
  j["alternative"] = to_string(r.alternative);
  j["alpha"] = r.alpha;
  j["df_mode"] = to_string(r.df_mode);
  j["seed"] = r.seed;
  j["quadrature_error"] = r.quadrature_error;
  j["critical_value"] = number(r.critical_value);
  j["exponentiate"] = r.exponentiate;
  j["hypotheses"] = json::array();
  for (const auto& h : r.hypotheses) {
    json row;
    row["label"] = h.label;
    row["group"] = h.group;
    row["endpoint"] = h.endpoint;
    row["estimate"] = number(h.estimate);
    row["std_error"] = number(h.std_error);
    row["statistic"] = number(h.statistic);
    row["df"] = h.df ? json(*h.df) : json(nullptr);
    row["p_unadjusted"] = h.p_unadjusted;
    row["p_adjusted"] = h.p_adjusted;
    row["lower"] = number(h.lower);
    row["upper"] = number(h.upper);
    row["rejected"] = h.rejected;
    if (r.exponentiate) {
      row["exp_estimate"] = number(std::exp(h.estimate));
      row["exp_lower"] = number(std::exp(h.lower));
      row["exp_upper"] = number(std::exp(h.upper));
    }
    j["hypotheses"].push_back(std::move(row));
  }
  return j;
}

InferenceReport from_json_value(const json& j) {
  InferenceReport r;
  r.method = j.at("method").get<std::string>();
  r.alternative = parse_alternative(j.at("alternative").get<std::string>());
  r.alpha = j.at("alpha").get<double>();
  r.df_mode = parse_df_mode(j.at("df_mode").get<std::string>());
  r.seed = j.at("seed").get<std::uint64_t>();
  r.quadrature_error = j.at("quadrature_error").get<double>();
  r.critical_value = number(j.at("critical_value"));
  r.exponentiate = j.at("exponentiate").get<bool>();
  for (const auto& row : j.at("hypotheses")) {
    HypothesisResult h;
    h.label = row.at("label").get<std::string>();
    h.group = row.at("group").get<std::string>();
    h.endpoint = row.at("endpoint").get<std::string>();
    h.estimate = number(row.at("estimate"));
    h.std_error = number(row.at("std_error"));
    h.statistic = number(row.at("statistic"));
    if (!row.at("df").is_null()) h.df = row.at("df").get<int>();
    h.p_unadjusted = row.at("p_unadjusted").get<double>();
    h.p_adjusted = row.at("p_adjusted").get<double>();
    h.lower = number(row.at("lower"));
    h.upper = number(row.at("upper"));
    h.rejected = row.at("rejected").get<bool>();
    r.hypotheses.push_back(std::move(h));
  }
  return r;
}

}  // namespace

std::string to_json(const InferenceReport& report, int indent) { return to_json_value(report).dump(indent); }

std::string to_json(const std::vector<InferenceReport>& reports, int indent) {
  json j = json::array();
  for (const auto& r : reports) j.push_back(to_json_value(r));
  return j.dump(indent);
}

InferenceReport report_from_json(const std::string& text) {
  try {
    return from_json_value(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("report JSON: ") + e.what());
  }
}

std::vector<InferenceReport> reports_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    std::vector<InferenceReport> out;
    if (j.is_array())
      for (const auto& r : j) out.push_back(from_json_value(r));
    else
      out.push_back(from_json_value(j));
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("report JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Text table
// ---------------------------------------------------------------------------

namespace {

std::string fixed(double v, int digits) {
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string interval(const InferenceReport& r, const HypothesisResult& h) {
  const double lo = r.exponentiate ? std::exp(h.lower) : h.lower;
  const double hi = r.exponentiate ? std::exp(h.upper) : h.upper;
  switch (r.alternative) {
    case Alternative::Greater: return "[" + fixed(lo, 2) + "-Inf)";
    case Alternative::Less: return "(" + std::string(r.exponentiate ? "0" : "-Inf") + "-" + fixed(hi, 2) + "]";
    case Alternative::TwoSided: return "[" + fixed(lo, 2) + ", " + fixed(hi, 2) + "]";
  }
  return {};
}

std::string pad(const std::string& s, std::size_t w, bool right = false) {
  if (s.size() >= w) return s;
  return right ? std::string(w - s.size(), ' ') + s : s + std::string(w - s.size(), ' ');
}

}  // namespace

std::string format_table(const std::vector<InferenceReport>& reports) {
  if (reports.empty()) return {};
  const auto& first = reports.front();
  for (const auto& r : reports)
    if (r.hypotheses.size() != first.hypotheses.size())
      throw Error(ErrorCode::InvalidArgument, "reports describe different hypothesis sets");

  const std::size_t n = first.hypotheses.size();
  std::vector<std::vector<std::string>> cells(n);
  std::size_t wg = 5, we = 8, wf = first.exponentiate ? 2 : 6;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& h = first.hypotheses[i];
    const bool new_group = i == 0 || first.hypotheses[i - 1].group != h.group;
    cells[i].push_back(new_group ? h.group : "");
    cells[i].push_back(h.endpoint.empty() ? h.label : h.endpoint);
    cells[i].push_back(fixed(first.exponentiate ? std::exp(h.estimate) : h.estimate, 2));
    wg = std::max(wg, cells[i][0].size());
    we = std::max(we, cells[i][1].size());
    wf = std::max(wf, cells[i][2].size());
    for (const auto& r : reports) {
      cells[i].push_back(interval(r, r.hypotheses[i]));
      cells[i].push_back(fixed(r.hypotheses[i].p_adjusted, 4));
    }
  }
  std::vector<std::size_t> wm(reports.size(), 0);
  for (std::size_t k = 0; k < reports.size(); ++k) {
    wm[k] = std::max<std::size_t>(wm[k], 8);
    for (std::size_t i = 0; i < n; ++i) wm[k] = std::max(wm[k], cells[i][3 + 2 * k].size());
  }

  const std::string conf = fixed(100.0 * (1.0 - first.alpha), 0) + "% CI";
  std::ostringstream out;
  out << pad("", wg) << "  " << pad("", we) << "  " << pad("effect", wf);
  for (std::size_t k = 0; k < reports.size(); ++k) {
    std::string name = reports[k].method;
    if (name == "mmm" && reports[k].df_mode != DfMode::Normal) name += std::string(".") + to_string(reports[k].df_mode);
    out << "  " << pad(name, wm[k] + 2 + 6);
  }
  out << '\n';
  out << pad("Group", wg) << "  " << pad("Endpoint", we) << "  " << pad(first.exponentiate ? "OR" : "effect", wf);
  for (std::size_t k = 0; k < reports.size(); ++k) out << "  " << pad(conf, wm[k]) << "  " << pad("p", 6);
  out << '\n';
  std::size_t total = wg + 2 + we + 2 + wf;
  for (auto w : wm) total += 2 + w + 2 + 6;
  out << std::string(total, '-') << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out << pad(cells[i][0], wg) << "  " << pad(cells[i][1], we) << "  " << pad(cells[i][2], wf, true);
    for (std::size_t k = 0; k < reports.size(); ++k)
      out << "  " << pad(cells[i][3 + 2 * k], wm[k]) << "  " << pad(cells[i][4 + 2 * k], 6, true);
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// SVG forest plot
// ---------------------------------------------------------------------------

namespace {

std::string escape(const std::string& s) {
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

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string forest_plot_svg(const InferenceReport& report, const std::string& title) {
  const bool logscale = report.exponentiate;
  const double null_value = 0.0;  // on the effect (log) scale
  const auto& hs = report.hypotheses;

  double lo = null_value, hi = null_value;
  for (const auto& h : hs) {
    for (double v : {h.estimate, h.lower, h.upper})
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  }
  const double span = std::max(hi - lo, 1e-6);
  lo -= 0.08 * span;
  hi += 0.08 * span;

  const double width = 760, label_w = 230, right_pad = 40, top = 50, row_h = 30;
  const double height = top + row_h * static_cast<double>(hs.size()) + 60;
  const double x0 = label_w, x1 = width - right_pad;
  auto sx = [&](double v) {
    if (v == std::numeric_limits<double>::infinity()) return x1;
    if (v == -std::numeric_limits<double>::infinity()) return x0;
    return x0 + (v - lo) / (hi - lo) * (x1 - x0);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  std::string heading = title;
  if (heading.empty()) {
    heading = report.alternative == Alternative::TwoSided ? "Simultaneous " : "One-sided simultaneous ";
    heading += fixed(100.0 * (1.0 - report.alpha), 0) + "% confidence intervals (" + report.method + ")";
  }
  svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << escape(heading)
      << "</text>\n";

  const double axis_y = top + row_h * static_cast<double>(hs.size()) + 10;
  svg << "<line class=\"null\" x1=\"" << num(sx(null_value)) << "\" y1=\"" << top - 10 << "\" x2=\""
      << num(sx(null_value)) << "\" y2=\"" << axis_y << "\" stroke=\"#999\" stroke-dasharray=\"4,3\"/>\n";
  svg << "<line class=\"axis\" x1=\"" << x0 << "\" y1=\"" << axis_y << "\" x2=\"" << x1 << "\" y2=\"" << axis_y
      << "\" stroke=\"black\"/>\n";

  // ticks at powers of two on the OR scale, or at ~6 even steps otherwise
  std::vector<double> ticks;
  if (logscale) {
    for (int k = -10; k <= 10; ++k) {
      const double v = k * std::log(2.0);
      if (v >= lo && v <= hi) ticks.push_back(v);
    }
  } else {
    const double raw = (hi - lo) / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double step = raw / mag < 2 ? 2 * mag : raw / mag < 5 ? 5 * mag : 10 * mag;
    for (double v = std::ceil(lo / step) * step; v <= hi; v += step) ticks.push_back(v);
  }
  for (double t : ticks) {
    const double label = logscale ? std::exp(t) : t;
    char buf[32];
    std::snprintf(buf, sizeof buf, logscale ? "%g" : "%.3g", label);
    svg << "<line class=\"tick\" x1=\"" << num(sx(t)) << "\" y1=\"" << axis_y << "\" x2=\"" << num(sx(t))
        << "\" y2=\"" << axis_y + 5 << "\" stroke=\"black\"/>";
    svg << "<text x=\"" << num(sx(t)) << "\" y=\"" << axis_y + 18 << "\" text-anchor=\"middle\">" << buf
        << "</text>\n";
  }
  svg << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << axis_y + 40 << "\" text-anchor=\"middle\">"
      << (logscale ? "Odds ratio (log scale)" : "Effect") << "</text>\n";

  for (std::size_t i = 0; i < hs.size(); ++i) {
    const auto& h = hs[i];
    const double y = top + row_h * (static_cast<double>(i) + 0.5);
    std::string name = h.group.empty() ? h.label : h.group + " / " + (h.endpoint.empty() ? h.label : h.endpoint);
    svg << "<g class=\"hypothesis\">";
    svg << "<text x=\"10\" y=\"" << num(y + 4) << "\">" << escape(name) << "</text>";
    svg << "<line x1=\"" << num(sx(h.lower)) << "\" y1=\"" << num(y) << "\" x2=\"" << num(sx(h.upper))
        << "\" y2=\"" << num(y) << "\" stroke=\"" << (h.rejected ? "#1f5fa8" : "#555") << "\" stroke-width=\"2\"/>";
    for (double bound : {h.lower, h.upper}) {
      const double bx = sx(bound);
      if (std::isinf(bound)) {
        const double dir = bound > 0 ? 1.0 : -1.0;
        svg << "<polygon points=\"" << num(bx) << ',' << num(y) << ' ' << num(bx - dir * 7) << ','
            << num(y - 4) << ' ' << num(bx - dir * 7) << ',' << num(y + 4) << "\" fill=\"#555\"/>";
      } else {
        svg << "<line x1=\"" << num(bx) << "\" y1=\"" << num(y - 5) << "\" x2=\"" << num(bx) << "\" y2=\""
            << num(y + 5) << "\" stroke=\"#555\"/>";
      }
    }
    svg << "<circle cx=\"" << num(sx(h.estimate)) << "\" cy=\"" << num(y) << "\" r=\"4\" fill=\"black\"/>";
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace mmsi
