#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>

#include "ihfood/errors.hpp"
#include "ihfood/harness.hpp"

namespace ihfood {

using nlohmann::json;

ReportFormat report_format_from_string(std::string_view name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  if (name == "markdown" || name == "md") return ReportFormat::markdown;
  if (name == "svg") return ReportFormat::svg;
  throw PreconditionError("unknown report format '" + std::string(name) + "'");
}

namespace {

struct Matrix {
  std::vector<std::string> rows;     // row labels in first-seen order
  std::vector<std::string> sets;     // ood_set name per row (for groups)
  std::vector<std::string> methods;  // columns in first-seen order
  std::map<std::pair<std::size_t, std::size_t>, const ChallengeResult*> cells;
};

Matrix build(const std::vector<ChallengeResult>& results) {
  Matrix mx;
  std::map<std::string, std::size_t> row_index, method_index;
  const bool many_challenges = [&] {
    for (const auto& r : results) {
      if (r.challenge != results.front().challenge) return true;
    }
    return false;
  }();
  for (const auto& r : results) {
    const std::string label = many_challenges ? r.challenge + ": " + r.label() : r.label();
    auto [rit, new_row] = row_index.emplace(label, mx.rows.size());
    if (new_row) {
      mx.rows.push_back(label);
      mx.sets.push_back(r.ood_set);
    }
    auto [mit, new_method] = method_index.emplace(r.method, mx.methods.size());
    if (new_method) mx.methods.push_back(r.method);
    mx.cells[{rit->second, mit->second}] = &r;
  }
  return mx;
}

std::optional<double> cell(const Matrix& mx, std::size_t row, std::size_t method, bool auroc) {
  const auto it = mx.cells.find({row, method});
  if (it == mx.cells.end()) return std::nullopt;
  return auroc ? it->second->metric.auroc : it->second->metric.fpr_at_tpr95;
}

struct MeanRow {
  std::string label;
  std::vector<std::optional<double>> values;  // per method
};

// Mean over all rows, then one per declared group, per metric.
std::vector<MeanRow> means(const Matrix& mx, bool auroc,
                           const std::map<std::string, std::vector<std::string>>& groups) {
  auto mean_over = [&](const std::string& label, auto&& include) {
    MeanRow row{label, {}};
    for (std::size_t m = 0; m < mx.methods.size(); ++m) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t r = 0; r < mx.rows.size(); ++r) {
        if (!include(r)) continue;
        if (const auto v = cell(mx, r, m, auroc)) {
          sum += *v;
          ++n;
        }
      }
      row.values.push_back(n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt);
    }
    return row;
  };
  std::vector<MeanRow> out;
  out.push_back(mean_over("average", [](std::size_t) { return true; }));
  for (const auto& [group, members] : groups) {
    out.push_back(mean_over(group + " average", [&](std::size_t r) {
      return std::find(members.begin(), members.end(), mx.sets[r]) != members.end() ||
             std::find(members.begin(), members.end(), mx.rows[r]) != members.end();
    }));
  }
  return out;
}

std::string fixed(double x, int digits = 3) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
  return buf;
}

std::string markdown_table(const Matrix& mx, bool auroc,
                           const std::map<std::string, std::vector<std::string>>& groups) {
  std::ostringstream out;
  out << "| " << (auroc ? "AUROC" : "FPR@TPR95");
  for (const auto& m : mx.methods) out << " | " << m;
  out << " |\n|---";
  for (std::size_t i = 0; i < mx.methods.size(); ++i) out << "|---:";
  out << "|\n";
  auto emit = [&](const std::string& label, const std::vector<std::optional<double>>& vals) {
    std::optional<double> best;
    for (const auto& v : vals) {
      if (v && (!best || (auroc ? *v > *best : *v < *best))) best = v;
    }
    out << "| " << label;
    for (const auto& v : vals) {
      out << " | ";
      if (!v) {
        out << "-";
      } else if (*v == *best) {
        out << "**" << fixed(*v) << "**";
      } else {
        out << fixed(*v);
      }
    }
    out << " |\n";
  };
  for (std::size_t r = 0; r < mx.rows.size(); ++r) {
    std::vector<std::optional<double>> vals;
    for (std::size_t m = 0; m < mx.methods.size(); ++m) vals.push_back(cell(mx, r, m, auroc));
    emit(mx.rows[r], vals);
  }
  for (const auto& row : means(mx, auroc, groups)) emit(row.label, row.values);
  return out.str();
}

std::string csv_report(const std::vector<ChallengeResult>& results, const Matrix& mx,
                       const std::map<std::string, std::vector<std::string>>& groups) {
  std::ostringstream out;
  out << "row_type,challenge,ood_set,severity,method,fpr_at_tpr95,auroc,threshold,n_id,n_ood\n";
  for (const auto& r : results) {
    out << "result," << r.challenge << ',' << r.ood_set << ','
        << (r.severity ? std::to_string(*r.severity) : std::string()) << ',' << r.method << ','
        << format_double(r.metric.fpr_at_tpr95) << ',' << format_double(r.metric.auroc) << ','
        << format_double(r.metric.threshold) << ',' << r.metric.n_id << ',' << r.metric.n_ood
        << '\n';
  }
  const auto fpr = means(mx, false, groups);
  const auto auc = means(mx, true, groups);
  for (std::size_t g = 0; g < fpr.size(); ++g) {
    for (std::size_t m = 0; m < mx.methods.size(); ++m) {
      if (!fpr[g].values[m]) continue;
      out << "mean,," << fpr[g].label << ",," << mx.methods[m] << ','
          << format_double(*fpr[g].values[m]) << ',' << format_double(*auc[g].values[m])
          << ",,,\n";
    }
  }
  return out.str();
}

json json_report(const Matrix& mx, const std::map<std::string, std::vector<std::string>>& groups) {
  json j;
  j["methods"] = mx.methods;
  j["rows"] = json::array();
  for (std::size_t r = 0; r < mx.rows.size(); ++r) {
    json row = {{"row", mx.rows[r]}, {"ood_set", mx.sets[r]}, {"cells", json::object()}};
    for (std::size_t m = 0; m < mx.methods.size(); ++m) {
      const auto it = mx.cells.find({r, m});
      if (it == mx.cells.end()) continue;
      row["cells"][mx.methods[m]] = to_json(it->second->metric);
    }
    j["rows"].push_back(row);
  }
  const auto fpr = means(mx, false, groups);
  const auto auc = means(mx, true, groups);
  j["means"] = json::object();
  for (std::size_t g = 0; g < fpr.size(); ++g) {
    json entry = json::object();
    for (std::size_t m = 0; m < mx.methods.size(); ++m) {
      if (!fpr[g].values[m]) continue;
      entry[mx.methods[m]] = {{"fpr_at_tpr95", *fpr[g].values[m]},
                              {"auroc", *auc[g].values[m]}};
    }
    j["means"][fpr[g].label] = entry;
  }
  return j;
}

// FPR against severity, one polyline per (method, ood_set) with severities.
std::string svg_report(const std::vector<ChallengeResult>& results) {
  std::map<std::string, std::vector<std::pair<int, double>>> series;
  for (const auto& r : results) {
    if (r.severity) series[r.method + " / " + r.ood_set].emplace_back(*r.severity, r.metric.fpr_at_tpr95);
  }
  const double w = 640, h = 400, left = 60, right = 220, top = 20, bottom = 50;
  const double pw = w - left - right, ph = h - top - bottom;
  auto px = [&](double sev) { return left + (sev - 1.0) / 4.0 * pw; };
  auto py = [&](double fpr) { return top + (1.0 - fpr) * ph; };
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\""
      << top + ph << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << top + ph << "\" stroke=\"black\"/>\n";
  for (int s = 1; s <= 5; ++s) {
    out << "<text x=\"" << px(s) << "\" y=\"" << top + ph + 15 << "\" text-anchor=\"middle\">" << s
        << "</text>\n";
  }
  for (int t = 0; t <= 4; ++t) {
    const double v = t / 4.0;
    out << "<text x=\"" << left - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">"
        << fixed(v, 2) << "</text>\n";
  }
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 10
      << "\" text-anchor=\"middle\">severity</text>\n";
  out << "<text x=\"15\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 15 " << top + ph / 2
      << ")\" text-anchor=\"middle\">FPR@TPR95</text>\n";
  std::size_t idx = 0;
  for (auto& [name, pts] : series) {
    std::sort(pts.begin(), pts.end());
    const char* color = colors[idx % 8];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [sev, fpr] : pts) out << px(sev) << ',' << py(fpr) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << left + pw + 10 << "\" y=\"" << top + 14 * (idx + 1) << "\" fill=\""
        << color << "\">" << name << "</text>\n";
    ++idx;
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace

std::string report(const std::vector<ChallengeResult>& results, ReportFormat format,
                   const std::map<std::string, std::vector<std::string>>& groups) {
  if (results.empty()) throw PreconditionError("report needs at least one result");
  const Matrix mx = build(results);
  switch (format) {
    case ReportFormat::csv: return csv_report(results, mx, groups);
    case ReportFormat::json: return json_report(mx, groups).dump(2) + "\n";
    case ReportFormat::markdown:
      return markdown_table(mx, false, groups) + "\n" + markdown_table(mx, true, groups);
    case ReportFormat::svg: return svg_report(results);
  }
  return {};
}

}  // namespace ihfood
