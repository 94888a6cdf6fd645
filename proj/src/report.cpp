#include "tland/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "tland/text.hpp"

namespace tland {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

constexpr double kWidth = 480.0;
constexpr double kHeight = 320.0;
constexpr double kLeft = 50.0;
constexpr double kRight = 20.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 40.0;

const char* kPalette[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

void svg_frame(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth) << "\" height=\"" << fmt(kHeight)
      << "\" viewBox=\"0 0 " << fmt(kWidth) << ' ' << fmt(kHeight) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"13\">" << xml_escape(title) << "</text>\n";
  const double y0 = kHeight - kBottom;
  out << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(y0) << "\" x2=\"" << fmt(kWidth - kRight) << "\" y2=\""
      << fmt(y0) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(kLeft) << "\" y2=\"" << fmt(y0)
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = i / 4.0;
    const double y = y0 - v * (y0 - kTop);
    out << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << fmt(v) << "</text>\n";
  }
}

double ymap(double v) {
  const double y0 = kHeight - kBottom;
  return y0 - std::clamp(v, 0.0, 1.0) * (y0 - kTop);
}

double xmap(double v) { return kLeft + std::clamp(v, 0.0, 1.0) * (kWidth - kLeft - kRight); }

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted[0];
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          cur.push_back(c);
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        cells.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    cells.push_back(cur);
    rows.push_back(std::move(cells));
  }
  return rows;
}

double cell_double(const std::string& s) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw ParseError("bad number '" + s + "' in report CSV");
  }
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

BoxStats box_stats(std::span<const double> values) {
  BoxStats s;
  s.count = values.size();
  if (values.empty()) return s;
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile(v, 0.25);
  s.median = quantile(v, 0.5);
  s.q3 = quantile(v, 0.75);
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  return s;
}

std::string boxplot_svg(const std::string& title, std::span<const NamedSeries> series) {
  std::ostringstream out;
  svg_frame(out, title);
  const double span = (kWidth - kLeft - kRight) / static_cast<double>(std::max<std::size_t>(series.size(), 1));
  for (std::size_t i = 0; i < series.size(); ++i) {
    const BoxStats s = box_stats(series[i].values);
    const double cx = kLeft + span * (static_cast<double>(i) + 0.5);
    const double w = std::min(40.0, span * 0.5);
    const char* color = kPalette[i % std::size(kPalette)];
    if (s.count > 0) {
      out << "<line x1=\"" << fmt(cx) << "\" y1=\"" << fmt(ymap(s.min)) << "\" x2=\"" << fmt(cx) << "\" y2=\""
          << fmt(ymap(s.max)) << "\" stroke=\"black\"/>\n";
      out << "<rect x=\"" << fmt(cx - w / 2) << "\" y=\"" << fmt(ymap(s.q3)) << "\" width=\"" << fmt(w)
          << "\" height=\"" << fmt(ymap(s.q1) - ymap(s.q3)) << "\" fill=\"" << color
          << "\" fill-opacity=\"0.5\" stroke=\"black\"/>\n";
      out << "<line x1=\"" << fmt(cx - w / 2) << "\" y1=\"" << fmt(ymap(s.median)) << "\" x2=\"" << fmt(cx + w / 2)
          << "\" y2=\"" << fmt(ymap(s.median)) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    }
    out << "<text x=\"" << fmt(cx) << "\" y=\"" << fmt(kHeight - kBottom + 16)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << xml_escape(series[i].name)
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string pr_curve_svg(const std::string& title, std::span<const NamedCurve> curves) {
  std::ostringstream out;
  svg_frame(out, title);
  out << "<text x=\"" << fmt((kLeft + kWidth - kRight) / 2) << "\" y=\"" << fmt(kHeight - 8)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">recall</text>\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    if (!curves[i].points.empty()) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
      for (const auto& p : curves[i].points) out << fmt(xmap(p.recall)) << ',' << fmt(ymap(p.precision)) << ' ';
      out << "\"/>\n";
    }
    out << "<text x=\"" << fmt(kWidth - kRight - 4) << "\" y=\"" << fmt(kTop + 12 + 12.0 * static_cast<double>(i))
        << "\" text-anchor=\"end\" fill=\"" << color << "\" font-family=\"sans-serif\" font-size=\"10\">"
        << xml_escape(curves[i].name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string pr_curves_csv(const MetricReport& report) {
  std::ostringstream out;
  out << "category,tau,rank,recall,precision\r\n";
  for (Category c : kAllCategories) {
    const auto& curves = report.pr_curves[index_of(c)];
    for (std::size_t k = 0; k < curves.size(); ++k) {
      for (std::size_t r = 0; r < curves[k].points.size(); ++r) {
        const auto& p = curves[k].points[r];
        out << to_string(c) << ',' << format_double(report.taus[k]) << ',' << (r + 1) << ','
            << format_double(p.recall) << ',' << format_double(p.precision) << "\r\n";
      }
    }
  }
  return out.str();
}

std::string boxplot_csv(const MetricReport& report) {
  std::ostringstream out;
  out << "category,metric,count,min,q1,median,q3,max,mean\r\n";
  for (Category c : kAllCategories) {
    for (int m = 0; m < 2; ++m) {
      std::vector<double> values;
      for (const auto& scan : report.scans) {
        const auto& cs = scan.categories[index_of(c)];
        values.push_back(m == 0 ? cs.ap : cs.ar);
      }
      const BoxStats s = box_stats(values);
      out << to_string(c) << ',' << (m == 0 ? "AP" : "AR") << ',' << s.count << ',' << format_double(s.min) << ','
          << format_double(s.q1) << ',' << format_double(s.median) << ',' << format_double(s.q3) << ','
          << format_double(s.max) << ',' << format_double(s.mean) << "\r\n";
    }
  }
  return out.str();
}

void write_eval_data(const MetricReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "per_scan.csv", report_csv(report));
  write_text(out_dir / "summary.json", report_summary_json(report).dump(2) + "\n");
  write_text(out_dir / "pr_curves.csv", pr_curves_csv(report));
  write_text(out_dir / "boxplot.csv", boxplot_csv(report));
}

std::vector<std::filesystem::path> render_report(const std::filesystem::path& eval_dir,
                                                 const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;

  // category -> metric -> per-scan values
  std::map<std::string, std::map<std::string, std::vector<double>>> per_scan;
  const auto rows = read_csv(eval_dir / "per_scan.csv");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 4) throw ParseError("per_scan.csv: expected 4 columns");
    const std::string& metric = rows[i][2];
    if (metric != "AP" && metric != "AR") continue;
    per_scan[rows[i][1]][metric].push_back(cell_double(rows[i][3]));
  }

  // category -> tau -> curve
  std::map<std::string, std::map<double, std::vector<PRPoint>>> curves;
  const auto pr_rows = read_csv(eval_dir / "pr_curves.csv");
  for (std::size_t i = 1; i < pr_rows.size(); ++i) {
    if (pr_rows[i].size() != 5) throw ParseError("pr_curves.csv: expected 5 columns");
    curves[pr_rows[i][0]][cell_double(pr_rows[i][1])].push_back(
        {cell_double(pr_rows[i][3]), cell_double(pr_rows[i][4])});
  }

  for (Category c : kAllCategories) {
    const std::string name(to_string(c));
    const auto& metrics = per_scan[name];
    const std::vector<double> empty;
    const auto ap_it = metrics.find("AP");
    const auto ar_it = metrics.find("AR");
    const std::vector<NamedSeries> series = {{"AP", ap_it == metrics.end() ? empty : ap_it->second},
                                             {"AR", ar_it == metrics.end() ? empty : ar_it->second}};
    const auto box_path = out_dir / ("boxplot_" + name + ".svg");
    write_text(box_path, boxplot_svg(name + ": per-scan AP / AR", series));
    written.push_back(box_path);

    // A handful of thresholds keeps the plot readable.
    std::vector<NamedCurve> named;
    const auto& by_tau = curves[name];
    for (double want : {0.5, 1.0, 2.0, 3.0}) {
      auto best = by_tau.end();
      for (auto it = by_tau.begin(); it != by_tau.end(); ++it) {
        if (best == by_tau.end() || std::abs(it->first - want) < std::abs(best->first - want)) best = it;
      }
      if (best == by_tau.end()) continue;
      const std::string label = "tau=" + fmt(best->first) + " mm";
      if (std::any_of(named.begin(), named.end(), [&](const NamedCurve& nc) { return nc.name == label; })) continue;
      named.push_back({label, best->second});
    }
    const auto pr_path = out_dir / ("pr_" + name + ".svg");
    write_text(pr_path, pr_curve_svg(name + ": precision-recall", named));
    written.push_back(pr_path);
  }
  // The summary table copies summary.json so its values match the library
  // output exactly.
  nlohmann::json summary;
  try {
    summary = nlohmann::json::parse(read_text_file(eval_dir / "summary.json"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("summary.json: ") + e.what());
  }
  std::ostringstream table;
  table << "category,mAP,mAR\r\n";
  try {
    for (Category c : kAllCategories) {
      const auto& node = summary.at("categories").at(std::string(to_string(c)));
      table << to_string(c) << ',' << format_double(node.at("mAP").get<double>()) << ','
            << format_double(node.at("mAR").get<double>()) << "\r\n";
    }
    table << "all," << format_double(summary.at("mAP").get<double>()) << ','
          << format_double(summary.at("mAR").get<double>()) << "\r\n";
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("summary.json: ") + e.what());
  }
  write_text(out_dir / "summary_table.csv", table.str());
  written.push_back(out_dir / "summary_table.csv");

  const auto box_rows = read_csv(eval_dir / "boxplot.csv");
  std::ostringstream box;
  for (const auto& row : box_rows) {
    for (std::size_t i = 0; i < row.size(); ++i) box << (i ? "," : "") << csv_escape(row[i]);
    box << "\r\n";
  }
  write_text(out_dir / "boxplot_table.csv", box.str());
  written.push_back(out_dir / "boxplot_table.csv");
  return written;
}

}  // namespace tland
