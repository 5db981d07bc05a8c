#include "fxlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "fxlab/errors.hpp"

namespace fxlab {

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::string metrics_csv(const std::vector<MetricRow>& rows, const std::vector<double>& taus) {
  std::ostringstream out;
  out << "run_id,method,AS";
  for (double tau : taus) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", tau);
    out << ",A-ESR@" << buf;
  }
  out << '\n';
  for (const auto& r : rows) {
    if (r.metrics.a_esr.size() != taus.size()) throw ShapeError("tau count mismatch in report");
    out << r.run_id << ',' << r.method << ',' << format_real(r.metrics.as);
    for (double v : r.metrics.a_esr) out << ',' << format_real(v);
    out << '\n';
  }
  return out.str();
}

std::string cliques_csv(const std::vector<CliqueRow>& rows) {
  std::ostringstream out;
  out << "method,phi_star,size,centroid_index,truncated\n";
  for (const auto& r : rows) {
    out << r.method << ',' << format_real(r.phi_star) << ',' << r.size << ','
        << r.centroid_index << ',' << (r.truncated ? "true" : "false") << '\n';
  }
  return out.str();
}

namespace {

constexpr double kWidth = 480.0;
constexpr double kHeight = 400.0;
constexpr double kMargin = 50.0;

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kMargin + (x - x0) / (x1 - x0) * (kWidth - 2 * kMargin); }
  double py(double y) const {
    return kHeight - kMargin - (y - y0) / (y1 - y0) * (kHeight - 2 * kMargin);
  }
};

void widen(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
}

std::string escape(const std::string& s) {
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

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string svg_open(const std::string& title) {
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
    << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(title) << "</text>\n";
  return o.str();
}

std::string axes(const Frame& f, const std::string& xl, const std::string& yl) {
  std::ostringstream o;
  o << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kWidth - 2 * kMargin
    << "\" height=\"" << kHeight - 2 * kMargin << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    o << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << kHeight - kMargin + 15
      << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
    o << "<text x=\"" << kMargin - 5 << "\" y=\"" << num(f.py(yv) + 4)
      << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
  }
  o << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">"
    << escape(xl) << "</text>\n";
  o << "<text x=\"14\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
    << kHeight / 2 << ")\">" << escape(yl) << "</text>\n";
  return o.str();
}

}  // namespace

std::string scatter_svg(const std::string& title, const Matrix& targets,
                        const Matrix& samples, const Matrix& extracted) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  auto extend = [&](const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double x = m(i, 0);
      const double y = m.cols() > 1 ? m(i, 1) : 0.0;
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  };
  extend(targets);
  extend(samples);
  extend(extracted);
  if (!std::isfinite(x0)) x0 = x1 = y0 = y1 = 0.0;
  widen(x0, x1);
  widen(y0, y1);
  const Frame f{x0, x1, y0, y1};

  std::ostringstream o;
  o << svg_open(title) << axes(f, "x[0]", "x[1]");
  auto coords = [&](const Matrix& m, Eigen::Index i) {
    return std::pair{f.px(m(i, 0)), f.py(m.cols() > 1 ? m(i, 1) : 0.0)};
  };
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    auto [px, py] = coords(samples, i);
    o << "<circle cx=\"" << num(px) << "\" cy=\"" << num(py)
      << "\" r=\"2\" fill=\"#999999\" fill-opacity=\"0.6\"/>\n";
  }
  for (Eigen::Index i = 0; i < extracted.rows(); ++i) {
    auto [px, py] = coords(extracted, i);
    o << "<circle cx=\"" << num(px) << "\" cy=\"" << num(py)
      << "\" r=\"5\" fill=\"none\" stroke=\"#1f4fd1\" stroke-width=\"2\"/>\n";
  }
  for (Eigen::Index i = 0; i < targets.rows(); ++i) {
    auto [px, py] = coords(targets, i);
    o << "<path d=\"M" << num(px - 5) << ' ' << num(py - 5) << " L" << num(px + 5) << ' '
      << num(py + 5) << " M" << num(px - 5) << ' ' << num(py + 5) << " L" << num(px + 5) << ' '
      << num(py - 5) << "\" stroke=\"#d11f1f\" stroke-width=\"2\"/>\n";
  }
  o << "<text x=\"" << kWidth - kMargin << "\" y=\"" << kMargin - 6
    << "\" text-anchor=\"end\">grey: samples, blue: extracted, red: targets</text>\n";
  o << "</svg>\n";
  return o.str();
}

std::string line_plot_svg(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<Series>& series) {
  static const char* palette[] = {"#1f4fd1", "#d11f1f", "#2a9d3a", "#a03ab0", "#e08a00"};
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ShapeError("series x and y differ in length");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = x1 = y0 = y1 = 0.0;
  widen(x0, x1);
  widen(y0, y1);
  const Frame f{x0, x1, y0, y1};

  std::ostringstream o;
  o << svg_open(title) << axes(f, x_label, y_label);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = palette[k % 5];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      o << (i ? " " : "") << num(f.px(s.x[i])) << ',' << num(f.py(s.y[i]));
    }
    o << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      o << "<circle cx=\"" << num(f.px(s.x[i])) << "\" cy=\"" << num(f.py(s.y[i]))
        << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    o << "<text x=\"" << kMargin + 8 << "\" y=\"" << kMargin + 14 + 14 * static_cast<double>(k)
      << "\" fill=\"" << color << "\">" << escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace fxlab
