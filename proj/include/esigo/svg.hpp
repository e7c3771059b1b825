#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "esigo/errors.hpp"

namespace esigo {

/// Minimal static SVG polyline plot: multiple named series, linear or
/// log10-scaled y axis, min/max/tick labels.  No external dependencies.
class LinePlot {
 public:
  LinePlot(std::string title, std::string xlabel, std::string ylabel)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

  void set_log_y(bool on) { log_y_ = on; }

  void add_series(std::string name, std::vector<double> x, std::vector<double> y) {
    if (x.size() != y.size() || x.empty())
      throw DomainError("LinePlot: series must be non-empty and of equal length");
    series_.push_back({std::move(name), std::move(x), std::move(y)});
  }

  void write(std::ostream& os) const {
    constexpr double W = 640, H = 420, ml = 72, mr = 20, mt = 40, mb = 48;
    const double pw = W - ml - mr, ph = H - mt - mb;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const Series& s : series_)
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        const double yv = transform_y(s.y[i]);
        if (!std::isfinite(s.x[i]) || !std::isfinite(yv)) continue;
        xmin = std::min(xmin, s.x[i]);
        xmax = std::max(xmax, s.x[i]);
        ymin = std::min(ymin, yv);
        ymax = std::max(ymax, yv);
      }
    if (!(xmin <= xmax) || !(ymin <= ymax))
      throw DomainError("LinePlot: no finite data to plot");
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\" "
          "font-family=\"sans-serif\">"
       << escape(title_) << "</text>\n";

    // Axes box and tick labels.
    os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double fx = xmin + (xmax - xmin) * i / 4.0;
      const double fy = ymin + (ymax - ymin) * i / 4.0;
      os << "<line x1=\"" << px(fx) << "\" y1=\"" << mt + ph << "\" x2=\"" << px(fx) << "\" y2=\""
         << mt + ph + 4 << "\" stroke=\"#444\"/>\n"
         << "<text x=\"" << px(fx) << "\" y=\"" << mt + ph + 18
         << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
         << format_tick(fx, false) << "</text>\n"
         << "<line x1=\"" << ml - 4 << "\" y1=\"" << py(fy) << "\" x2=\"" << ml << "\" y2=\""
         << py(fy) << "\" stroke=\"#444\"/>\n"
         << "<text x=\"" << ml - 7 << "\" y=\"" << py(fy) + 4
         << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
         << format_tick(fy, log_y_) << "</text>\n";
    }
    os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 10
       << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">"
       << escape(xlabel_) << "</text>\n"
       << "<text x=\"16\" y=\"" << mt + ph / 2
       << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\" "
          "transform=\"rotate(-90 16 "
       << mt + ph / 2 << ")\">" << escape(ylabel_) << (log_y_ ? " (log scale)" : "")
       << "</text>\n";

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    for (std::size_t si = 0; si < series_.size(); ++si) {
      const Series& s = series_[si];
      const char* color = colors[si % 8];
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      bool first = true;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        const double yv = transform_y(s.y[i]);
        if (!std::isfinite(s.x[i]) || !std::isfinite(yv)) continue;
        if (!first) os << ' ';
        os << px(s.x[i]) << ',' << py(yv);
        first = false;
      }
      os << "\"/>\n";
      os << "<text x=\"" << W - mr - 6 << "\" y=\"" << mt + 16 + 15 * si
         << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\" fill=\"" << color
         << "\">" << escape(s.name) << "</text>\n";
    }
    os << "</svg>\n";
  }

  void write(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open for writing: " + path);
    write(os);
  }

 private:
  struct Series {
    std::string name;
    std::vector<double> x, y;
  };

  double transform_y(double y) const {
    if (!log_y_) return y;
    return y > 0.0 ? std::log10(y) : std::numeric_limits<double>::quiet_NaN();
  }

  static std::string format_tick(double v, bool as_pow10) {
    char buf[40];
    if (as_pow10)
      std::snprintf(buf, sizeof(buf), "1e%.3g", v);
    else
      std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
  }

  static std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '&')
        out += "&amp;";
      else if (c == '<')
        out += "&lt;";
      else if (c == '>')
        out += "&gt;";
      else
        out += c;
    }
    return out;
  }

  std::string title_, xlabel_, ylabel_;
  bool log_y_ = false;
  std::vector<Series> series_;
};

}  // namespace esigo
