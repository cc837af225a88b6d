#include "wrates/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace wrates {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_loglog_svg(const std::string& title, const std::string& x_label,
                              const std::string& y_label,
                              const std::vector<SvgSeries>& series, int width, int height) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0)) continue;
      double lx = std::log10(s.x[i]);
      double ly = std::log10(s.y[i]);
      xmin = std::min(xmin, lx);
      xmax = std::max(xmax, lx);
      ymin = std::min(ymin, ly);
      ymax = std::max(ymax, ly);
      if (i < s.y_err.size() && s.y[i] + s.y_err[i] > 0.0)
        ymax = std::max(ymax, std::log10(s.y[i] + s.y_err[i]));
    }
  if (xmax < xmin) {
    xmin = ymin = 0.0;
    xmax = ymax = 1.0;
  }
  if (xmax - xmin < 1e-12) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  double padx = 0.04 * (xmax - xmin), pady = 0.06 * (ymax - ymin);
  xmin -= padx;
  xmax += padx;
  ymin -= pady;
  ymax += pady;

  const double ml = 72, mr = 150, mt = 40, mb = 52;
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto px = [&](double lx) { return ml + (lx - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double ly) { return mt + (ymax - ly) / (ymax - ymin) * ph; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\">" << escape(title) << "</text>\n";

  // decade ticks, subdivided when fewer than two decades fit
  auto ticks = [](double lo, double hi) {
    std::vector<double> t;
    double lo_i = std::ceil(lo), hi_i = std::floor(hi);
    if (hi_i - lo_i >= 1.0) {
      double step = std::max(1.0, std::floor((hi_i - lo_i) / 6.0));
      for (double v = lo_i; v <= hi_i + 1e-9; v += step) t.push_back(v);
    } else {
      double step = (hi - lo) / 4.0;
      for (int i = 0; i <= 4; ++i) t.push_back(lo + i * step);
    }
    return t;
  };
  for (double t : ticks(xmin, xmax)) {
    double x = px(t);
    out << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(mt) << "\" x2=\"" << fmt(x)
        << "\" y2=\"" << fmt(mt + ph) << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(mt + ph + 18)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt(std::pow(10.0, t)) << "</text>\n";
  }
  for (double t : ticks(ymin, ymax)) {
    double y = py(t);
    out << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(ml + pw)
        << "\" y2=\"" << fmt(y) << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << fmt(ml - 6) << "\" y=\"" << fmt(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt(std::pow(10.0, t)) << "</text>\n";
  }
  out << "<rect x=\"" << fmt(ml) << "\" y=\"" << fmt(mt) << "\" width=\"" << fmt(pw)
      << "\" height=\"" << fmt(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << fmt(ml + pw / 2) << "\" y=\"" << fmt((double)height - 10)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
      << escape(x_label) << "</text>\n";
  out << "<text x=\"18\" y=\"" << fmt(mt + ph / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
      << "transform=\"rotate(-90 18 " << fmt(mt + ph / 2) << ")\">" << escape(y_label)
      << "</text>\n";

  int legend_row = 0;
  for (const auto& s : series) {
    std::string pts;
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0)) continue;
      double x = px(std::log10(s.x[i])), y = py(std::log10(s.y[i]));
      if (s.draw_line) pts += fmt(x) + "," + fmt(y) + " ";
      if (i < s.y_err.size() && s.y_err[i] > 0.0) {
        double hi = py(std::log10(s.y[i] + s.y_err[i]));
        double lo_v = s.y[i] - s.y_err[i];
        double lo = lo_v > 0.0 ? py(std::log10(lo_v)) : mt + ph;
        out << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(hi) << "\" x2=\"" << fmt(x)
            << "\" y2=\"" << fmt(lo) << "\" stroke=\"" << s.color << "\"/>\n";
      }
      if (s.draw_points)
        out << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"3\" fill=\""
            << s.color << "\"/>\n";
    }
    if (s.draw_line && !pts.empty())
      out << "<polyline points=\"" << pts << "\" fill=\"none\" stroke=\"" << s.color
          << "\" stroke-width=\"1.5\"/>\n";
    if (!s.label.empty()) {
      double ly = mt + 14 + 18 * legend_row++;
      out << "<line x1=\"" << fmt(ml + pw + 10) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\""
          << fmt(ml + pw + 30) << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << s.color
          << "\" stroke-width=\"3\"/>\n";
      out << "<text x=\"" << fmt(ml + pw + 36) << "\" y=\"" << fmt(ly)
          << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(s.label)
          << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace wrates
