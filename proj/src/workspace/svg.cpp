#include "domaincraft/workspace/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string_view>

#include "domaincraft/error.hpp"

namespace domaincraft {
namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 60;
constexpr std::string_view kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                         "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string escape(std::string_view text) {
  std::string out;
  for (const char c : text) {
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

struct Range {
  double lo, hi;
};

Range padded(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = (hi - lo) * 0.05;
  return {lo - pad, hi + pad};
}

std::string text(double x, double y, std::string_view body, std::string_view extra = {}) {
  std::string s = "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\"";
  if (!extra.empty()) s += " " + std::string(extra);
  return s + ">" + escape(body) + "</text>\n";
}

}  // namespace

std::string render_scatter(const ScatterPlot& plot) {
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const auto& s : plot.series) {
    if (s.x.size() != s.y.size()) throw Error(ErrorKind::kValidation, "series length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  }
  if (!std::isfinite(xlo)) xlo = xhi = ylo = yhi = 0.0;
  const Range xr = padded(xlo, xhi), yr = padded(ylo, yhi);
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) +
                    "\" height=\"" + num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += text(kWidth / 2 - kRight / 2, 22, plot.title, "text-anchor=\"middle\" font-size=\"14\"");
  out += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) +
         "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = xr.lo + (xr.hi - xr.lo) * t / 4, yv = yr.lo + (yr.hi - yr.lo) * t / 4;
    out += text(px(xv), kTop + ph + 16, num(xv), "text-anchor=\"middle\"");
    out += text(kLeft - 6, py(yv) + 4, num(yv), "text-anchor=\"end\"");
  }
  out += text(kLeft + pw / 2, kHeight - 18, plot.x_label, "text-anchor=\"middle\"");
  out += text(18, kTop + ph / 2, plot.y_label,
              "text-anchor=\"middle\" transform=\"rotate(-90 18 " + num(kTop + ph / 2) + ")\"");

  for (std::size_t si = 0; si < plot.series.size(); ++si) {
    const auto& s = plot.series[si];
    const std::string colour(kPalette[si % std::size(kPalette)]);
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      out += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) +
             "\" r=\"4\" fill=\"" + colour + "\"/>\n";
    }
    if (s.fit_line && s.x.size() >= 2) {
      const double n = static_cast<double>(s.x.size());
      double mx = 0, my = 0;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        mx += s.x[i];
        my += s.y[i];
      }
      mx /= n;
      my /= n;
      double sxx = 0, sxy = 0;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        sxx += (s.x[i] - mx) * (s.x[i] - mx);
        sxy += (s.x[i] - mx) * (s.y[i] - my);
      }
      if (sxx > 0) {
        const double slope = sxy / sxx, icpt = my - slope * mx;
        const double x0 = *std::min_element(s.x.begin(), s.x.end());
        const double x1 = *std::max_element(s.x.begin(), s.x.end());
        out += "<line x1=\"" + num(px(x0)) + "\" y1=\"" + num(py(icpt + slope * x0)) +
               "\" x2=\"" + num(px(x1)) + "\" y2=\"" + num(py(icpt + slope * x1)) +
               "\" stroke=\"" + colour + "\" stroke-dasharray=\"6 3\"/>\n";
      }
    }
    const double ly = kTop + 10 + 20 * static_cast<double>(si);
    out += "<circle cx=\"" + num(kWidth - kRight + 20) + "\" cy=\"" + num(ly) +
           "\" r=\"4\" fill=\"" + colour + "\"/>\n";
    out += text(kWidth - kRight + 30, ly + 4, s.label);
  }
  out += "</svg>\n";
  return out;
}

std::string render_heatmap(const std::string& title, const std::vector<std::string>& labels,
                           const std::vector<std::vector<double>>& values) {
  const std::size_t n = labels.size();
  if (values.size() != n) throw Error(ErrorKind::kValidation, "heatmap shape mismatch");
  const double cell = 60, left = 120, top = 50;
  const double w = left + cell * static_cast<double>(n) + 20;
  const double h = top + cell * static_cast<double>(n) + 20;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) +
                    "\" height=\"" + num(h) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += text(w / 2, 20, title, "text-anchor=\"middle\" font-size=\"14\"");
  for (std::size_t i = 0; i < n; ++i) {
    if (values[i].size() != n) throw Error(ErrorKind::kValidation, "heatmap shape mismatch");
    const double c = left + cell * (static_cast<double>(i) + 0.5);
    out += text(c, top - 6, labels[i], "text-anchor=\"middle\"");
    out += text(left - 6, top + cell * (static_cast<double>(i) + 0.5) + 4, labels[i],
                "text-anchor=\"end\"");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = std::clamp(values[i][j], 0.0, 1.0);
      const int shade = static_cast<int>(std::lround(255 * (1 - v)));
      char fill[16];
      std::snprintf(fill, sizeof fill, "#%02x%02xff", shade, shade);
      const double x = left + cell * static_cast<double>(j), y = top + cell * static_cast<double>(i);
      out += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cell) +
             "\" height=\"" + num(cell) + "\" fill=\"" + fill + "\" stroke=\"white\"/>\n";
      out += text(x + cell / 2, y + cell / 2 + 4, num(values[i][j]),
                  std::string("text-anchor=\"middle\" fill=\"") + (v > 0.5 ? "white" : "black") + "\"");
    }
  }
  out += "</svg>\n";
  return out;
}

}  // namespace domaincraft
