#pragma once

#include <optional>
#include <string>
#include <vector>

namespace domaincraft {

struct ScatterSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool fit_line = true;  // least-squares line, drawn when >= 2 distinct x
};

struct ScatterPlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<ScatterSeries> series;
};

// Byte-stable output: fixed canvas, fixed palette, two-decimal coordinates.
std::string render_scatter(const ScatterPlot& plot);

// Square matrix with row/column labels; cells shaded by value in [0, 1].
std::string render_heatmap(const std::string& title, const std::vector<std::string>& labels,
                           const std::vector<std::vector<double>>& values);

}  // namespace domaincraft
