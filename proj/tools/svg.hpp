#pragma once

#include <string>
#include <vector>

namespace pmlab {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartLabels {
  std::string title;
  std::string x_axis;
  std::string y_axis;
};

std::string line_chart_svg(const std::vector<Series>& series, const ChartLabels& labels);

// Two overlaid count histograms on shared bin edges.
std::string histogram_svg(const std::vector<double>& edges,
                          const std::vector<double>& first, const std::string& first_label,
                          const std::vector<double>& second, const std::string& second_label,
                          const ChartLabels& labels);

}  // namespace pmlab
