#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bhcli {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;  // render y on a log10 axis (non-positive values dropped)
  int width = 760;
  int height = 460;
};

// Self-contained SVG line chart.  Output depends only on the inputs, so
// identical runs produce identical bytes.
std::string line_plot_svg(const std::vector<Series>& series,
                          const PlotOptions& opts);

// Two diverging-color heatmap panels side by side, sharing one color scale.
// Matrices larger than max_side per side are block-averaged down first.
std::string heatmap_pair_svg(const Eigen::MatrixXd& left,
                             const std::string& left_title,
                             const Eigen::MatrixXd& right,
                             const std::string& right_title,
                             int max_side = 128);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace bhcli
