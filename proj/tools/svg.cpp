#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace bhcli {

namespace {

const char* kPalette[] = {"#1b6ca8", "#c0392b", "#27ae60",
                          "#8e44ad", "#e67e22", "#16a085"};
constexpr int kPaletteSize = 6;

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string px(double v) { return fmt(v, "%.2f"); }

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
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

// Largest {1,2,5}*10^k not exceeding `raw`, for tick spacing.
double nice_step(double raw) {
  if (!(raw > 0.0)) return 1.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  if (r >= 5.0) return 5.0 * mag;
  if (r >= 2.0) return 2.0 * mag;
  return mag;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void include(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool valid() const { return lo <= hi; }
  void degenerate_pad() {
    if (lo == hi) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

std::string text_el(double x, double y, const std::string& body,
                    const char* anchor = "start", int size = 12) {
  return "<text x=\"" + px(x) + "\" y=\"" + px(y) + "\" font-size=\"" +
         std::to_string(size) + "\" text-anchor=\"" + anchor + "\">" +
         xml_escape(body) + "</text>\n";
}

// Diverging blue-white-red map for t in [-1, 1], quantized so adjacent
// heatmap cells of near-equal value merge into one rect.
std::string diverging_color(double t) {
  t = std::clamp(t, -1.0, 1.0);
  t = std::round(t * 31.0) / 31.0;
  const int lo_r = 0x21, lo_g = 0x66, lo_b = 0xac;  // deep blue at -1
  const int mid_r = 0xf7, mid_g = 0xf7, mid_b = 0xf7;
  const int hi_r = 0xb2, hi_g = 0x18, hi_b = 0x2b;  // deep red at +1
  int r, g, b;
  if (t < 0.0) {
    const double s = t + 1.0;  // 0..1 from blue to white
    r = static_cast<int>(std::lround(lo_r + s * (mid_r - lo_r)));
    g = static_cast<int>(std::lround(lo_g + s * (mid_g - lo_g)));
    b = static_cast<int>(std::lround(lo_b + s * (mid_b - lo_b)));
  } else {
    r = static_cast<int>(std::lround(mid_r + t * (hi_r - mid_r)));
    g = static_cast<int>(std::lround(mid_g + t * (hi_g - mid_g)));
    b = static_cast<int>(std::lround(mid_b + t * (hi_b - mid_b)));
  }
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

Eigen::MatrixXd block_average(const Eigen::MatrixXd& m, int max_side) {
  const int rows = static_cast<int>(m.rows());
  const int cols = static_cast<int>(m.cols());
  if (rows <= max_side && cols <= max_side) return m;
  const int out_rows = std::min(rows, max_side);
  const int out_cols = std::min(cols, max_side);
  Eigen::MatrixXd out(out_rows, out_cols);
  for (int i = 0; i < out_rows; ++i) {
    const int r0 = static_cast<int>(static_cast<long>(i) * rows / out_rows);
    const int r1 = static_cast<int>(static_cast<long>(i + 1) * rows / out_rows);
    for (int j = 0; j < out_cols; ++j) {
      const int c0 = static_cast<int>(static_cast<long>(j) * cols / out_cols);
      const int c1 = static_cast<int>(static_cast<long>(j + 1) * cols / out_cols);
      out(i, j) = m.block(r0, c0, r1 - r0, c1 - c0).mean();
    }
  }
  return out;
}

void heatmap_panel(std::string& svg, const Eigen::MatrixXd& m,
                   const std::string& title, double scale, double x0,
                   double y0, double side_px) {
  svg += text_el(x0 + side_px / 2, y0 - 8, title, "middle", 13);
  const int rows = static_cast<int>(m.rows());
  const int cols = static_cast<int>(m.cols());
  const double cell_h = side_px / rows;
  const double cell_w = side_px / cols;
  for (int i = 0; i < rows; ++i) {
    int j = 0;
    while (j < cols) {
      const std::string color =
          diverging_color(scale > 0.0 ? m(i, j) / scale : 0.0);
      int run = 1;
      while (j + run < cols &&
             diverging_color(scale > 0.0 ? m(i, j + run) / scale : 0.0) ==
                 color)
        ++run;
      svg += "<rect x=\"" + px(x0 + j * cell_w) + "\" y=\"" +
             px(y0 + i * cell_h) + "\" width=\"" + px(run * cell_w + 0.1) +
             "\" height=\"" + px(cell_h + 0.1) + "\" fill=\"" + color +
             "\"/>\n";
      j += run;
    }
  }
  svg += "<rect x=\"" + px(x0) + "\" y=\"" + px(y0) + "\" width=\"" +
         px(side_px) + "\" height=\"" + px(side_px) +
         "\" fill=\"none\" stroke=\"#333\"/>\n";
}

}  // namespace

std::string line_plot_svg(const std::vector<Series>& series,
                          const PlotOptions& opts) {
  const double ml = 70, mr = 18, mt = 30, mb = 48;
  const double pw = opts.width - ml - mr;
  const double ph = opts.height - mt - mb;

  Range xr, yr;
  for (const Series& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      const double y = s.y[i];
      if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
      if (opts.log_y && !(y > 0.0)) continue;
      xr.include(s.x[i]);
      yr.include(opts.log_y ? std::log10(y) : y);
    }
  if (!xr.valid()) {
    xr = {0.0, 1.0};
    yr = {0.0, 1.0};
  }
  xr.degenerate_pad();
  yr.degenerate_pad();

  const auto sx = [&](double v) { return ml + (v - xr.lo) / (xr.hi - xr.lo) * pw; };
  const auto sy = [&](double v) {
    return mt + ph - (v - yr.lo) / (yr.hi - yr.lo) * ph;
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(opts.width) + "\" height=\"" +
         std::to_string(opts.height) + "\" viewBox=\"0 0 " +
         std::to_string(opts.width) + " " + std::to_string(opts.height) +
         "\" font-family=\"monospace\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  svg += text_el(opts.width / 2.0, 18, opts.title, "middle", 14);

  // Axis ticks.
  const double xstep = nice_step((xr.hi - xr.lo) / 5.0);
  for (double v = std::ceil(xr.lo / xstep) * xstep; v <= xr.hi + 1e-9 * xstep;
       v += xstep) {
    const double X = sx(v);
    svg += "<line x1=\"" + px(X) + "\" y1=\"" + px(mt) + "\" x2=\"" + px(X) +
           "\" y2=\"" + px(mt + ph) + "\" stroke=\"#dddddd\"/>\n";
    svg += text_el(X, mt + ph + 16, fmt(v, "%g"), "middle", 11);
  }
  const double ystep = nice_step((yr.hi - yr.lo) / 5.0);
  for (double v = std::ceil(yr.lo / ystep) * ystep; v <= yr.hi + 1e-9 * ystep;
       v += ystep) {
    const double Y = sy(v);
    svg += "<line x1=\"" + px(ml) + "\" y1=\"" + px(Y) + "\" x2=\"" +
           px(ml + pw) + "\" y2=\"" + px(Y) + "\" stroke=\"#dddddd\"/>\n";
    const std::string label =
        opts.log_y ? fmt(std::pow(10.0, v), "%.3g") : fmt(v, "%g");
    svg += text_el(ml - 6, Y + 4, label, "end", 11);
  }
  svg += "<rect x=\"" + px(ml) + "\" y=\"" + px(mt) + "\" width=\"" + px(pw) +
         "\" height=\"" + px(ph) + "\" fill=\"none\" stroke=\"#333333\"/>\n";
  svg += text_el(ml + pw / 2, opts.height - 10, opts.x_label, "middle", 12);
  svg += "<text x=\"16\" y=\"" + px(mt + ph / 2) +
         "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         px(mt + ph / 2) + ")\">" + xml_escape(opts.y_label) + "</text>\n";

  int color_idx = 0;
  double legend_y = mt + 16;
  for (const Series& s : series) {
    const char* color = kPalette[color_idx % kPaletteSize];
    ++color_idx;
    std::string points;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      const double y = s.y[i];
      if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
      if (opts.log_y && !(y > 0.0)) continue;
      points += px(sx(s.x[i])) + "," + px(sy(opts.log_y ? std::log10(y) : y)) + " ";
    }
    if (!points.empty())
      svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
             "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    if (!s.label.empty()) {
      const double lx = ml + pw - 150;
      svg += "<line x1=\"" + px(lx) + "\" y1=\"" + px(legend_y - 4) +
             "\" x2=\"" + px(lx + 22) + "\" y2=\"" + px(legend_y - 4) +
             "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
      svg += text_el(lx + 28, legend_y, s.label, "start", 11);
      legend_y += 16;
    }
  }
  svg += "</svg>\n";
  return svg;
}

std::string heatmap_pair_svg(const Eigen::MatrixXd& left,
                             const std::string& left_title,
                             const Eigen::MatrixXd& right,
                             const std::string& right_title, int max_side) {
  const Eigen::MatrixXd l = block_average(left, max_side);
  const Eigen::MatrixXd r = block_average(right, max_side);
  const double scale =
      std::max(l.cwiseAbs().maxCoeff(), r.cwiseAbs().maxCoeff());

  const double side = 320, gap = 40, margin = 24, top = 40;
  const int width = static_cast<int>(2 * side + gap + 2 * margin);
  const int height = static_cast<int>(side + top + 44);

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) +
         "\" viewBox=\"0 0 " + std::to_string(width) + " " +
         std::to_string(height) + "\" font-family=\"monospace\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  heatmap_panel(svg, l, left_title, scale, margin, top, side);
  heatmap_panel(svg, r, right_title, scale, margin + side + gap, top, side);
  svg += text_el(width / 2.0, height - 12,
                 "shared color scale: blue -" + fmt(scale, "%.3g") +
                     " .. red +" + fmt(scale, "%.3g"),
                 "middle", 11);
  svg += "</svg>\n";
  return svg;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("short write to " + path);
}

}  // namespace bhcli
