#include "ra/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ra::svg {

namespace {

const char* kHeader =
    "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" ";

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// symmetric diverging palette: blue for negative, white at zero, red positive
std::string diverging_color(double t) {
  t = std::clamp(t, -1.0, 1.0);
  int r, g, b;
  if (t >= 0.0) {
    r = int(std::lround(255.0 + t * (178.0 - 255.0)));
    g = int(std::lround(255.0 + t * (24.0 - 255.0)));
    b = int(std::lround(255.0 + t * (43.0 - 255.0)));
  } else {
    r = int(std::lround(255.0 - t * (33.0 - 255.0)));
    g = int(std::lround(255.0 - t * (102.0 - 255.0)));
    b = int(std::lround(255.0 - t * (172.0 - 255.0)));
  }
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

const char* kPalette[] = {"#1b6ca8", "#c43d3d", "#3a9e4f", "#9859b8",
                          "#c78a1e", "#4f5b66", "#8c2155", "#1c9e95",
                          "#6b4f2a", "#54338e"};
constexpr int kPaletteSize = 10;

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite())
    throw std::invalid_argument(std::string("svg: non-finite values in ") + what);
}

void heatmap_cells(std::ostringstream& out, const Matrix& m, double x0,
                   double y0, double cell, double vmax) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      const double t = vmax > 0.0 ? m(r, c) / vmax : 0.0;
      out << "<rect x=\"" << num(x0 + double(c) * cell) << "\" y=\""
          << num(y0 + double(r) * cell) << "\" width=\"" << num(cell)
          << "\" height=\"" << num(cell) << "\" fill=\"" << diverging_color(t)
          << "\"/>\n";
    }
  }
}

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out << body;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

std::string heatmap(const Matrix& m, double cell_px) {
  require_finite(m, "heatmap");
  const double w = double(m.cols()) * cell_px;
  const double h = double(m.rows()) * cell_px;
  std::ostringstream out;
  out << kHeader << "width=\"" << num(w) << "\" height=\"" << num(h)
      << "\" viewBox=\"0 0 " << num(w) << " " << num(h) << "\">\n";
  heatmap_cells(out, m, 0.0, 0.0, cell_px, m.cwiseAbs().maxCoeff());
  out << "</svg>\n";
  return out.str();
}

void emit_svg_heatmap(const Matrix& m, const std::string& path) {
  write_text_file(path, heatmap(m));
}

std::string heatmap_grid(const std::vector<std::vector<Matrix>>& grid,
                         const std::string& title) {
  if (grid.empty()) throw std::invalid_argument("svg: empty heatmap grid");
  const std::size_t rows = grid.size();
  const std::size_t cols = grid[0].size();
  double vmax = 0.0;
  for (const auto& row : grid) {
    if (row.size() != cols)
      throw std::invalid_argument("svg: ragged heatmap grid");
    for (const Matrix& m : row) {
      require_finite(m, "heatmap grid");
      vmax = std::max(vmax, m.cwiseAbs().maxCoeff());
    }
  }

  const double cell = 4.0;
  const double panel_w = double(grid[0][0].cols()) * cell;
  const double panel_h = double(grid[0][0].rows()) * cell;
  const double pad = 10.0;
  const double margin = 44.0;
  const double total_w = margin + double(cols) * (panel_w + pad) + pad;
  const double total_h = margin + double(rows) * (panel_h + pad) + pad;

  std::ostringstream out;
  out << kHeader << "width=\"" << num(total_w) << "\" height=\"" << num(total_h)
      << "\" viewBox=\"0 0 " << num(total_w) << " " << num(total_h) << "\">\n";
  out << "<text x=\"" << num(margin) << "\" y=\"16\" font-size=\"12\" "
         "font-family=\"sans-serif\">" << title << "</text>\n";
  for (std::size_t i = 0; i < rows; ++i) {
    const double y0 = margin + double(i) * (panel_h + pad);
    out << "<text x=\"6\" y=\"" << num(y0 + panel_h / 2.0)
        << "\" font-size=\"10\" font-family=\"sans-serif\">i=" << (i + 1)
        << "</text>\n";
    for (std::size_t j = 0; j < cols; ++j) {
      const double x0 = margin + double(j) * (panel_w + pad);
      if (i == 0)
        out << "<text x=\"" << num(x0) << "\" y=\"" << num(margin - 6.0)
            << "\" font-size=\"10\" font-family=\"sans-serif\">j=" << (j + 1)
            << "</text>\n";
      heatmap_cells(out, grid[i][j], x0, y0, cell, vmax);
    }
  }
  out << "</svg>\n";
  return out.str();
}

void emit_svg_heatmap_grid(const std::vector<std::vector<Matrix>>& grid,
                           const std::string& title, const std::string& path) {
  write_text_file(path, heatmap_grid(grid, title));
}

std::string line_chart(const std::vector<Series>& series,
                       const std::string& title) {
  if (series.empty()) throw std::invalid_argument("svg: no series");
  double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  for (const Series& s : series) {
    if (s.xs.size() != s.ys.size() || s.xs.size() < 1)
      throw std::invalid_argument("svg: malformed series");
    if (!s.xs.allFinite() || !s.ys.allFinite())
      throw std::invalid_argument("svg: non-finite values in series");
    x_min = std::min(x_min, s.xs.minCoeff());
    x_max = std::max(x_max, s.xs.maxCoeff());
    y_min = std::min(y_min, s.ys.minCoeff());
    y_max = std::max(y_max, s.ys.maxCoeff());
  }
  if (x_max == x_min) x_max = x_min + 1.0;
  if (y_max == y_min) y_max = y_min + 1.0;

  const double width = 480.0, height = 320.0;
  const double ml = 56.0, mr = 16.0, mt = 28.0, mb = 36.0;
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto sx = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * pw; };
  auto sy = [&](double y) { return mt + ph - (y - y_min) / (y_max - y_min) * ph; };

  std::ostringstream out;
  out << kHeader << "width=\"" << num(width) << "\" height=\"" << num(height)
      << "\" viewBox=\"0 0 " << num(width) << " " << num(height) << "\">\n";
  out << "<text x=\"" << num(ml) << "\" y=\"18\" font-size=\"12\" "
         "font-family=\"sans-serif\">" << title << "</text>\n";
  out << "<line x1=\"" << num(ml) << "\" y1=\"" << num(mt + ph) << "\" x2=\""
      << num(ml + pw) << "\" y2=\"" << num(mt + ph)
      << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  out << "<line x1=\"" << num(ml) << "\" y1=\"" << num(mt) << "\" x2=\""
      << num(ml) << "\" y2=\"" << num(mt + ph)
      << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  out << "<text x=\"" << num(ml) << "\" y=\"" << num(height - 8.0)
      << "\" font-size=\"10\" font-family=\"sans-serif\">" << num(x_min)
      << "</text>\n";
  out << "<text x=\"" << num(ml + pw - 24.0) << "\" y=\"" << num(height - 8.0)
      << "\" font-size=\"10\" font-family=\"sans-serif\">" << num(x_max)
      << "</text>\n";
  out << "<text x=\"4\" y=\"" << num(mt + ph) << "\" font-size=\"10\" "
         "font-family=\"sans-serif\">" << num(y_min) << "</text>\n";
  out << "<text x=\"4\" y=\"" << num(mt + 10.0) << "\" font-size=\"10\" "
         "font-family=\"sans-serif\">" << num(y_max) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const char* color = kPalette[k % kPaletteSize];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (Index i = 0; i < s.xs.size(); ++i)
      out << num(sx(s.xs(i))) << "," << num(sy(s.ys(i))) << " ";
    out << "\"/>\n";
    if (!s.label.empty())
      out << "<text x=\"" << num(ml + pw - 110.0) << "\" y=\""
          << num(mt + 14.0 + 13.0 * double(k)) << "\" font-size=\"10\" "
          << "font-family=\"sans-serif\" fill=\"" << color << "\">" << s.label
          << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void emit_svg_lines(const std::vector<Series>& series, const std::string& title,
                    const std::string& path) {
  write_text_file(path, line_chart(series, title));
}

std::string trajectories(const std::vector<Matrix>& polylines,
                         const std::vector<int>& labels,
                         const std::string& title) {
  if (polylines.empty()) throw std::invalid_argument("svg: no trajectories");
  if (labels.size() != polylines.size())
    throw std::invalid_argument("svg: label count mismatch");
  double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  for (const Matrix& line : polylines) {
    if (line.cols() != 2) throw std::invalid_argument("svg: polylines must be Nx2");
    require_finite(line, "trajectories");
    x_min = std::min(x_min, line.col(0).minCoeff());
    x_max = std::max(x_max, line.col(0).maxCoeff());
    y_min = std::min(y_min, line.col(1).minCoeff());
    y_max = std::max(y_max, line.col(1).maxCoeff());
  }
  if (x_max == x_min) x_max = x_min + 1.0;
  if (y_max == y_min) y_max = y_min + 1.0;

  const double width = 420.0, height = 420.0, margin = 30.0;
  auto sx = [&](double x) {
    return margin + (x - x_min) / (x_max - x_min) * (width - 2.0 * margin);
  };
  auto sy = [&](double y) {
    return height - margin -
           (y - y_min) / (y_max - y_min) * (height - 2.0 * margin);
  };

  std::ostringstream out;
  out << kHeader << "width=\"" << num(width) << "\" height=\"" << num(height)
      << "\" viewBox=\"0 0 " << num(width) << " " << num(height) << "\">\n";
  out << "<text x=\"" << num(margin) << "\" y=\"18\" font-size=\"12\" "
         "font-family=\"sans-serif\">" << title << "</text>\n";
  for (std::size_t t = 0; t < polylines.size(); ++t) {
    const Matrix& line = polylines[t];
    const char* color =
        kPalette[std::size_t(std::max(labels[t], 0)) % kPaletteSize];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.2\" points=\"";
    for (Index i = 0; i < line.rows(); ++i)
      out << num(sx(line(i, 0))) << "," << num(sy(line(i, 1))) << " ";
    out << "\"/>\n";
    for (Index i = 0; i < line.rows(); ++i)
      out << "<circle cx=\"" << num(sx(line(i, 0))) << "\" cy=\""
          << num(sy(line(i, 1))) << "\" r=\"2\" fill=\"" << color << "\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void emit_svg_trajectories(const std::vector<Matrix>& polylines,
                           const std::vector<int>& labels,
                           const std::string& title, const std::string& path) {
  write_text_file(path, trajectories(polylines, labels, title));
}

}  // namespace ra::svg
