#pragma once

#include <string>
#include <vector>

#include "ra/types.hpp"

namespace ra::svg {

struct Series {
  std::string label;
  Vector xs;
  Vector ys;
};

/// Single heatmap: one <rect> per matrix cell, symmetric diverging scale
/// normalized by the figure's max |value|. Byte output is deterministic for
/// a fixed input.
std::string heatmap(const Matrix& m, double cell_px = 14.0);
void emit_svg_heatmap(const Matrix& m, const std::string& path);

/// Grid of heatmaps (paper-style alignment figure); grid[i][j] is the map of
/// probed block i+1 in the basis of block j+1. All panels share one
/// normalization.
std::string heatmap_grid(const std::vector<std::vector<Matrix>>& grid,
                         const std::string& title);
void emit_svg_heatmap_grid(const std::vector<std::vector<Matrix>>& grid,
                           const std::string& title, const std::string& path);

std::string line_chart(const std::vector<Series>& series,
                       const std::string& title);
void emit_svg_lines(const std::vector<Series>& series, const std::string& title,
                    const std::string& path);

/// 2-D polylines (one per trajectory) colored by label.
std::string trajectories(const std::vector<Matrix>& polylines,
                         const std::vector<int>& labels,
                         const std::string& title);
void emit_svg_trajectories(const std::vector<Matrix>& polylines,
                           const std::vector<int>& labels,
                           const std::string& title, const std::string& path);

}  // namespace ra::svg
