#pragma once

#include <array>
#include <vector>

#include "latsplit/analysis.hpp"
#include "latsplit/tensor.hpp"

namespace latsplit {

using Color = std::array<float, 3>;

// Minimal raster plots for run directories; no text, axes only.
struct PlotOptions {
  int width = 640;
  int height = 360;
  int margin = 24;
  bool log_y = false;
};

// One polyline per series over a shared x index.
Image plot_lines(const std::vector<std::vector<double>>& series, const PlotOptions& options = {});

// Histogram bars; the bin containing zero is outlined by a red marker line.
Image plot_histogram(const DistributionReport& report, const PlotOptions& options = {});

// Vertical bars, one per value, on a zero-based axis.
Image plot_bars(const std::vector<double>& values, const PlotOptions& options = {});

// Tiles rows of equally sized images into one sheet with a 2 px gutter.
Image image_grid(const std::vector<std::vector<Image>>& rows);

}  // namespace latsplit
