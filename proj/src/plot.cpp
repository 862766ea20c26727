#include "latsplit/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace latsplit {

namespace {

const Color kPalette[] = {{0.12f, 0.47f, 0.71f}, {1.0f, 0.5f, 0.05f}, {0.17f, 0.63f, 0.17f}, {0.84f, 0.15f, 0.16f},
                          {0.58f, 0.4f, 0.74f},  {0.55f, 0.34f, 0.29f}, {0.5f, 0.5f, 0.5f}};
const Color kAxis = {0.2f, 0.2f, 0.2f};

class Canvas {
 public:
  Canvas(int width, int height) : img_(Image::constant(Shape{1, height, width, 3}, 1.0f)) {}

  void set(int x, int y, const Color& c) {
    if (x < 0 || y < 0 || x >= img_.width() || y >= img_.height()) return;
    for (int ch = 0; ch < 3; ++ch) img_(y, x, ch) = c[ch];
  }

  void fill(int x0, int y0, int x1, int y1, const Color& c) {
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y) {
      for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) set(x, y, c);
    }
  }

  void line(int x0, int y0, int x1, int y1, const Color& c) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      set(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void axes(const PlotOptions& o) {
    line(o.margin, o.margin, o.margin, o.height - o.margin, kAxis);
    line(o.margin, o.height - o.margin, o.width - o.margin, o.height - o.margin, kAxis);
  }

  Image take() { return std::move(img_); }

 private:
  Image img_;
};

void check(const PlotOptions& o) {
  if (o.width <= 2 * o.margin + 1 || o.height <= 2 * o.margin + 1) throw ParameterError("plot: canvas too small");
}

}  // namespace

Image plot_lines(const std::vector<std::vector<double>>& series, const PlotOptions& o) {
  check(o);
  Canvas canvas(o.width, o.height);
  canvas.axes(o);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  size_t n = 0;
  auto value = [&](double v) { return o.log_y ? std::log10(std::max(v, 1e-12)) : v; };
  for (const auto& s : series) {
    n = std::max(n, s.size());
    for (double v : s) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, value(v));
      hi = std::max(hi, value(v));
    }
  }
  if (n < 2 || !(hi >= lo)) return canvas.take();
  if (hi == lo) hi = lo + 1.0;
  const int w = o.width - 2 * o.margin, h = o.height - 2 * o.margin;
  for (size_t k = 0; k < series.size(); ++k) {
    const Color& c = kPalette[k % std::size(kPalette)];
    int px = -1, py = -1;
    for (size_t i = 0; i < series[k].size(); ++i) {
      if (!std::isfinite(series[k][i])) continue;
      const int x = o.margin + static_cast<int>(std::lround(static_cast<double>(i) / (n - 1) * w));
      const int y = o.height - o.margin - static_cast<int>(std::lround((value(series[k][i]) - lo) / (hi - lo) * h));
      if (px >= 0) canvas.line(px, py, x, y, c);
      px = x;
      py = y;
    }
  }
  return canvas.take();
}

Image plot_histogram(const DistributionReport& report, const PlotOptions& o) {
  check(o);
  Canvas canvas(o.width, o.height);
  const int bins = static_cast<int>(report.counts.size());
  if (bins == 0) return canvas.take();
  const long peak = std::max(1L, *std::max_element(report.counts.begin(), report.counts.end()));
  const int w = o.width - 2 * o.margin, h = o.height - 2 * o.margin;
  for (int b = 0; b < bins; ++b) {
    const int x0 = o.margin + b * w / bins;
    const int x1 = o.margin + (b + 1) * w / bins - 1;
    const int top = o.height - o.margin - static_cast<int>(std::lround(static_cast<double>(report.counts[b]) / peak * h));
    const bool positive = report.edges[b] >= 0.0;
    canvas.fill(x0, top, std::max(x0, x1), o.height - o.margin, positive ? kPalette[1] : kPalette[0]);
  }
  const double lo = report.edges.front(), hi = report.edges.back();
  if (lo < 0.0 && hi > 0.0) {
    const int x = o.margin + static_cast<int>(std::lround(-lo / (hi - lo) * w));
    canvas.line(x, o.margin, x, o.height - o.margin, kPalette[3]);
  }
  canvas.axes(o);
  return canvas.take();
}

Image plot_bars(const std::vector<double>& values, const PlotOptions& o) {
  check(o);
  Canvas canvas(o.width, o.height);
  canvas.axes(o);
  if (values.empty()) return canvas.take();
  double hi = 0.0;
  for (double v : values) hi = std::max(hi, v);
  if (hi <= 0.0) return canvas.take();
  const int n = static_cast<int>(values.size());
  const int w = o.width - 2 * o.margin, h = o.height - 2 * o.margin;
  for (int i = 0; i < n; ++i) {
    const int x0 = o.margin + i * w / n + 4;
    const int x1 = o.margin + (i + 1) * w / n - 4;
    const int top = o.height - o.margin - static_cast<int>(std::lround(std::max(0.0, values[i]) / hi * h));
    canvas.fill(x0, top, std::max(x0, x1), o.height - o.margin - 1, kPalette[i % std::size(kPalette)]);
  }
  return canvas.take();
}

Image image_grid(const std::vector<std::vector<Image>>& rows) {
  constexpr int kGutter = 2;
  if (rows.empty() || rows.front().empty()) throw ParameterError("image_grid: no tiles");
  const int th = rows.front().front().height(), tw = rows.front().front().width();
  size_t cols = 0;
  for (const auto& r : rows) cols = std::max(cols, r.size());
  const int H = static_cast<int>(rows.size()) * (th + kGutter) + kGutter;
  const int W = static_cast<int>(cols) * (tw + kGutter) + kGutter;
  Image out = Image::constant(Shape{1, H, W, 3}, 1.0f);
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c < rows[r].size(); ++c) {
      const Image& tile = rows[r][c];
      if (tile.height() != th || tile.width() != tw || tile.channels() != 3) {
        throw DimensionError("image_grid: tiles must share one H x W x 3 shape");
      }
      const int oy = kGutter + static_cast<int>(r) * (th + kGutter);
      const int ox = kGutter + static_cast<int>(c) * (tw + kGutter);
      for (int y = 0; y < th; ++y) {
        for (int x = 0; x < tw; ++x) {
          for (int ch = 0; ch < 3; ++ch) out(oy + y, ox + x, ch) = tile(y, x, ch);
        }
      }
    }
  }
  return out;
}

}  // namespace latsplit
