#pragma once

#include "uhs/io/records.hpp"

#include <png.h>

namespace uhs::io {

struct Series {
  std::vector<double> x, y;
};

struct PlotOptions {
  int width = 640;
  int height = 400;
  bool log_x = false;
  bool log_y = false;
};

/// RGB raster line plot: frame, quarter ticks and one coloured polyline per series. No text;
/// the accompanying CSV carries the numbers.
class LinePlot {
 public:
  explicit LinePlot(PlotOptions opt = {}) : opt_(opt), pix_(static_cast<std::size_t>(opt.width) * opt.height * 3, 255) {}

  void add(Series s) { series_.push_back(std::move(s)); }

  std::string png() {
    draw();
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(opt_.width);
    img.height = static_cast<png_uint_32>(opt_.height);
    img.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, pix_.data(), 0, nullptr))
      throw std::runtime_error(std::string("plot: ") + img.message);
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, pix_.data(), 0, nullptr))
      throw std::runtime_error(std::string("plot: ") + img.message);
    out.resize(size);
    return out;
  }

 private:
  static constexpr int kMargin = 30;

  double tx(double v) const { return opt_.log_x ? std::log10(v) : v; }
  double ty(double v) const { return opt_.log_y ? std::log10(v) : v; }

  void set(int x, int y, const std::array<unsigned char, 3>& c) {
    if (x < 0 || y < 0 || x >= opt_.width || y >= opt_.height) return;
    const std::size_t k = (static_cast<std::size_t>(y) * opt_.width + x) * 3;
    for (int i = 0; i < 3; ++i) pix_[k + i] = c[i];
  }

  void line(int x0, int y0, int x1, int y1, const std::array<unsigned char, 3>& c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
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

  void draw() {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series_)
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        const double a = tx(s.x[i]), b = ty(s.y[i]);
        if (!std::isfinite(a) || !std::isfinite(b)) continue;
        x0 = std::min(x0, a);
        x1 = std::max(x1, a);
        y0 = std::min(y0, b);
        y1 = std::max(y1, b);
      }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const int w = opt_.width - 2 * kMargin, h = opt_.height - 2 * kMargin;
    const std::array<unsigned char, 3> black{0, 0, 0};
    const int l = kMargin, r = kMargin + w, t = kMargin, b = kMargin + h;
    line(l, t, r, t, black);
    line(r, t, r, b, black);
    line(r, b, l, b, black);
    line(l, b, l, t, black);
    for (int q = 0; q <= 4; ++q) {
      line(l + q * w / 4, b, l + q * w / 4, b + 5, black);
      line(l - 5, b - q * h / 4, l, b - q * h / 4, black);
    }
    static const std::array<std::array<unsigned char, 3>, 6> colors{
        {{31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {148, 103, 189}, {255, 127, 14}, {23, 190, 207}}};
    for (std::size_t k = 0; k < series_.size(); ++k) {
      const auto& s = series_[k];
      int px = -1, py = -1;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        const double a = tx(s.x[i]), c = ty(s.y[i]);
        if (!std::isfinite(a) || !std::isfinite(c)) {
          px = -1;
          continue;
        }
        const int X = l + static_cast<int>(std::lround((a - x0) / (x1 - x0) * w));
        const int Y = b - static_cast<int>(std::lround((c - y0) / (y1 - y0) * h));
        if (px >= 0) line(px, py, X, Y, colors[k % colors.size()]);
        for (int d = -1; d <= 1; ++d) set(X + d, Y, colors[k % colors.size()]), set(X, Y + d, colors[k % colors.size()]);
        px = X;
        py = Y;
      }
    }
  }

  PlotOptions opt_;
  std::vector<unsigned char> pix_;
  std::vector<Series> series_;
};

}  // namespace uhs::io
