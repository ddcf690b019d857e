// Render-only helpers for figures: colour-mapped heatmaps and ROI frames.

#pragma once

#include "attnboot/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

namespace attnboot {

using Rgb8 = Eigen::Array<std::uint8_t, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Piecewise-linear black-purple-red-yellow-white colour map of a [0,1] value.
inline std::array<std::uint8_t, 3> heat_color(double v) {
  static constexpr double stops[5][3] = {
      {0, 0, 0}, {85, 20, 130}, {210, 50, 40}, {250, 200, 40}, {255, 255, 255}};
  const double x = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0) * 4.0;
  const int k = std::min(3, int(x));
  const double f = x - double(k);
  std::array<std::uint8_t, 3> out{};
  for (int c = 0; c < 3; ++c) {
    out[std::size_t(c)] = std::uint8_t(std::lround(stops[k][c] + f * (stops[k + 1][c] - stops[k][c])));
  }
  return out;
}

inline Rgb8 colorize(const PixelMapd& map) {
  Rgb8 rgb(map.size(), 3);
  for (Index i = 0; i < map.size(); ++i) {
    const auto c = heat_color(map.data()[i]);
    rgb.row(i) << c[0], c[1], c[2];
  }
  return rgb;
}

inline Rgb8 to_rgb8(const Imaged& image) {
  return (image.pixels() * 255.0).round().cast<std::uint8_t>();
}

/// Paints the ROI boundary (ROI pixels with a 4-neighbour outside the ROI or
/// on the image border) in pure red.
inline void draw_frame(Rgb8& rgb, const RoiMask& mask) {
  const Index h = mask.height(), w = mask.width();
  if (rgb.rows() != h * w) throw invalid_input("frame overlay: mask does not match the image");
  const auto outside = [&](Index r, Index c) { return r < 0 || r >= h || c < 0 || c >= w || !mask(r, c); };
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      if (!mask(r, c)) continue;
      if (outside(r - 1, c) || outside(r + 1, c) || outside(r, c - 1) || outside(r, c + 1)) {
        rgb.row(r * w + c) << 255, 0, 0;
      }
    }
  }
}

}  // namespace attnboot
