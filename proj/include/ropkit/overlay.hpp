#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "ropkit/box.hpp"
#include "ropkit/error.hpp"
#include "ropkit/grid.hpp"
#include "ropkit/raster.hpp"

// Drawing helpers for the diagnostic overlays written by the CLI.

namespace ropkit {

using Colour = std::array<double, 3>;

inline constexpr Colour kProposalColour{1.0, 0.85, 0.0};
inline constexpr Colour kKeptColour{0.1, 1.0, 0.2};
inline constexpr Colour kMaskColour{0.2, 0.6, 1.0};

/// Panels placed left to right on a black canvas, 4 px apart.
inline RasterImage hconcat(const std::vector<RasterImage>& panels, int gap = 4) {
  if (panels.empty()) throw InvalidInput("hconcat needs at least one panel");
  int w = gap * static_cast<int>(panels.size() - 1), h = 0;
  for (const auto& p : panels) {
    w += p.width();
    h = std::max(h, p.height());
  }
  RasterImage out(w, h, 3, 0.0);
  int x0 = 0;
  for (const auto& p : panels) {
    const RasterImage rgb = to_rgb(p);
    for (int y = 0; y < rgb.height(); ++y) {
      for (int x = 0; x < rgb.width(); ++x) {
        for (int c = 0; c < 3; ++c) out.set(x0 + x, y, c, rgb.at(x, y, c));
      }
    }
    x0 += p.width() + gap;
  }
  return out;
}

/// Outline of `box` (clipped to the image), `thickness` px inward.
inline void draw_box(RasterImage& img, const Box& box, const Colour& colour, int thickness = 2) {
  if (img.channels() != 3) throw InvalidInput("draw_box needs an RGB image");
  const int x0 = std::max(0, static_cast<int>(std::floor(box.x)));
  const int y0 = std::max(0, static_cast<int>(std::floor(box.y)));
  const int x1 = std::min(img.width(), static_cast<int>(std::ceil(box.right())));
  const int y1 = std::min(img.height(), static_cast<int>(std::ceil(box.bottom())));
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const bool edge = x - x0 < thickness || x1 - 1 - x < thickness || y - y0 < thickness || y1 - 1 - y < thickness;
      if (!edge) continue;
      for (int c = 0; c < 3; ++c) img.set(x, y, c, colour[c]);
    }
  }
}

/// Blends `colour` over the foreground of `mask` with weight `alpha`.
inline void tint_mask(RasterImage& img, const Bitmap& mask, const Colour& colour, double alpha = 0.5) {
  if (img.channels() != 3) throw InvalidInput("tint_mask needs an RGB image");
  if (mask.width() != img.width() || mask.height() != img.height()) throw InvalidInput("tint_mask size mismatch");
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (!mask(x, y)) continue;
      for (int c = 0; c < 3; ++c) img.set(x, y, c, (1 - alpha) * img.at(x, y, c) + alpha * colour[c]);
    }
  }
}

}  // namespace ropkit
