#pragma once

#include <algorithm>
#include <limits>
#include <optional>

#include "ropkit/grid.hpp"

namespace ropkit {

/// Axis-aligned box in pixel units: top-left origin, x rightward, y downward.
/// A pixel-tight box of columns [x0, x1] has x = x0, w = x1 - x0 + 1.
struct Box {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  double area() const noexcept { return w * h; }
  double right() const noexcept { return x + w; }
  double bottom() const noexcept { return y + h; }
  bool valid() const noexcept { return w > 0 && h > 0; }

  bool operator==(const Box&) const = default;
};

inline double intersection_area(const Box& a, const Box& b) noexcept {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0 || ih <= 0) return 0.0;
  return iw * ih;
}

/// Intersection over union; 0 for disjoint or degenerate boxes.
inline double iou(const Box& a, const Box& b) noexcept {
  const double inter = intersection_area(a, b);
  if (inter <= 0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

/// Tight pixel box of the foreground, or nullopt for an empty mask.
inline std::optional<Box> tight_box(const Bitmap& mask) {
  int x0 = std::numeric_limits<int>::max(), y0 = x0, x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return std::nullopt;
  return Box{double(x0), double(y0), double(x1 - x0 + 1), double(y1 - y0 + 1)};
}

/// Fills the pixels whose centres fall inside `box`.
inline void paint_box(Bitmap& mask, const Box& box) {
  for (int y = 0; y < mask.height(); ++y) {
    const double cy = y + 0.5;
    if (cy < box.y || cy > box.bottom()) continue;
    for (int x = 0; x < mask.width(); ++x) {
      const double cx = x + 0.5;
      if (cx >= box.x && cx <= box.right()) mask(x, y) = 1;
    }
  }
}

}  // namespace ropkit
