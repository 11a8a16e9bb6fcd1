#pragma once

#include <cmath>
#include <vector>

#include "ropkit/error.hpp"
#include "ropkit/grid.hpp"

namespace ropkit {

/// Half-sample symmetric reflection (abc|cba), repeated for short extents.
inline int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

/// Normalised 1-D Gaussian taps with the given radius (default ceil(3 sigma)).
inline std::vector<double> gaussian_taps(double sigma, int radius = -1) {
  if (!(sigma > 0)) throw InvalidInput("gaussian sigma must be positive");
  if (radius < 0) radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double sum = 0;
  for (int k = -radius; k <= radius; ++k) {
    taps[k + radius] = std::exp(-(k * k) / (2.0 * sigma * sigma));
    sum += taps[k + radius];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

/// Separable convolution with symmetric boundary handling; taps are centred.
inline Grid<double> convolve_separable(const Grid<double>& in, const std::vector<double>& row_taps,
                                       const std::vector<double>& col_taps) {
  const int w = in.width(), h = in.height();
  const int rx = static_cast<int>(row_taps.size()) / 2;
  const int ry = static_cast<int>(col_taps.size()) / 2;
  Grid<double> tmp(w, h), out(w, h);
  std::vector<double> line(w + 2 * rx);
  for (int y = 0; y < h; ++y) {
    for (int i = 0; i < w + 2 * rx; ++i) line[i] = in(reflect_index(i - rx, w), y);
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int k = 0; k <= 2 * rx; ++k) acc += row_taps[k] * line[x + k];
      tmp(x, y) = acc;
    }
  }
  std::vector<double> col(h + 2 * ry);
  for (int x = 0; x < w; ++x) {
    for (int i = 0; i < h + 2 * ry; ++i) col[i] = tmp(x, reflect_index(i - ry, h));
    for (int y = 0; y < h; ++y) {
      double acc = 0;
      for (int k = 0; k <= 2 * ry; ++k) acc += col_taps[k] * col[y + k];
      out(x, y) = acc;
    }
  }
  return out;
}

inline Grid<double> gaussian_blur(const Grid<double>& in, double sigma) {
  if (sigma <= 0) return in;
  const auto taps = gaussian_taps(sigma);
  return convolve_separable(in, taps, taps);
}

/// Direct 2-D convolution (kernel centred, odd size) with symmetric boundaries.
inline Grid<double> convolve2d(const Grid<double>& in, const Grid<double>& kernel) {
  if (kernel.width() % 2 == 0 || kernel.height() % 2 == 0) throw InvalidInput("kernel size must be odd");
  const int rx = kernel.width() / 2, ry = kernel.height() / 2;
  Grid<double> out(in.width(), in.height());
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      double acc = 0;
      for (int j = -ry; j <= ry; ++j) {
        const int sy = reflect_index(y - j, in.height());
        for (int i = -rx; i <= rx; ++i) {
          acc += kernel(i + rx, j + ry) * in(reflect_index(x - i, in.width()), sy);
        }
      }
      out(x, y) = acc;
    }
  }
  return out;
}

}  // namespace ropkit
