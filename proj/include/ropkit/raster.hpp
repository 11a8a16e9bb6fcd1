#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ropkit/error.hpp"
#include "ropkit/grid.hpp"

namespace ropkit {

/// Planar-interleaved raster with 1 or 3 channels and intensities in [0,1].
///
/// Storage is row-major with channels interleaved per pixel. Values are kept
/// in double precision; quantization to 8 bits only happens at file I/O.
class RasterImage {
 public:
  RasterImage() = default;

  RasterImage(int width, int height, int channels, double fill = 0.0) {
    check_shape(width, height, channels);
    if (!(fill >= 0.0 && fill <= 1.0)) {
      throw InvalidInput("fill intensity outside [0,1]");
    }
    width_ = width;
    height_ = height;
    channels_ = channels;
    data_.assign(expected_size(width, height, channels), fill);
  }

  RasterImage(int width, int height, int channels, std::vector<double> data) {
    check_shape(width, height, channels);
    if (data.size() != expected_size(width, height, channels)) {
      throw InvalidInput("raster data length " + std::to_string(data.size()) + " != " +
                         std::to_string(expected_size(width, height, channels)));
    }
    for (double v : data) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw InvalidInput("raster intensity outside [0,1]");
      }
    }
    width_ = width;
    height_ = height;
    channels_ = channels;
    data_ = std::move(data);
  }

  /// Builds a single-channel raster from an unbounded grid, clamping to [0,1].
  static RasterImage from_grid(const Grid<double>& g) {
    std::vector<double> data(g.data().begin(), g.data().end());
    for (double& v : data) v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    return RasterImage(g.width(), g.height(), 1, std::move(data));
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  bool empty() const noexcept { return data_.empty(); }

  double at(int x, int y, int c = 0) const noexcept { return data_[index(x, y, c)]; }

  /// Writes one sample, clamped into [0,1].
  void set(int x, int y, int c, double v) noexcept { data_[index(x, y, c)] = std::clamp(v, 0.0, 1.0); }

  std::span<const double> data() const noexcept { return data_; }

  /// Extracts channel `c` as a single-channel raster.
  RasterImage channel(int c) const {
    if (c < 0 || c >= channels_) throw InvalidInput("channel index out of range");
    std::vector<double> out(pixel_count());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = data_[p * channels_ + c];
    return RasterImage(width_, height_, 1, std::move(out));
  }

  Grid<double> to_grid(int c = 0) const {
    if (c < 0 || c >= channels_) throw InvalidInput("channel index out of range");
    Grid<double> g(width_, height_);
    auto dst = g.data();
    for (std::size_t p = 0; p < dst.size(); ++p) dst[p] = data_[p * channels_ + c];
    return g;
  }

  bool operator==(const RasterImage&) const = default;

 private:
  static void check_shape(int width, int height, int channels) {
    if (width < 1 || height < 1) throw InvalidInput("raster dimensions must be >= 1");
    if (channels != 1 && channels != 3) throw InvalidInput("raster must have 1 or 3 channels");
  }
  static std::size_t expected_size(int w, int h, int c) {
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c);
  }
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Interleaves three single-channel rasters into an RGB raster.
inline RasterImage merge_channels(const RasterImage& r, const RasterImage& g, const RasterImage& b) {
  if (r.channels() != 1 || g.channels() != 1 || b.channels() != 1) {
    throw InvalidInput("merge_channels expects single-channel planes");
  }
  if (r.width() != g.width() || r.width() != b.width() || r.height() != g.height() || r.height() != b.height()) {
    throw InvalidInput("merge_channels plane size mismatch");
  }
  std::vector<double> out(r.pixel_count() * 3);
  for (std::size_t p = 0; p < r.pixel_count(); ++p) {
    out[3 * p] = r.data()[p];
    out[3 * p + 1] = g.data()[p];
    out[3 * p + 2] = b.data()[p];
  }
  return RasterImage(r.width(), r.height(), 3, std::move(out));
}

/// Gray raster broadcast to three identical channels (identity for RGB input).
inline RasterImage to_rgb(const RasterImage& img) {
  if (img.channels() == 3) return img;
  return merge_channels(img, img, img);
}

// ---------------------------------------------------------------------------
// YIQ (NTSC)
// ---------------------------------------------------------------------------

inline constexpr double kYiqIMax = 0.5959;
inline constexpr double kYiqQMax = 0.5229;

using Matrix3 = std::array<std::array<double, 3>, 3>;

inline constexpr Matrix3 kRgbToYiq{{
    {0.299, 0.587, 0.114},
    {0.5959, -0.2746, -0.3213},
    {0.2115, -0.5227, 0.3112},
}};

constexpr Matrix3 invert(const Matrix3& m) {
  const double a = m[0][0], b = m[0][1], c = m[0][2];
  const double d = m[1][0], e = m[1][1], f = m[1][2];
  const double g = m[2][0], h = m[2][1], i = m[2][2];
  const double A = e * i - f * h, B = -(d * i - f * g), C = d * h - e * g;
  const double det = a * A + b * B + c * C;
  return {{
      {A / det, -(b * i - c * h) / det, (b * f - c * e) / det},
      {B / det, (a * i - c * g) / det, -(a * f - c * d) / det},
      {C / det, -(a * h - b * g) / det, (a * e - b * d) / det},
  }};
}

// Exact inverse of the forward matrix, so the round trip is limited only by rounding.
inline constexpr Matrix3 kYiqToRgb = invert(kRgbToYiq);

struct YiqImage {
  int width = 0;
  int height = 0;
  RasterImage y;          ///< luma, single channel in [0,1]
  std::vector<double> i;  ///< in [-0.5959, 0.5959]
  std::vector<double> q;  ///< in [-0.5229, 0.5229]
};

inline YiqImage rgb_to_yiq(const RasterImage& img) {
  if (img.channels() != 3) {
    throw InvalidInput("rgb_to_yiq expects 3 channels, got " + std::to_string(img.channels()));
  }
  const std::size_t n = img.pixel_count();
  std::vector<double> y(n), i(n), q(n);
  const auto src = img.data();
  for (std::size_t p = 0; p < n; ++p) {
    const double r = src[3 * p], g = src[3 * p + 1], b = src[3 * p + 2];
    y[p] = std::clamp(kRgbToYiq[0][0] * r + kRgbToYiq[0][1] * g + kRgbToYiq[0][2] * b, 0.0, 1.0);
    i[p] = kRgbToYiq[1][0] * r + kRgbToYiq[1][1] * g + kRgbToYiq[1][2] * b;
    q[p] = kRgbToYiq[2][0] * r + kRgbToYiq[2][1] * g + kRgbToYiq[2][2] * b;
  }
  return {img.width(), img.height(), RasterImage(img.width(), img.height(), 1, std::move(y)), std::move(i),
          std::move(q)};
}

/// Inverse NTSC transform; channels falling outside [0,1] are clamped.
inline RasterImage yiq_to_rgb(const YiqImage& yiq) {
  const std::size_t n = static_cast<std::size_t>(yiq.width) * static_cast<std::size_t>(yiq.height);
  if (yiq.y.pixel_count() != n || yiq.i.size() != n || yiq.q.size() != n) {
    throw InvalidInput("YIQ plane lengths do not match dimensions");
  }
  std::vector<double> out(3 * n);
  const auto y = yiq.y.data();
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < 3; ++c) {
      const double v = kYiqToRgb[c][0] * y[p] + kYiqToRgb[c][1] * yiq.i[p] + kYiqToRgb[c][2] * yiq.q[p];
      out[3 * p + c] = std::clamp(v, 0.0, 1.0);
    }
  }
  return RasterImage(yiq.width, yiq.height, 3, std::move(out));
}

/// Luma plane of an RGB image; gray input is returned as-is.
inline RasterImage luma(const RasterImage& img) {
  if (img.channels() == 1) return img;
  return rgb_to_yiq(img).y;
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

namespace detail {

// Pixel-centre mapping: destination centre x+0.5 lands on source (x+0.5)*scale.
inline double source_coord(int dst, double scale, int src_extent) {
  const double s = (dst + 0.5) * scale - 0.5;
  return std::clamp(s, 0.0, static_cast<double>(src_extent - 1));
}

}  // namespace detail

/// Bilinear resize to exactly (target_w, target_h).
inline RasterImage resize(const RasterImage& img, int target_w, int target_h) {
  if (target_w < 1 || target_h < 1) throw InvalidInput("resize target dimensions must be >= 1");
  if (img.empty()) throw InvalidInput("resize of empty raster");
  if (target_w == img.width() && target_h == img.height()) return img;

  const int ch = img.channels();
  const double sx = static_cast<double>(img.width()) / target_w;
  const double sy = static_cast<double>(img.height()) / target_h;

  std::vector<int> x0(target_w), x1(target_w);
  std::vector<double> fx(target_w);
  for (int x = 0; x < target_w; ++x) {
    const double s = detail::source_coord(x, sx, img.width());
    x0[x] = static_cast<int>(std::floor(s));
    x1[x] = std::min(x0[x] + 1, img.width() - 1);
    fx[x] = s - x0[x];
  }

  std::vector<double> out(static_cast<std::size_t>(target_w) * target_h * ch);
  for (int y = 0; y < target_h; ++y) {
    const double s = detail::source_coord(y, sy, img.height());
    const int y0 = static_cast<int>(std::floor(s));
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double fy = s - y0;
    for (int x = 0; x < target_w; ++x) {
      for (int c = 0; c < ch; ++c) {
        const double a = img.at(x0[x], y0, c), b = img.at(x1[x], y0, c);
        const double d = img.at(x0[x], y1, c), e = img.at(x1[x], y1, c);
        // lerp form keeps constant neighbourhoods exact
        const double top = a + fx[x] * (b - a);
        const double bottom = d + fx[x] * (e - d);
        const double v = top + fy * (bottom - top);
        out[(static_cast<std::size_t>(y) * target_w + x) * ch + c] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return RasterImage(target_w, target_h, ch, std::move(out));
}

/// Nearest-neighbour resize for binary masks.
inline Bitmap resize_nearest(const Bitmap& mask, int target_w, int target_h) {
  if (target_w < 1 || target_h < 1) throw InvalidInput("resize target dimensions must be >= 1");
  if (mask.empty()) throw InvalidInput("resize of empty mask");
  Bitmap out(target_w, target_h);
  const double sx = static_cast<double>(mask.width()) / target_w;
  const double sy = static_cast<double>(mask.height()) / target_h;
  for (int y = 0; y < target_h; ++y) {
    const int syi = std::min(static_cast<int>((y + 0.5) * sy), mask.height() - 1);
    for (int x = 0; x < target_w; ++x) {
      const int sxi = std::min(static_cast<int>((x + 0.5) * sx), mask.width() - 1);
      out(x, y) = mask(sxi, syi) ? 1 : 0;
    }
  }
  return out;
}

}  // namespace ropkit
