#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "ropkit/error.hpp"
#include "ropkit/fft.hpp"
#include "ropkit/filter.hpp"
#include "ropkit/grid.hpp"
#include "ropkit/raster.hpp"

// Fundus enhancement on the YIQ luma plane: contrast-limited adaptive
// histogram equalisation, a brightness-preserving sigmoid stretch and
// Wiener deconvolution of the blur CLAHE leaves behind.

namespace ropkit {

struct TileGrid {
  int rows = 8;
  int cols = 8;
  bool operator==(const TileGrid&) const = default;
};

struct EnhanceConfig {
  TileGrid clahe_tiles{8, 8};
  double clahe_clip = 2.0;  ///< multiple of the uniform bin height; +inf disables clipping
  int hist_bins = 256;
  double sigmoid_c = 2.5;
  double sigmoid_offset = 0.05;
  bool fit_c = false;
  double c_lo = 0.5;
  double c_hi = 20.0;
  double psf_sigma = 1.0;
  int psf_size = 9;
  double wiener_nsr = 0.01;

  void validate() const {
    if (clahe_tiles.rows < 1 || clahe_tiles.cols < 1) throw InvalidInput("clahe_tiles must be >= 1x1");
    if (!(clahe_clip > 0)) throw InvalidInput("clahe_clip must be > 0");
    if (hist_bins < 2) throw InvalidInput("hist_bins must be >= 2");
    if (!(sigmoid_offset >= 0 && sigmoid_offset <= 1)) throw InvalidInput("sigmoid_offset must lie in [0,1]");
    if (!(c_lo < c_hi)) throw InvalidInput("c_lo must be < c_hi");
    if (!(psf_sigma > 0)) throw InvalidInput("psf_sigma must be > 0");
    if (psf_size < 1 || psf_size % 2 == 0) throw InvalidInput("psf_size must be odd");
    if (!(wiener_nsr >= 0)) throw InvalidInput("wiener_nsr must be >= 0");
  }

  bool operator==(const EnhanceConfig&) const = default;
};

namespace detail {

inline void require_plane(const RasterImage& plane, const char* who) {
  if (plane.channels() != 1) throw InvalidInput(std::string(who) + " expects a single-channel plane");
}

inline int histogram_bin(double v, int bins) noexcept {
  const int b = static_cast<int>(v * bins);
  return std::clamp(b, 0, bins - 1);
}

// Even split of `extent` pixels into `parts` contiguous ranges.
inline std::vector<int> split_points(int extent, int parts) {
  std::vector<int> pts(parts + 1);
  for (int k = 0; k <= parts; ++k) pts[k] = static_cast<int>(static_cast<long long>(k) * extent / parts);
  return pts;
}

// For each coordinate: lower neighbouring tile, upper tile and blend weight,
// interpolating between tile centres and clamping outside the outer centres.
struct Blend {
  std::vector<int> lo, hi;
  std::vector<double> weight;
};

inline Blend tile_blend(int extent, const std::vector<int>& pts) {
  const int tiles = static_cast<int>(pts.size()) - 1;
  std::vector<double> centre(tiles);
  for (int k = 0; k < tiles; ++k) centre[k] = (pts[k] + pts[k + 1] - 1) / 2.0;
  Blend b{std::vector<int>(extent), std::vector<int>(extent), std::vector<double>(extent)};
  int k = 0;
  for (int p = 0; p < extent; ++p) {
    while (k + 1 < tiles && centre[k + 1] <= p) ++k;
    if (p <= centre[0]) {
      b.lo[p] = b.hi[p] = 0;
      b.weight[p] = 0;
    } else if (k + 1 >= tiles) {
      b.lo[p] = b.hi[p] = tiles - 1;
      b.weight[p] = 0;
    } else {
      b.lo[p] = k;
      b.hi[p] = k + 1;
      b.weight[p] = (p - centre[k]) / (centre[k + 1] - centre[k]);
    }
  }
  return b;
}

}  // namespace detail

/// Clips every bin at `limit` and spreads the total excess evenly over all
/// bins in a single pass. Bins may end up above `limit` by excess / bins.
inline std::vector<double> clip_histogram(std::vector<double> hist, double limit) {
  if (!std::isfinite(limit)) return hist;
  double excess = 0;
  for (double& h : hist) {
    if (h > limit) {
      excess += h - limit;
      h = limit;
    }
  }
  const double share = excess / static_cast<double>(hist.size());
  for (double& h : hist) h += share;
  return hist;
}

/// Cumulative mapping bin -> [0,1] of a (possibly clipped) histogram.
inline std::vector<double> equalization_map(const std::vector<double>& hist) {
  const double total = std::accumulate(hist.begin(), hist.end(), 0.0);
  std::vector<double> map(hist.size(), 0.0);
  if (total <= 0) return map;
  double acc = 0;
  for (std::size_t b = 0; b < hist.size(); ++b) {
    acc += hist[b];
    map[b] = std::clamp(acc / total, 0.0, 1.0);
  }
  return map;
}

/// Contrast-limited adaptive histogram equalisation of one plane.
///
/// The plane is split into a rows x cols grid (shrunk so every tile holds at
/// least one pixel). Each tile's `bins`-bin histogram is clipped at
/// clip * tile_pixels / bins, the excess redistributed once, and turned into
/// a cumulative mapping. Output pixels blend the four nearest tile mappings
/// bilinearly by distance to tile centres.
inline RasterImage clahe(const RasterImage& plane, TileGrid tiles, double clip, int bins) {
  detail::require_plane(plane, "clahe");
  if (tiles.rows < 1 || tiles.cols < 1) throw InvalidInput("clahe tile grid must be >= 1x1");
  if (!(clip > 0)) throw InvalidInput("clahe clip must be > 0");
  if (bins < 2) throw InvalidInput("clahe needs at least 2 bins");

  const int w = plane.width(), h = plane.height();
  const int rows = std::min(tiles.rows, h);
  const int cols = std::min(tiles.cols, w);
  const auto ys = detail::split_points(h, rows);
  const auto xs = detail::split_points(w, cols);

  std::vector<int> bin_of(plane.pixel_count());
  for (std::size_t p = 0; p < bin_of.size(); ++p) bin_of[p] = detail::histogram_bin(plane.data()[p], bins);

  std::vector<std::vector<double>> maps(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      std::vector<double> hist(bins, 0.0);
      for (int y = ys[r]; y < ys[r + 1]; ++y) {
        for (int x = xs[c]; x < xs[c + 1]; ++x) hist[bin_of[static_cast<std::size_t>(y) * w + x]] += 1.0;
      }
      const double pixels = static_cast<double>(ys[r + 1] - ys[r]) * (xs[c + 1] - xs[c]);
      const double limit = std::isfinite(clip) ? clip * pixels / bins : std::numeric_limits<double>::infinity();
      maps[static_cast<std::size_t>(r) * cols + c] = equalization_map(clip_histogram(std::move(hist), limit));
    }
  }

  const auto by = detail::tile_blend(h, ys);
  const auto bx = detail::tile_blend(w, xs);
  std::vector<double> out(plane.pixel_count());
  auto map_of = [&](int r, int c) -> const std::vector<double>& { return maps[static_cast<std::size_t>(r) * cols + c]; };
  for (int y = 0; y < h; ++y) {
    const double wy = by.weight[y];
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      const int b = bin_of[p];
      const double wx = bx.weight[x];
      const double a = map_of(by.lo[y], bx.lo[x])[b], bb = map_of(by.lo[y], bx.hi[x])[b];
      const double d = map_of(by.hi[y], bx.lo[x])[b], e = map_of(by.hi[y], bx.hi[x])[b];
      const double top = a + wx * (bb - a);
      const double bottom = d + wx * (e - d);
      out[p] = std::clamp(top + wy * (bottom - top), 0.0, 1.0);
    }
  }
  return RasterImage(w, h, 1, std::move(out));
}

/// Logistic curve 1 / (1 + exp(c (offset - f))).
inline double sigmoid(double f, double c, double offset) noexcept { return 1.0 / (1.0 + std::exp(c * (offset - f))); }

/// Min-max normalised sigmoid stretch:
/// out = (psi(f) - psi(fmin)) / (psi(fmax) - psi(fmin)).
/// A plane with fmax - fmin < 1e-9 is returned unchanged.
inline RasterImage sigmoid_stretch(const RasterImage& plane, double c, double offset) {
  detail::require_plane(plane, "sigmoid_stretch");
  const auto [mn, mx] = std::minmax_element(plane.data().begin(), plane.data().end());
  const double fmin = *mn, fmax = *mx;
  if (fmax - fmin < 1e-9) return plane;
  const double lo = sigmoid(fmin, c, offset);
  const double span = sigmoid(fmax, c, offset) - lo;
  if (!(std::abs(span) > 0)) return plane;  // c == 0 flattens the curve
  std::vector<double> out(plane.pixel_count());
  for (std::size_t p = 0; p < out.size(); ++p) {
    const double f = plane.data()[p];
    if (f == fmin) {
      out[p] = 0.0;
    } else if (f == fmax) {
      out[p] = 1.0;
    } else {
      out[p] = std::clamp((sigmoid(f, c, offset) - lo) / span, 0.0, 1.0);
    }
  }
  return RasterImage(plane.width(), plane.height(), 1, std::move(out));
}

inline double mean_intensity(const RasterImage& img) {
  if (img.empty()) return 0.0;
  return std::accumulate(img.data().begin(), img.data().end(), 0.0) / static_cast<double>(img.data().size());
}

/// Absolute mean brightness error |mean(a) - mean(b)|.
inline double ambe(const RasterImage& original, const RasterImage& transformed) {
  if (original.width() != transformed.width() || original.height() != transformed.height() ||
      original.channels() != transformed.channels()) {
    throw InvalidInput("ambe operands differ in shape");
  }
  return std::abs(mean_intensity(original) - mean_intensity(transformed));
}

struct SigmoidFit {
  double c = 2.5;
  double ambe = 0;
  bool degenerate = false;  ///< constant plane: `c` is the fallback value
};

/// Chooses the sigmoid slope that best preserves mean brightness: a 64-point
/// scan of [lo, hi] followed by golden-section refinement around the best
/// grid point until the bracket is narrower than 1e-3. Ties go to smaller c.
inline SigmoidFit fit_sigmoid_c(const RasterImage& plane, double lo, double hi, double offset = 0.05,
                                double fallback_c = 2.5) {
  detail::require_plane(plane, "fit_sigmoid_c");
  if (!(lo < hi)) throw InvalidInput("fit_sigmoid_c needs lo < hi");

  const auto [mn, mx] = std::minmax_element(plane.data().begin(), plane.data().end());
  const double fmin = *mn, fmax = *mx;
  if (fmax - fmin < 1e-9) return {fallback_c, 0.0, true};

  const double target = mean_intensity(plane);
  const auto data = plane.data();
  auto objective = [&](double c) {
    const double base = sigmoid(fmin, c, offset);
    const double span = sigmoid(fmax, c, offset) - base;
    if (!(std::abs(span) > 0)) return 0.0;  // stretch degenerates to the identity
    double acc = 0;
    for (double f : data) acc += (sigmoid(f, c, offset) - base) / span;
    return std::abs(target - acc / static_cast<double>(data.size()));
  };

  constexpr int kGrid = 64;
  const double step = (hi - lo) / (kGrid - 1);
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kGrid; ++k) {
    const double v = objective(lo + k * step);
    if (v < best_val) {
      best_val = v;
      best = k;
    }
  }

  double a = lo + std::max(0, best - 1) * step;
  double b = lo + std::min(kGrid - 1, best + 1) * step;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  double f1 = objective(x1), f2 = objective(x2);
  while (b - a >= 1e-3) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = objective(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = objective(x2);
    }
  }
  const double refined = std::clamp(0.5 * (a + b), lo, hi);
  const double refined_val = objective(refined);
  const double grid_c = lo + best * step;
  if (refined_val < best_val || (refined_val == best_val && refined < grid_c)) return {refined, refined_val, false};
  return {grid_c, best_val, false};
}

/// Isotropic Gaussian point spread function of odd `size`, normalised to unit sum.
inline Grid<double> gaussian_psf(double sigma, int size) {
  if (!(sigma > 0)) throw InvalidInput("psf sigma must be > 0");
  if (size < 1 || size % 2 == 0) throw InvalidInput("psf size must be a positive odd number");
  const int r = size / 2;
  Grid<double> k(size, size);
  double sum = 0;
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      const double v = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      k(x + r, y + r) = v;
      sum += v;
    }
  }
  for (double& v : k.data()) v /= sum;
  return k;
}

/// Frequency-domain Wiener deconvolution
///   OUT = conj(H) / (|H|^2 + nsr) * F
/// The plane is symmetrically padded by the PSF radius before transforming
/// and cropped afterwards; the result is clamped to [0,1].
inline RasterImage wiener_deconvolve(const RasterImage& plane, const Grid<double>& psf, double nsr) {
  detail::require_plane(plane, "wiener_deconvolve");
  if (psf.width() % 2 == 0 || psf.height() % 2 == 0) throw InvalidInput("psf size must be odd");
  if (!(nsr >= 0)) throw InvalidInput("wiener nsr must be >= 0");

  const int w = plane.width(), h = plane.height();
  const int rx = psf.width() / 2, ry = psf.height() / 2;
  const int pw = w + 2 * rx, ph = h + 2 * ry;

  Grid<double> padded(pw, ph);
  for (int y = 0; y < ph; ++y) {
    const int sy = reflect_index(y - ry, h);
    for (int x = 0; x < pw; ++x) padded(x, y) = plane.at(reflect_index(x - rx, w), sy);
  }

  // PSF centre moved to the origin so the filter introduces no shift.
  Grid<double> kernel(pw, ph);
  for (int y = 0; y < psf.height(); ++y) {
    for (int x = 0; x < psf.width(); ++x) {
      const int kx = ((x - rx) % pw + pw) % pw;
      const int ky = ((y - ry) % ph + ph) % ph;
      kernel(kx, ky) += psf(x, y);
    }
  }

  auto image_spec = fft::forward(padded);
  const auto psf_spec = fft::forward(kernel);
  for (std::size_t i = 0; i < image_spec.bins.size(); ++i) {
    const std::complex<double> H = psf_spec.bins[i];
    const double denom = std::norm(H) + nsr;
    image_spec.bins[i] = denom > 0 ? std::conj(H) / denom * image_spec.bins[i] : std::complex<double>{};
  }
  const Grid<double> restored = fft::inverse(image_spec);

  std::vector<double> out(plane.pixel_count());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = restored(x + rx, y + ry);
      out[static_cast<std::size_t>(y) * w + x] = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    }
  }
  return RasterImage(w, h, 1, std::move(out));
}

/// Every intermediate of one enhancement run, for overlays and inspection.
struct EnhanceStages {
  YiqImage input;
  RasterImage equalized;   ///< after CLAHE
  RasterImage stretched;   ///< after the sigmoid stretch
  RasterImage deblurred;   ///< after Wiener deconvolution
  YiqImage output;         ///< deblurred luma with the input chroma
  RasterImage rgb;
  double sigmoid_c = 0;
  bool fit_degenerate = false;
};

/// rgb -> YIQ -> CLAHE(Y) -> sigmoid(Y) -> Wiener(Y) -> recombine with the
/// untouched I/Q planes -> rgb.
inline EnhanceStages enhance_stages(const RasterImage& img, const EnhanceConfig& cfg) {
  cfg.validate();
  EnhanceStages s;
  s.input = rgb_to_yiq(img);
  s.equalized = clahe(s.input.y, cfg.clahe_tiles, cfg.clahe_clip, cfg.hist_bins);
  s.sigmoid_c = cfg.sigmoid_c;
  if (cfg.fit_c) {
    const SigmoidFit fit = fit_sigmoid_c(s.equalized, cfg.c_lo, cfg.c_hi, cfg.sigmoid_offset, cfg.sigmoid_c);
    s.sigmoid_c = fit.c;
    s.fit_degenerate = fit.degenerate;
  }
  s.stretched = sigmoid_stretch(s.equalized, s.sigmoid_c, cfg.sigmoid_offset);
  s.deblurred = wiener_deconvolve(s.stretched, gaussian_psf(cfg.psf_sigma, cfg.psf_size), cfg.wiener_nsr);
  s.output = YiqImage{s.input.width, s.input.height, s.deblurred, s.input.i, s.input.q};
  s.rgb = yiq_to_rgb(s.output);
  return s;
}

inline RasterImage enhance_pipeline(const RasterImage& img, const EnhanceConfig& cfg) {
  return enhance_stages(img, cfg).rgb;
}

}  // namespace ropkit
