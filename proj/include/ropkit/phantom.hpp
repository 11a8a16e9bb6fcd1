#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "ropkit/error.hpp"
#include "ropkit/filter.hpp"
#include "ropkit/grid.hpp"
#include "ropkit/raster.hpp"
#include "ropkit/records.hpp"
#include "ropkit/rng.hpp"

// Synthetic fundus phantoms with exactly known ridge geometry.
//
// Layout: a circular orange fundus field, a bright optic disc, dark branching
// vessels confined to the disc-side (vascularised) region, and a bright arc
// (the ridge) on the boundary of that region. Degradations are applied after
// rendering so the annotation always describes the clean geometry.

namespace ropkit {

struct RidgeArcSpec {
  double center_x = 0.42;  ///< fraction of width
  double center_y = 0.5;   ///< fraction of height
  double radius = 0.3;     ///< fraction of min(width, height)
  double angle_span = 120; ///< degrees; the arc's mid-angle is drawn from the seed
  double width = 12;       ///< pixels
  double contrast = 0.2;   ///< added luma at the ridge core

  bool operator==(const RidgeArcSpec&) const = default;
};

struct DegradeSpec {
  double illum_gradient = 0;   ///< luma offset difference between left and right frame edges
  double blur_sigma = 0;       ///< pixels
  double noise_sigma = 0;      ///< additive Gaussian noise std-dev
  double contrast_factor = 1;  ///< scale of deviations from the channel mean, in (0,1]

  void validate() const {
    if (!(blur_sigma >= 0)) throw InvalidInput("blur_sigma must be >= 0");
    if (!(noise_sigma >= 0)) throw InvalidInput("noise_sigma must be >= 0");
    if (!(contrast_factor > 0 && contrast_factor <= 1)) throw InvalidInput("contrast_factor must lie in (0,1]");
    if (!std::isfinite(illum_gradient)) throw InvalidInput("illum_gradient must be finite");
  }

  bool operator==(const DegradeSpec&) const = default;
};

struct PhantomSpec {
  std::uint64_t seed = 1;
  int width = 1024;
  int height = 800;
  double disc_x = 0.42;
  double disc_y = 0.5;
  double disc_radius = 0.06;
  int vessel_count = 8;
  RidgeArcSpec ridge;
  DegradeSpec degrade;

  void validate() const {
    auto fraction = [](double v, const char* name) {
      if (!(v > 0 && v < 1)) throw InvalidInput(std::string(name) + " must lie in (0,1)");
    };
    if (width < 16 || height < 16) throw InvalidInput("phantom must be at least 16x16");
    fraction(disc_x, "disc_center.x");
    fraction(disc_y, "disc_center.y");
    fraction(disc_radius, "disc_radius");
    fraction(ridge.center_x, "ridge_arc.center.x");
    fraction(ridge.center_y, "ridge_arc.center.y");
    fraction(ridge.radius, "ridge_arc.radius");
    if (!(ridge.angle_span > 0 && ridge.angle_span <= 360)) throw InvalidInput("ridge_arc.angle_span must lie in (0,360]");
    if (!(ridge.width > 0)) throw InvalidInput("ridge_arc.width must be > 0");
    if (!(ridge.contrast >= 0 && ridge.contrast <= 1)) throw InvalidInput("ridge_arc.contrast must lie in [0,1]");
    if (vessel_count < 0) throw InvalidInput("vessel_count must be >= 0");
    degrade.validate();
  }

  bool operator==(const PhantomSpec&) const = default;
};

struct Phantom {
  RasterImage image;  ///< degraded RGB
  RasterImage clean;  ///< RGB before degradation
  AnnotationRecord annotation;
  Bitmap ridge_mask;
  Bitmap vessel_mask;
  double arc_mid_angle = 0;  ///< radians, image coordinates (y down)
};

namespace phantom_detail {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kEdgeSigma = 0.4;  // ridge band edge softness, px
inline constexpr std::array<double, 3> kFundus{0.62, 0.30, 0.12};
inline constexpr std::array<double, 3> kDisc{0.95, 0.80, 0.55};
inline constexpr std::array<double, 3> kVesselDarkening{0.35, 0.60, 0.60};

inline double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3 - 2 * t);
}

inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2 * kPi);
  if (a < 0) a += 2 * kPi;
  return a - kPi;
}

struct Geometry {
  double fundus_cx, fundus_cy, fundus_r;
  double disc_cx, disc_cy, disc_r;
  double ridge_cx, ridge_cy, ridge_r;
  double vessel_limit;  // vessels stay strictly inside this radius around the ridge centre
};

inline Geometry geometry(const PhantomSpec& s) {
  const double m = std::min(s.width, s.height);
  Geometry g{};
  g.fundus_cx = s.width / 2.0;
  g.fundus_cy = s.height / 2.0;
  g.fundus_r = 0.48 * m;
  g.disc_cx = s.disc_x * s.width;
  g.disc_cy = s.disc_y * s.height;
  g.disc_r = s.disc_radius * m;
  g.ridge_cx = s.ridge.center_x * s.width;
  g.ridge_cy = s.ridge.center_y * s.height;
  g.ridge_r = s.ridge.radius * m;
  g.vessel_limit = g.ridge_r - s.ridge.width / 2 - 8;
  return g;
}

struct Segment {
  double x, y, angle, width;
  int generation;
};

// Recursive branching random walk from the disc rim; returns soft coverage.
inline Grid<double> render_vessels(const PhantomSpec& s, const Geometry& g, Xoshiro256& rng) {
  Grid<double> cover(s.width, s.height);
  auto stamp = [&](double cx, double cy, double radius) {
    const int x0 = std::max(0, static_cast<int>(cx - radius - 1)), x1 = std::min(s.width - 1, static_cast<int>(cx + radius + 1));
    const int y0 = std::max(0, static_cast<int>(cy - radius - 1)), y1 = std::min(s.height - 1, static_cast<int>(cy + radius + 1));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
        const double c = std::clamp(radius + 0.5 - d, 0.0, 1.0);
        if (c > cover(x, y)) cover(x, y) = c;
      }
    }
  };

  std::vector<Segment> stack;
  for (int k = 0; k < s.vessel_count; ++k) {
    const double a = 2 * kPi * (k + rng.uniform(0.2, 0.8)) / std::max(1, s.vessel_count);
    stack.push_back({g.disc_cx + g.disc_r * std::cos(a), g.disc_cy + g.disc_r * std::sin(a), a, rng.uniform(5.0, 7.5), 0});
  }
  constexpr double kStep = 2.5;
  while (!stack.empty()) {
    Segment seg = stack.back();
    stack.pop_back();
    for (int step = 0; step < 2000; ++step) {
      const double radius = seg.width / 2;
      const double reach = std::hypot(seg.x - g.ridge_cx, seg.y - g.ridge_cy) + radius + 1;
      const double rim = std::hypot(seg.x - g.fundus_cx, seg.y - g.fundus_cy) + radius;
      if (reach >= g.vessel_limit || rim >= g.fundus_r - 4) break;
      stamp(seg.x, seg.y, radius);
      seg.angle += rng.normal(0.0, 0.08);
      seg.x += kStep * std::cos(seg.angle);
      seg.y += kStep * std::sin(seg.angle);
      if (seg.generation < 2 && step > 15 && rng.uniform() < 0.015) {
        const double turn = rng.uniform(0.35, 0.8) * (rng.uniform() < 0.5 ? -1 : 1);
        stack.push_back({seg.x, seg.y, seg.angle + turn, seg.width * 0.7, seg.generation + 1});
        seg.angle -= 0.3 * turn;
        seg.width *= 0.85;
      }
    }
  }
  return cover;
}

}  // namespace phantom_detail

/// Applies, in order: contrast scaling about each channel's mean, a linear
/// left-to-right illumination ramp, Gaussian blur and additive Gaussian noise.
/// The result is clamped to [0,1].
inline RasterImage degrade(const RasterImage& img, const DegradeSpec& d, std::uint64_t seed) {
  d.validate();
  const int w = img.width(), h = img.height(), ch = img.channels();
  Xoshiro256 rng(seed ^ 0xD1B54A32D192ED03ULL);
  std::vector<Grid<double>> planes;
  for (int c = 0; c < ch; ++c) planes.push_back(img.to_grid(c));

  for (auto& p : planes) {
    if (d.contrast_factor != 1) {
      const double mean = std::accumulate(p.data().begin(), p.data().end(), 0.0) / static_cast<double>(p.size());
      for (double& v : p.data()) v = mean + d.contrast_factor * (v - mean);
    }
    if (d.illum_gradient != 0) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) p(x, y) += d.illum_gradient * ((w > 1 ? double(x) / (w - 1) : 0.5) - 0.5);
      }
    }
    if (d.blur_sigma > 0) p = gaussian_blur(p, d.blur_sigma);
  }
  if (d.noise_sigma > 0) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (auto& p : planes) p(x, y) += rng.normal(0.0, d.noise_sigma);
      }
    }
  }

  std::vector<double> out(img.data().size());
  for (int c = 0; c < ch; ++c) {
    const auto src = planes[c].data();
    for (std::size_t i = 0; i < src.size(); ++i) out[i * ch + c] = std::clamp(src[i], 0.0, 1.0);
  }
  return RasterImage(w, h, ch, std::move(out));
}

/// Renders a phantom. Identical specs (seed included) give bit-identical output.
inline Phantom generate_phantom(const PhantomSpec& spec, const std::string& image_id = "phantom") {
  using namespace phantom_detail;
  spec.validate();
  const int w = spec.width, h = spec.height;
  const Geometry g = geometry(spec);
  Xoshiro256 rng(spec.seed);

  Phantom out;
  out.arc_mid_angle = rng.uniform(-kPi, kPi);
  const double half_span = spec.ridge.angle_span * kPi / 360.0;

  const Grid<double> vessels = render_vessels(spec, g, rng);
  out.vessel_mask = Bitmap(w, h);
  for (std::size_t i = 0; i < vessels.size(); ++i) out.vessel_mask.data()[i] = vessels.data()[i] > 0 ? 1 : 0;

  out.ridge_mask = Bitmap(w, h);
  const double half_width = spec.ridge.width / 2;
  std::vector<double> rgb(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const double fd = std::hypot(px - g.fundus_cx, py - g.fundus_cy);
      const double field = 1.0 - smoothstep(g.fundus_r - 2, g.fundus_r + 2, fd);
      const double vignette = 1.0 - 0.25 * std::min(1.0, (fd / g.fundus_r) * (fd / g.fundus_r));
      const double disc = 1.0 - smoothstep(g.disc_r - 3, g.disc_r + 3, std::hypot(px - g.disc_cx, py - g.disc_cy));

      // Ridge band: flat core with soft edges, across and along the arc.
      const double rd = std::hypot(px - g.ridge_cx, py - g.ridge_cy);
      const double radial = std::abs(rd - g.ridge_r);
      const double dtheta = std::abs(wrap_angle(std::atan2(py - g.ridge_cy, px - g.ridge_cx) - out.arc_mid_angle));
      const double along = (dtheta - half_span) * g.ridge_r;  // arc length past the end, <= 0 inside
      const double across_w = 0.5 * std::erfc((radial - half_width) / (std::numbers::sqrt2 * kEdgeSigma));
      const double along_w = spec.ridge.angle_span >= 360 ? 1.0 : 0.5 * std::erfc(along / (std::numbers::sqrt2 * kEdgeSigma));
      const double ridge = across_w * along_w * field;
      if (radial <= half_width && dtheta <= half_span && field > 0.5) out.ridge_mask(x, y) = 1;

      const double v = vessels(x, y);
      for (int c = 0; c < 3; ++c) {
        double value = kFundus[c] * vignette;
        value += disc * (kDisc[c] - value);
        value *= 1.0 - kVesselDarkening[c] * v;
        value = field * value + spec.ridge.contrast * ridge;
        rgb[(static_cast<std::size_t>(y) * w + x) * 3 + c] = std::clamp(value, 0.0, 1.0);
      }
    }
  }
  out.clean = RasterImage(w, h, 3, std::move(rgb));
  out.image = degrade(out.clean, spec.degrade, spec.seed);
  out.annotation = make_annotation(image_id, out.ridge_mask);
  return out;
}

/// Specs for a batch of `n` phantoms: seeds base.seed + i, and the ridge
/// contrast spread linearly over [contrast_lo, contrast_hi] (both ends
/// included) so the batch spans subtle to prominent ridges.
inline std::vector<PhantomSpec> phantom_series(const PhantomSpec& base, int n, double contrast_lo, double contrast_hi) {
  if (n < 0) throw InvalidInput("phantom count must be >= 0");
  std::vector<PhantomSpec> specs;
  for (int i = 0; i < n; ++i) {
    PhantomSpec s = base;
    s.seed = base.seed + static_cast<std::uint64_t>(i);
    s.ridge.contrast = n > 1 ? contrast_lo + (contrast_hi - contrast_lo) * i / (n - 1) : contrast_lo;
    specs.push_back(s);
  }
  return specs;
}

}  // namespace ropkit
