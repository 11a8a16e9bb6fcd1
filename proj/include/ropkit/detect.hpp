#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ropkit/box.hpp"
#include "ropkit/error.hpp"
#include "ropkit/filter.hpp"
#include "ropkit/grid.hpp"
#include "ropkit/raster.hpp"
#include "ropkit/records.hpp"

// Classical ridge detector: multiscale Hessian (Frangi-style) bright-ridge
// response, percentile threshold, 8-connected components.

namespace ropkit {

enum class Polarity { BrightRidge };

struct DetectorConfig {
  std::vector<double> scales{2.0, 4.0, 8.0};
  Polarity polarity = Polarity::BrightRidge;
  double threshold_percentile = 99.0;
  int min_area = 200;
  int max_detections = 5;
  int fov_margin = 16;  ///< px eroded from the field of view; < 0 disables FOV masking

  void validate() const {
    if (scales.empty()) throw InvalidInput("detector needs at least one scale");
    for (std::size_t i = 0; i < scales.size(); ++i) {
      if (!(scales[i] > 0)) throw InvalidInput("detector scales must be > 0");
      if (i > 0 && !(scales[i] > scales[i - 1])) throw InvalidInput("detector scales must be ascending");
    }
    if (!(threshold_percentile > 0 && threshold_percentile < 100)) {
      throw InvalidInput("threshold_percentile must lie in (0,100)");
    }
    if (min_area < 1) throw InvalidInput("min_area must be >= 1");
    if (max_detections < 1) throw InvalidInput("max_detections must be >= 1");
    if (fov_margin > 10000) throw InvalidInput("fov_margin is unreasonably large");
  }

  bool operator==(const DetectorConfig&) const = default;
};

inline constexpr double kFrangiBeta = 0.5;

/// Scale-normalised Hessian eigenvalues, sorted so |l1| <= |l2|.
struct HessianEigen {
  Grid<double> l1;
  Grid<double> l2;
};

inline HessianEigen hessian_eigen(const RasterImage& plane, double sigma) {
  if (plane.channels() != 1) throw InvalidInput("hessian expects a single-channel plane");
  if (!(sigma > 0)) throw InvalidInput("hessian sigma must be > 0");
  const Grid<double> s = gaussian_blur(plane.to_grid(), sigma);
  const int w = s.width(), h = s.height();
  HessianEigen e{Grid<double>(w, h), Grid<double>(w, h)};
  const double norm = sigma * sigma;
  for (int y = 0; y < h; ++y) {
    const int ym = reflect_index(y - 1, h), yp = reflect_index(y + 1, h);
    for (int x = 0; x < w; ++x) {
      const int xm = reflect_index(x - 1, w), xp = reflect_index(x + 1, w);
      const double c = s(x, y);
      const double dxx = norm * (s(xp, y) - 2 * c + s(xm, y));
      const double dyy = norm * (s(x, yp) - 2 * c + s(x, ym));
      const double dxy = norm * 0.25 * (s(xp, yp) - s(xp, ym) - s(xm, yp) + s(xm, ym));
      const double mean = 0.5 * (dxx + dyy);
      const double root = std::sqrt(0.25 * (dxx - dyy) * (dxx - dyy) + dxy * dxy);
      double a = mean + root, b = mean - root;
      if (std::abs(a) > std::abs(b)) std::swap(a, b);
      e.l1(x, y) = a;
      e.l2(x, y) = b;
    }
  }
  return e;
}

/// Frangi-style bright-ridge measure at one scale:
///   0 where l2 >= 0, else exp(-Rb^2 / 2 beta^2) * (1 - exp(-S^2 / 2 gamma^2))
/// with Rb = l1/l2, S = sqrt(l1^2 + l2^2), beta = 0.5 and gamma half the
/// largest S on the plane. A flat plane yields zeros.
inline Grid<double> hessian_ridge_response(const RasterImage& plane, double sigma) {
  const HessianEigen e = hessian_eigen(plane, sigma);
  const int w = plane.width(), h = plane.height();
  Grid<double> strength(w, h);
  double max_s = 0;
  for (std::size_t i = 0; i < strength.size(); ++i) {
    const double a = e.l1.data()[i], b = e.l2.data()[i];
    strength.data()[i] = std::sqrt(a * a + b * b);
    max_s = std::max(max_s, strength.data()[i]);
  }
  Grid<double> out(w, h);
  // Guards against round-off curvature on constant planes.
  if (max_s < 1e-12) return out;
  const double gamma = 0.5 * max_s;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double l1 = e.l1.data()[i], l2 = e.l2.data()[i];
    if (l2 >= 0) continue;
    const double rb = l1 / l2;
    const double s = strength.data()[i];
    const double v = std::exp(-rb * rb / (2 * kFrangiBeta * kFrangiBeta)) * (1 - std::exp(-s * s / (2 * gamma * gamma)));
    out.data()[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

/// Pixel-wise maximum of the single-scale responses.
inline Grid<double> multiscale_ridge_map(const RasterImage& plane, const std::vector<double>& scales) {
  if (scales.empty()) throw InvalidInput("multiscale_ridge_map needs at least one scale");
  Grid<double> best = hessian_ridge_response(plane, scales.front());
  for (std::size_t k = 1; k < scales.size(); ++k) {
    const Grid<double> r = hessian_ridge_response(plane, scales[k]);
    for (std::size_t i = 0; i < best.size(); ++i) best.data()[i] = std::max(best.data()[i], r.data()[i]);
  }
  return best;
}

/// Nearest-rank percentile (p in (0,100)) of the strictly positive values.
inline std::optional<double> positive_percentile(const Grid<double>& g, double p) {
  std::vector<double> vals;
  for (double v : g.data()) {
    if (v > 0) vals.push_back(v);
  }
  if (vals.empty()) return std::nullopt;
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(vals.size())));
  const std::size_t k = std::clamp<std::size_t>(rank, 1, vals.size()) - 1;
  std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(k), vals.end());
  return vals[k];
}

/// 8-connected components of `mask`; each is a list of linear pixel indices.
inline std::vector<std::vector<std::size_t>> connected_components(const Bitmap& mask) {
  const int w = mask.width(), h = mask.height();
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<std::vector<std::size_t>> comps;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask.data()[start] || seen[start]) continue;
    std::vector<std::size_t> comp;
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      comp.push_back(p);
      const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
          if (mask.data()[q] && !seen[q]) {
            seen[q] = 1;
            stack.push_back(q);
          }
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

/// Thresholds the response at the configured percentile of its positive
/// values, keeps 8-connected components of at least `min_area` pixels and
/// returns them by descending mean response (at most `max_detections`).
inline std::vector<Detection> propose_regions(const Grid<double>& response, const DetectorConfig& cfg,
                                              const std::string& image_id = {}) {
  cfg.validate();
  const auto threshold = positive_percentile(response, cfg.threshold_percentile);
  if (!threshold) return {};

  Bitmap above(response.width(), response.height());
  for (std::size_t i = 0; i < response.size(); ++i) {
    above.data()[i] = (response.data()[i] > 0 && response.data()[i] >= *threshold) ? 1 : 0;
  }

  struct Candidate {
    std::vector<std::size_t> pixels;
    double score;
  };
  std::vector<Candidate> candidates;
  for (auto& comp : connected_components(above)) {
    if (comp.size() < static_cast<std::size_t>(cfg.min_area)) continue;
    double sum = 0;
    for (std::size_t p : comp) sum += response.data()[p];
    const double score = std::clamp(sum / static_cast<double>(comp.size()), 0.0, 1.0);
    candidates.push_back({std::move(comp), score});
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  if (candidates.size() > static_cast<std::size_t>(cfg.max_detections)) candidates.resize(cfg.max_detections);

  std::vector<Detection> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    Detection d;
    d.image_id = image_id;
    d.score = c.score;
    d.mask = Bitmap(response.width(), response.height());
    for (std::size_t p : c.pixels) d.mask.data()[p] = 1;
    d.box = *tight_box(d.mask);
    out.push_back(std::move(d));
  }
  return out;
}

/// Otsu threshold of values in [lo, hi] over 256 bins.
inline double otsu_threshold(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double lo = *mn, hi = *mx;
  if (hi - lo < 1e-12) return lo;
  constexpr int kBins = 256;
  std::vector<double> hist(kBins, 0.0);
  for (double v : values) hist[std::min(kBins - 1, static_cast<int>((v - lo) / (hi - lo) * kBins))] += 1;
  const double total = static_cast<double>(values.size());
  double sum_all = 0;
  for (int b = 0; b < kBins; ++b) sum_all += b * hist[b];
  double w0 = 0, sum0 = 0, best = -1;
  int best_b = 0;
  for (int b = 0; b < kBins - 1; ++b) {
    w0 += hist[b];
    sum0 += b * hist[b];
    const double w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_b = b;
    }
  }
  return lo + (best_b + 1) * (hi - lo) / kBins;
}

/// Square erosion of radius r (separable running minimum).
inline Bitmap erode(const Bitmap& mask, int r) {
  if (r <= 0) return mask;
  const int w = mask.width(), h = mask.height();
  Bitmap tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool all = true;
      for (int k = -r; k <= r && all; ++k) {
        const int xx = x + k;
        all = xx >= 0 && xx < w && mask(xx, y);
      }
      tmp(x, y) = all ? 1 : 0;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool all = true;
      for (int k = -r; k <= r && all; ++k) {
        const int yy = y + k;
        all = yy >= 0 && yy < h && tmp(x, yy);
      }
      out(x, y) = all ? 1 : 0;
    }
  }
  return out;
}

/// Field-of-view mask of a fundus photograph. The retina is red-dominant and
/// the surround achromatic, so colour images are split by Otsu on the
/// smoothed YIQ in-phase (I) plane, which additive illumination leaves
/// unchanged; gray images fall back to smoothed luma. The mask is eroded by
/// `margin` px so the field rim itself is excluded.
inline Bitmap field_of_view(const RasterImage& img, int margin) {
  Grid<double> cue;
  if (img.channels() == 3) {
    const YiqImage yiq = rgb_to_yiq(img);
    cue = Grid<double>(img.width(), img.height(), yiq.i);
  } else {
    cue = img.to_grid();
  }
  cue = gaussian_blur(cue, 4.0);
  const double t = otsu_threshold(cue.data());
  Bitmap fov(img.width(), img.height());
  for (std::size_t i = 0; i < fov.size(); ++i) fov.data()[i] = cue.data()[i] > t ? 1 : 0;
  return erode(fov, margin);
}

/// Ridge response of an image: multiscale map of the luma plane, zeroed
/// outside the eroded field of view unless FOV masking is disabled.
inline Grid<double> ridge_response(const RasterImage& img, const DetectorConfig& cfg) {
  cfg.validate();
  Grid<double> response = multiscale_ridge_map(luma(img), cfg.scales);
  if (cfg.fov_margin >= 0) {
    const Bitmap fov = field_of_view(img, cfg.fov_margin);
    for (std::size_t i = 0; i < response.size(); ++i) {
      if (!fov.data()[i]) response.data()[i] = 0;
    }
  }
  return response;
}

/// Runs the detector on an image: ridge response, then region proposals.
inline std::vector<Detection> detect_ridges(const RasterImage& img, const DetectorConfig& cfg,
                                            const std::string& image_id = {}) {
  return propose_regions(ridge_response(img, cfg), cfg, image_id);
}

}  // namespace ropkit
