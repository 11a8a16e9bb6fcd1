#pragma once

// Reference implementations written separately from the library, used to
// cross-check it. They favour obviousness over speed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "ropkit/box.hpp"
#include "ropkit/raster.hpp"
#include "ropkit/rng.hpp"

namespace oracle {

// Eq. 1 evaluated literally for one value, given the plane extremes.
inline double eq1(double f, double fmin, double fmax, double c, double offset) {
  auto psi = [&](double v) { return 1.0 / (1.0 + std::exp(c * (offset - v))); };
  return (psi(f) - psi(fmin)) / (psi(fmax) - psi(fmin));
}

// Global histogram equalization: value -> fraction of pixels whose bin is at
// or below the value's bin.
inline std::vector<double> global_he(const std::vector<double>& plane, int bins) {
  auto bin_of = [&](double v) { return std::min(bins - 1, static_cast<int>(std::floor(v * bins))); };
  std::vector<long> count(bins, 0);
  for (double v : plane) ++count[bin_of(v)];
  std::vector<double> out;
  out.reserve(plane.size());
  for (double v : plane) {
    long below = 0;
    for (int b = 0; b <= bin_of(v); ++b) below += count[b];
    out.push_back(double(below) / double(plane.size()));
  }
  return out;
}

struct ScoredBox {
  ropkit::Box box;
  double score;
};

inline double overlap(const ropkit::Box& a, const ropkit::Box& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  return inter > 0 ? inter / (a.w * a.h + b.w * b.h - inter) : 0.0;
}

// NMS as a fixed point: a box survives iff no higher-priority survivor
// overlaps it above `thresh`. Solved by sweeping until nothing changes;
// returns input indices in priority order.
inline std::vector<std::size_t> nms(const std::vector<ScoredBox>& boxes, double thresh) {
  const std::size_t n = boxes.size();
  auto before = [&](std::size_t a, std::size_t b) {
    if (boxes[a].score != boxes[b].score) return boxes[a].score > boxes[b].score;
    if (boxes[a].box.y != boxes[b].box.y) return boxes[a].box.y < boxes[b].box.y;
    if (boxes[a].box.x != boxes[b].box.x) return boxes[a].box.x < boxes[b].box.x;
    return a < b;
  };
  std::vector<char> keep(n, 1);
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      bool suppressed = false;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i && keep[j] && before(j, i) && overlap(boxes[j].box, boxes[i].box) > thresh) suppressed = true;
      }
      if (keep[i] != !suppressed) {
        keep[i] = !suppressed;
        changed = true;
      }
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) out.push_back(i);
  }
  std::sort(out.begin(), out.end(), before);
  return out;
}

// Exhaustive matching for one image. Enumerates every assignment of
// predictions (in descending score order) to distinct ground truths at
// IoU >= thresh, or to nothing, and returns the one whose per-prediction IoU
// vector is lexicographically largest. Entry k of the result is the GT index
// of the k-th prediction by score, or -1.
inline std::vector<int> best_assignment(const std::vector<ScoredBox>& preds, const std::vector<ropkit::Box>& gts,
                                        double thresh) {
  std::vector<std::size_t> order(preds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return preds[a].score > preds[b].score; });

  std::vector<int> current(preds.size(), -1), best;
  std::vector<double> cur_key(preds.size(), 0.0), best_key;
  std::vector<char> used(gts.size(), 0);
  std::function<void(std::size_t)> search = [&](std::size_t k) {
    if (k == order.size()) {
      if (best.empty() || cur_key > best_key) {
        best = current;
        best_key = cur_key;
      }
      return;
    }
    current[order[k]] = -1;
    cur_key[k] = 0.0;
    search(k + 1);
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double v = overlap(preds[order[k]].box, gts[g]);
      if (used[g] || v < thresh) continue;
      used[g] = 1;
      current[order[k]] = static_cast<int>(g);
      cur_key[k] = v;
      search(k + 1);
      used[g] = 0;
    }
    current[order[k]] = -1;
  };
  search(0);
  return best;
}

// Largest number of prediction/GT pairs at IoU >= thresh (any assignment).
inline int max_cardinality(const std::vector<ScoredBox>& preds, const std::vector<ropkit::Box>& gts, double thresh) {
  std::vector<char> used(gts.size(), 0);
  std::function<int(std::size_t)> go = [&](std::size_t k) -> int {
    if (k == preds.size()) return 0;
    int best = go(k + 1);
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || overlap(preds[k].box, gts[g]) < thresh) continue;
      used[g] = 1;
      best = std::max(best, 1 + go(k + 1));
      used[g] = 0;
    }
    return best;
  };
  return go(0);
}

inline ropkit::RasterImage random_plane(ropkit::Xoshiro256& rng, int w, int h) {
  std::vector<double> v(static_cast<std::size_t>(w) * h);
  for (double& x : v) x = rng.uniform();
  return ropkit::RasterImage(w, h, 1, std::move(v));
}

// Smooth test plane in [0.1, 0.9]: low-frequency waves plus soft blobs.
inline ropkit::RasterImage smooth_plane(int w, int h) {
  std::vector<double> v(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double u = double(x) / w, t = double(y) / h;
      double s = 0.5 + 0.15 * std::sin(2 * M_PI * (1.5 * u + 0.5 * t)) + 0.1 * std::cos(2 * M_PI * 2 * t);
      s += 0.12 * std::exp(-((u - 0.3) * (u - 0.3) + (t - 0.6) * (t - 0.6)) / 0.01);
      s -= 0.1 * std::exp(-((u - 0.7) * (u - 0.7) + (t - 0.3) * (t - 0.3)) / 0.02);
      v[static_cast<std::size_t>(y) * w + x] = std::clamp(s, 0.1, 0.9);
    }
  }
  return ropkit::RasterImage(w, h, 1, std::move(v));
}

inline double psnr(const ropkit::RasterImage& a, const ropkit::RasterImage& b, int border) {
  double se = 0;
  long n = 0;
  for (int y = border; y < a.height() - border; ++y) {
    for (int x = border; x < a.width() - border; ++x) {
      const double d = a.at(x, y) - b.at(x, y);
      se += d * d;
      ++n;
    }
  }
  const double mse = se / double(n);
  return mse > 0 ? 10 * std::log10(1.0 / mse) : 300.0;
}

}  // namespace oracle
