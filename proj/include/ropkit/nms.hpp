#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "ropkit/box.hpp"
#include "ropkit/records.hpp"

namespace ropkit {

inline constexpr double kDefaultNmsThreshold = 0.3;

/// Priority order used by NMS: score descending, then smaller y, then
/// smaller x, then input position.
template <typename T>
std::vector<std::size_t> nms_priority(const std::vector<T>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto &da = dets[a], &db = dets[b];
    if (da.score != db.score) return da.score > db.score;
    if (da.box.y != db.box.y) return da.box.y < db.box.y;
    return da.box.x < db.box.x;
  });
  return order;
}

/// Greedy non-maximum suppression over boxes. Works on anything with
/// `.box` and `.score` (Detection, PredictionRecord). Output is in emission
/// order; kept elements are copied unchanged.
template <typename T>
std::vector<T> nms(const std::vector<T>& dets, double thresh = kDefaultNmsThreshold) {
  std::vector<T> kept;
  std::vector<bool> removed(dets.size(), false);
  for (std::size_t i : nms_priority(dets)) {
    if (removed[i]) continue;
    kept.push_back(dets[i]);
    removed[i] = true;
    for (std::size_t j = 0; j < dets.size(); ++j) {
      if (!removed[j] && iou(dets[i].box, dets[j].box) > thresh) removed[j] = true;
    }
  }
  return kept;
}

}  // namespace ropkit
