#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ropkit/box.hpp"
#include "ropkit/error.hpp"
#include "ropkit/grid.hpp"
#include "ropkit/records.hpp"

// Object-level and pixel-level scoring of ridge detections.

namespace ropkit {

inline constexpr double kDefaultMatchIou = 0.5;

struct MatchPair {
  std::size_t pred_idx;  ///< index into the prediction list passed to match_detections
  std::size_t gt_idx;    ///< index into the ground-truth list
  double iou;
};

struct ImageMatch {
  std::string image_id;
  std::vector<MatchPair> pairs;
  std::vector<std::size_t> false_positives;  ///< prediction indices
  std::vector<std::size_t> false_negatives;  ///< ground-truth indices
  std::optional<std::size_t> top_prediction;
  bool top_is_true_positive = false;

  std::size_t tp() const noexcept { return pairs.size(); }
  std::size_t fp() const noexcept { return false_positives.size(); }
  std::size_t fn() const noexcept { return false_negatives.size(); }
};

struct MatchReport {
  std::vector<ImageMatch> images;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

/// Greedy matching per image: predictions in descending score order each
/// claim the still-unmatched ground truth with the highest IoU, provided that
/// IoU reaches `iou_thresh`.
///
/// `image_ids` fixes the evaluated image set (images without predictions or
/// ground truth still count). When empty, the set is every id seen in `gts`
/// then `preds`, in first-appearance order.
template <typename Pred>
MatchReport match_detections(const std::vector<Pred>& preds, const std::vector<AnnotationRecord>& gts,
                             double iou_thresh = kDefaultMatchIou, std::vector<std::string> image_ids = {}) {
  if (image_ids.empty()) {
    for (const auto& g : gts) {
      if (std::find(image_ids.begin(), image_ids.end(), g.image_id) == image_ids.end()) image_ids.push_back(g.image_id);
    }
    for (const auto& p : preds) {
      if (std::find(image_ids.begin(), image_ids.end(), p.image_id) == image_ids.end()) image_ids.push_back(p.image_id);
    }
  }
  std::map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < image_ids.size(); ++i) {
    if (!slot.emplace(image_ids[i], i).second) throw InvalidInput("duplicate image id '" + image_ids[i] + "'");
  }
  std::vector<std::vector<std::size_t>> pred_by(image_ids.size()), gt_by(image_ids.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    auto it = slot.find(preds[i].image_id);
    if (it == slot.end()) throw InvalidInput("prediction for unknown image '" + preds[i].image_id + "'");
    pred_by[it->second].push_back(i);
  }
  for (std::size_t i = 0; i < gts.size(); ++i) {
    auto it = slot.find(gts[i].image_id);
    if (it == slot.end()) throw InvalidInput("annotation for unknown image '" + gts[i].image_id + "'");
    gt_by[it->second].push_back(i);
  }

  MatchReport report;
  for (std::size_t s = 0; s < image_ids.size(); ++s) {
    ImageMatch im;
    im.image_id = image_ids[s];
    auto order = pred_by[s];
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
    std::vector<bool> taken(gt_by[s].size(), false);
    for (std::size_t pi : order) {
      std::optional<std::size_t> best;
      double best_iou = -1;
      for (std::size_t k = 0; k < gt_by[s].size(); ++k) {
        if (taken[k]) continue;
        const double v = iou(preds[pi].box, gts[gt_by[s][k]].box);
        if (v > best_iou) {
          best_iou = v;
          best = k;
        }
      }
      if (best && best_iou >= iou_thresh) {
        taken[*best] = true;
        im.pairs.push_back({pi, gt_by[s][*best], best_iou});
      } else {
        im.false_positives.push_back(pi);
      }
    }
    for (std::size_t k = 0; k < gt_by[s].size(); ++k) {
      if (!taken[k]) im.false_negatives.push_back(gt_by[s][k]);
    }
    if (!order.empty()) {
      im.top_prediction = order.front();
      im.top_is_true_positive = std::any_of(im.pairs.begin(), im.pairs.end(),
                                            [&](const MatchPair& m) { return m.pred_idx == order.front(); });
    }
    report.tp += im.tp();
    report.fp += im.fp();
    report.fn += im.fn();
    report.images.push_back(std::move(im));
  }
  return report;
}

struct ObjectMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  double image_accuracy = 0;  ///< share of images whose top-scoring detection is a TP
};

inline double safe_ratio(double num, double den) noexcept { return den > 0 ? num / den : 0.0; }

/// Harmonic mean of precision and recall, 0 when both are 0.
inline double f1_score(double precision, double recall) noexcept {
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

inline ObjectMetrics object_metrics(const MatchReport& report) {
  ObjectMetrics m;
  m.precision = safe_ratio(double(report.tp), double(report.tp + report.fp));
  m.recall = safe_ratio(double(report.tp), double(report.tp + report.fn));
  m.f1 = f1_score(m.precision, m.recall);
  const auto hits = std::count_if(report.images.begin(), report.images.end(),
                                  [](const ImageMatch& im) { return im.top_is_true_positive; });
  m.image_accuracy = safe_ratio(double(hits), double(report.images.size()));
  return m;
}

struct PixelMetrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double sensitivity = 0, specificity = 0, ppv = 0, npv = 0;
};

inline PixelMetrics pixel_rates(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  PixelMetrics m{tp, fp, fn, tn};
  m.sensitivity = safe_ratio(double(tp), double(tp + fn));
  m.specificity = safe_ratio(double(tn), double(tn + fp));
  m.ppv = safe_ratio(double(tp), double(tp + fp));
  m.npv = safe_ratio(double(tn), double(tn + fn));
  return m;
}

inline PixelMetrics pixel_metrics(const Bitmap& pred, const Bitmap& gt) {
  if (!pred.same_shape(gt)) throw InvalidInput("pixel_metrics masks differ in size");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred.data()[i] != 0, g = gt.data()[i] != 0;
    if (p && g) ++tp;
    else if (p) ++fp;
    else if (g) ++fn;
    else ++tn;
  }
  return pixel_rates(tp, fp, fn, tn);
}

/// Per-dataset summary of pixel rates.
struct PixelSummary {
  double sensitivity = 0, specificity = 0, ppv = 0, npv = 0;
  std::size_t images = 0;
};

/// Unweighted (macro) mean of each rate across images.
inline PixelSummary aggregate_pixel_metrics(const std::vector<PixelMetrics>& per_image) {
  if (per_image.empty()) throw InvalidInput("aggregate_pixel_metrics needs at least one image");
  PixelSummary s;
  for (const auto& m : per_image) {
    s.sensitivity += m.sensitivity;
    s.specificity += m.specificity;
    s.ppv += m.ppv;
    s.npv += m.npv;
  }
  const double n = static_cast<double>(per_image.size());
  s.sensitivity /= n;
  s.specificity /= n;
  s.ppv /= n;
  s.npv /= n;
  s.images = per_image.size();
  return s;
}

/// Rates of the summed confusion counts (micro average), for comparison.
inline PixelSummary pool_pixel_metrics(const std::vector<PixelMetrics>& per_image) {
  if (per_image.empty()) throw InvalidInput("pool_pixel_metrics needs at least one image");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& m : per_image) {
    tp += m.tp;
    fp += m.fp;
    fn += m.fn;
    tn += m.tn;
  }
  const PixelMetrics p = pixel_rates(tp, fp, fn, tn);
  return {p.sensitivity, p.specificity, p.ppv, p.npv, per_image.size()};
}

}  // namespace ropkit
