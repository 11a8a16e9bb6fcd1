#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "ropkit/box.hpp"
#include "ropkit/error.hpp"
#include "ropkit/grid.hpp"
#include "ropkit/raster.hpp"
#include "ropkit/rle.hpp"

namespace ropkit {

inline constexpr const char* kRidgeLabel = "ridge";

/// Ground-truth ridge: a box and, optionally, its pixel mask.
struct AnnotationRecord {
  std::string image_id;
  Box box;
  std::optional<Rle> mask_rle;
  std::string label = kRidgeLabel;

  bool operator==(const AnnotationRecord&) const = default;
};

/// Model or baseline output as exchanged through predictions files.
struct PredictionRecord {
  std::string image_id;
  Box box;
  double score = 0;
  std::optional<Rle> mask_rle;
  std::string label = kRidgeLabel;

  bool operator==(const PredictionRecord&) const = default;
};

/// In-memory detection with an image-sized mask.
struct Detection {
  std::string image_id;
  Box box;
  double score = 0;
  Bitmap mask;
  std::string label = kRidgeLabel;
};

inline AnnotationRecord make_annotation(std::string image_id, const Bitmap& mask) {
  auto box = tight_box(mask);
  if (!box) throw InvalidInput("annotation mask is empty");
  return {std::move(image_id), *box, rle_encode(mask), kRidgeLabel};
}

inline PredictionRecord to_prediction(const Detection& det) {
  PredictionRecord rec{det.image_id, det.box, det.score, std::nullopt, det.label};
  if (!det.mask.empty()) rec.mask_rle = rle_encode(det.mask);
  return rec;
}

inline PredictionRecord to_prediction(const AnnotationRecord& ann, double score = 1.0) {
  return {ann.image_id, ann.box, score, ann.mask_rle, ann.label};
}

/// Scales an annotation into a resized frame. The box is scaled linearly and
/// the mask (if present) is resampled nearest-neighbour to the scaled frame.
inline AnnotationRecord scale_annotation(const AnnotationRecord& ann, double sx, double sy) {
  if (!(sx > 0) || !(sy > 0)) throw InvalidInput("annotation scale factors must be positive");
  AnnotationRecord out = ann;
  out.box = {ann.box.x * sx, ann.box.y * sy, ann.box.w * sx, ann.box.h * sy};
  if (ann.mask_rle) {
    if (!ann.mask_rle->bound()) throw InvalidInput("cannot scale a mask with unknown dimensions");
    const Bitmap mask = rle_decode(*ann.mask_rle);
    const int w = std::max(1, static_cast<int>(std::lround(mask.width() * sx)));
    const int h = std::max(1, static_cast<int>(std::lround(mask.height() * sy)));
    out.mask_rle = rle_encode(resize_nearest(mask, w, h));
  }
  return out;
}

}  // namespace ropkit
