#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ropkit/annot_io.hpp"
#include "ropkit/box.hpp"
#include "ropkit/error.hpp"
#include "ropkit/eval.hpp"
#include "ropkit/rle.hpp"

// Dataset-level scoring and the metrics report written by `ropkit score`:
//
//   {schema_version: 1, match_iou, precision, recall, f1, image_accuracy,
//    pixel: {sensitivity, specificity, ppv, npv, images},
//    counts: {tp, fp, fn, images, predictions, ground_truth}}
//
// All rates lie in [0,1]; counts are non-negative integers.

namespace ropkit {

struct DatasetScore {
  double match_iou = kDefaultMatchIou;
  MatchReport matches;
  ObjectMetrics object;
  std::vector<PixelMetrics> pixel_per_image;  ///< manifest order
  PixelSummary pixel;
  std::size_t predictions = 0;
  std::size_t ground_truth = 0;
};

namespace report_detail {

template <typename Rec>
void paint_record(Bitmap& canvas, const Rec& rec) {
  if (rec.mask_rle && rec.mask_rle->bound() && !rec.mask_rle->counts.empty()) {
    const Bitmap m = rle_decode(*rec.mask_rle);
    for (std::size_t i = 0; i < m.size(); ++i) canvas.data()[i] |= m.data()[i];
  } else {
    paint_box(canvas, rec.box);
  }
}

}  // namespace report_detail

/// Scores predictions (already validated against `manifest`) per the
/// evaluation protocol: greedy IoU matching for object metrics, and the
/// union of predicted vs. annotated masks (boxes when no mask) per image
/// for macro-averaged pixel metrics.
inline DatasetScore score_dataset(const DatasetManifest& manifest, const PredictionSet& preds, double match_iou) {
  DatasetScore s;
  s.match_iou = match_iou;
  const auto gts = manifest.annotations();
  s.matches = match_detections(preds.predictions, gts, match_iou, manifest.image_ids());
  s.object = object_metrics(s.matches);
  s.predictions = preds.predictions.size();
  s.ground_truth = gts.size();

  for (const auto& entry : manifest.images) {
    Bitmap pred_mask(entry.width, entry.height), gt_mask(entry.width, entry.height);
    for (const auto& p : preds.predictions) {
      if (p.image_id == entry.image_id) report_detail::paint_record(pred_mask, p);
    }
    for (const auto& a : entry.annotations) report_detail::paint_record(gt_mask, a);
    s.pixel_per_image.push_back(pixel_metrics(pred_mask, gt_mask));
  }
  if (!s.pixel_per_image.empty()) s.pixel = aggregate_pixel_metrics(s.pixel_per_image);
  return s;
}

inline nlohmann::json report_to_json(const DatasetScore& s) {
  return {
      {"schema_version", kSchemaVersion},
      {"match_iou", s.match_iou},
      {"precision", s.object.precision},
      {"recall", s.object.recall},
      {"f1", s.object.f1},
      {"image_accuracy", s.object.image_accuracy},
      {"pixel",
       {{"sensitivity", s.pixel.sensitivity},
        {"specificity", s.pixel.specificity},
        {"ppv", s.pixel.ppv},
        {"npv", s.pixel.npv},
        {"images", s.pixel.images}}},
      {"counts",
       {{"tp", s.matches.tp},
        {"fp", s.matches.fp},
        {"fn", s.matches.fn},
        {"images", s.matches.images.size()},
        {"predictions", s.predictions},
        {"ground_truth", s.ground_truth}}},
  };
}

/// Checks a report document against the schema above; throws FormatError.
inline void validate_report_json(const nlohmann::json& doc) {
  auto fail = [](const std::string& what) { throw FormatError("report: " + what); };
  if (!doc.is_object()) fail("expected an object");
  if (doc.value("schema_version", 0) != kSchemaVersion) fail("schema_version must be 1");
  auto rate = [&](const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj[key].is_number()) fail(where + key + " missing or not a number");
    const double v = obj[key].get<double>();
    if (!(v >= 0 && v <= 1)) fail(where + key + " outside [0,1]");
  };
  auto count = [&](const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj[key].is_number_unsigned()) fail(where + key + " missing or not a count");
  };
  for (const char* k : {"match_iou", "precision", "recall", "f1", "image_accuracy"}) rate(doc, k, "");
  if (!doc.contains("pixel") || !doc["pixel"].is_object()) fail("pixel section missing");
  for (const char* k : {"sensitivity", "specificity", "ppv", "npv"}) rate(doc["pixel"], k, "pixel.");
  count(doc["pixel"], "images", "pixel.");
  if (!doc.contains("counts") || !doc["counts"].is_object()) fail("counts section missing");
  const auto& c = doc["counts"];
  for (const char* k : {"tp", "fp", "fn", "images", "predictions", "ground_truth"}) count(c, k, "counts.");
  const auto tp = c["tp"].get<std::size_t>();
  if (tp + c["fp"].get<std::size_t>() != c["predictions"].get<std::size_t>()) fail("tp + fp != predictions");
  if (tp + c["fn"].get<std::size_t>() != c["ground_truth"].get<std::size_t>()) fail("tp + fn != ground_truth");
}

/// One CSV row per image: counts, top-detection outcome and pixel rates.
inline void write_per_image_csv(const DatasetScore& s, std::ostream& out) {
  out << "image_id,tp,fp,fn,top_is_tp,sensitivity,specificity,ppv,npv\n";
  for (std::size_t i = 0; i < s.matches.images.size(); ++i) {
    const auto& im = s.matches.images[i];
    const auto& px = s.pixel_per_image[i];
    out << im.image_id << ',' << im.tp() << ',' << im.fp() << ',' << im.fn() << ','
        << (im.top_is_true_positive ? 1 : 0) << ',' << px.sensitivity << ',' << px.specificity << ',' << px.ppv << ','
        << px.npv << '\n';
  }
}

}  // namespace ropkit
