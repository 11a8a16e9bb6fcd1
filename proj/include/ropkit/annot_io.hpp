#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ropkit/box.hpp"
#include "ropkit/error.hpp"
#include "ropkit/records.hpp"
#include "ropkit/rle.hpp"

// JSON interchange: dataset manifests and prediction files, schema version 1.
//
//   manifest    {schema_version, split, images: [{image_id, path, width, height,
//                annotations: [{box: [x,y,w,h], mask_rle: [...], label}]}]}
//   predictions {schema_version, predictions: [{image_id, box: [x,y,w,h], score,
//                mask_rle?, label}], mode?}
//
// Masks are column-major run lengths starting with a background run. Image
// paths are resolved relative to the manifest's directory.

namespace ropkit {

inline constexpr int kSchemaVersion = 1;

struct ManifestEntry {
  std::string image_id;
  std::string path;  ///< as written in the file
  int width = 0;
  int height = 0;
  std::vector<AnnotationRecord> annotations;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::string split = "test";
  std::vector<ManifestEntry> images;

  const ManifestEntry* find(const std::string& image_id) const {
    for (const auto& e : images) {
      if (e.image_id == image_id) return &e;
    }
    return nullptr;
  }

  std::vector<std::string> image_ids() const {
    std::vector<std::string> ids;
    for (const auto& e : images) ids.push_back(e.image_id);
    return ids;
  }

  std::vector<AnnotationRecord> annotations() const {
    std::vector<AnnotationRecord> all;
    for (const auto& e : images) all.insert(all.end(), e.annotations.begin(), e.annotations.end());
    return all;
  }

  bool operator==(const DatasetManifest&) const = default;
};

struct PredictionSet {
  std::vector<PredictionRecord> predictions;
  std::optional<std::string> mode;  ///< "raw" or "enhanced" when written by the detector

  bool operator==(const PredictionSet&) const = default;
};

/// A parsed document plus non-fatal findings (unknown fields).
template <typename T>
struct Loaded {
  T value;
  std::vector<std::string> warnings;
};

namespace io_detail {

using nlohmann::json;

class Reader {
 public:
  explicit Reader(std::vector<std::string>& warnings) : warnings_(warnings) {}

  [[noreturn]] void fail(const std::string& where, const std::string& what) const {
    throw FormatError(where + ": " + what);
  }

  const json& field(const json& obj, const std::string& where, const char* name) const {
    auto it = obj.find(name);
    if (it == obj.end()) fail(where, std::string("missing required field '") + name + "'");
    return *it;
  }

  void require_object(const json& v, const std::string& where) const {
    if (!v.is_object()) fail(where, "expected an object");
  }

  void warn_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> known) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool ok = false;
      for (const char* k : known) ok = ok || it.key() == k;
      if (!ok) warnings_.push_back(where + ": unknown field '" + it.key() + "'");
    }
  }

  std::string string(const json& obj, const std::string& where, const char* name) const {
    const json& v = field(obj, where, name);
    if (!v.is_string()) fail(where + "." + name, "expected a string");
    return v.get<std::string>();
  }

  double number(const json& obj, const std::string& where, const char* name) const {
    const json& v = field(obj, where, name);
    if (!v.is_number()) fail(where + "." + name, "expected a number");
    return v.get<double>();
  }

  int positive_int(const json& obj, const std::string& where, const char* name) const {
    const json& v = field(obj, where, name);
    if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > (1LL << 30)) {
      fail(where + "." + name, "expected a positive integer");
    }
    return v.get<int>();
  }

  Box box(const json& obj, const std::string& where) const {
    const json& v = field(obj, where, "box");
    if (!v.is_array() || v.size() != 4) fail(where + ".box", "expected [x, y, w, h]");
    for (const auto& n : v) {
      if (!n.is_number()) fail(where + ".box", "expected [x, y, w, h] of numbers");
    }
    Box b{v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>()};
    if (!b.valid()) fail(where + ".box", "width and height must be > 0");
    return b;
  }

  std::vector<std::uint32_t> counts(const json& v, const std::string& where) const {
    if (!v.is_array()) fail(where, "expected an array of run lengths");
    std::vector<std::uint32_t> out;
    out.reserve(v.size());
    for (const auto& n : v) {
      if (!n.is_number_integer() || n.get<long long>() < 0 || n.get<long long>() > 0xFFFFFFFFLL) {
        fail(where, "run lengths must be non-negative integers");
      }
      out.push_back(static_cast<std::uint32_t>(n.get<long long>()));
    }
    return out;
  }

  int version(const json& doc) const {
    const json& v = field(doc, "$", "schema_version");
    if (!v.is_number_integer()) fail("$.schema_version", "expected an integer");
    if (v.get<int>() != kSchemaVersion) fail("$.schema_version", "unsupported version " + v.dump());
    return kSchemaVersion;
  }

 private:
  std::vector<std::string>& warnings_;
};

inline json box_json(const Box& b) { return json::array({b.x, b.y, b.w, b.h}); }

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_json(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace io_detail

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  using nlohmann::json;
  json images = json::array();
  for (const auto& e : m.images) {
    json anns = json::array();
    for (const auto& a : e.annotations) {
      json ja{{"box", io_detail::box_json(a.box)}, {"label", a.label}};
      ja["mask_rle"] = a.mask_rle ? json(a.mask_rle->counts) : json::array();
      anns.push_back(std::move(ja));
    }
    images.push_back(json{{"image_id", e.image_id},
                          {"path", e.path},
                          {"width", e.width},
                          {"height", e.height},
                          {"annotations", std::move(anns)}});
  }
  return json{{"schema_version", kSchemaVersion}, {"split", m.split}, {"images", std::move(images)}};
}

/// Parses and validates a manifest document. Masks are decoded against the
/// entry's width x height, and each annotation box must be the mask's tight
/// box within one pixel. An empty mask_rle array means a box-only annotation.
inline Loaded<DatasetManifest> manifest_from_json(const nlohmann::json& doc) {
  Loaded<DatasetManifest> out;
  io_detail::Reader rd(out.warnings);
  rd.require_object(doc, "$");
  rd.version(doc);
  rd.warn_unknown(doc, "$", {"schema_version", "split", "images"});
  out.value.split = rd.string(doc, "$", "split");
  if (out.value.split != "train" && out.value.split != "test") rd.fail("$.split", "expected \"train\" or \"test\"");
  const auto& images = rd.field(doc, "$", "images");
  if (!images.is_array()) rd.fail("$.images", "expected an array");

  std::set<std::string> seen;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string where = "images[" + std::to_string(i) + "]";
    const auto& ji = images[i];
    rd.require_object(ji, where);
    rd.warn_unknown(ji, where, {"image_id", "path", "width", "height", "annotations"});
    ManifestEntry e;
    e.image_id = rd.string(ji, where, "image_id");
    if (!seen.insert(e.image_id).second) rd.fail(where + ".image_id", "duplicate image id '" + e.image_id + "'");
    e.path = rd.string(ji, where, "path");
    e.width = rd.positive_int(ji, where, "width");
    e.height = rd.positive_int(ji, where, "height");
    const auto& anns = rd.field(ji, where, "annotations");
    if (!anns.is_array()) rd.fail(where + ".annotations", "expected an array");
    for (std::size_t k = 0; k < anns.size(); ++k) {
      const std::string aw = where + ".annotations[" + std::to_string(k) + "]";
      const auto& ja = anns[k];
      rd.require_object(ja, aw);
      rd.warn_unknown(ja, aw, {"box", "mask_rle", "label"});
      AnnotationRecord a;
      a.image_id = e.image_id;
      a.box = rd.box(ja, aw);
      a.label = rd.string(ja, aw, "label");
      auto counts = rd.counts(rd.field(ja, aw, "mask_rle"), aw + ".mask_rle");
      if (!counts.empty()) {
        Rle rle{e.width, e.height, std::move(counts)};
        Bitmap mask;
        try {
          mask = rle_decode(rle);
        } catch (const FormatError& err) {
          rd.fail(aw + ".mask_rle", err.what());
        }
        const auto tight = tight_box(mask);
        if (!tight) rd.fail(aw + ".mask_rle", "mask is empty");
        if (std::abs(tight->x - a.box.x) > 1 || std::abs(tight->y - a.box.y) > 1 ||
            std::abs(tight->right() - a.box.right()) > 1 || std::abs(tight->bottom() - a.box.bottom()) > 1) {
          rd.fail(aw + ".box", "box is not the tight box of the mask");
        }
        a.mask_rle = std::move(rle);
      }
      e.annotations.push_back(std::move(a));
    }
    out.value.images.push_back(std::move(e));
  }
  return out;
}

/// Loads a manifest; with `check_paths`, every image path must exist
/// (relative paths resolve against the manifest's directory).
inline Loaded<DatasetManifest> load_manifest(const std::filesystem::path& path, bool check_paths = true) {
  auto loaded = manifest_from_json(io_detail::read_json(path));
  if (check_paths) {
    for (std::size_t i = 0; i < loaded.value.images.size(); ++i) {
      const auto resolved = path.parent_path() / loaded.value.images[i].path;
      if (!std::filesystem::exists(resolved)) {
        throw FormatError("images[" + std::to_string(i) + "].path: file not found: " + resolved.string());
      }
    }
  }
  return loaded;
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  io_detail::write_json(manifest_to_json(m), path);
}

inline std::filesystem::path resolve_image_path(const std::filesystem::path& manifest_path, const ManifestEntry& e) {
  return manifest_path.parent_path() / e.path;
}

inline nlohmann::json predictions_to_json(const PredictionSet& set) {
  using nlohmann::json;
  json preds = json::array();
  for (const auto& p : set.predictions) {
    json jp{{"image_id", p.image_id}, {"box", io_detail::box_json(p.box)}, {"score", p.score}, {"label", p.label}};
    if (p.mask_rle) jp["mask_rle"] = p.mask_rle->counts;
    preds.push_back(std::move(jp));
  }
  json doc{{"schema_version", kSchemaVersion}, {"predictions", std::move(preds)}};
  if (set.mode) doc["mode"] = *set.mode;
  return doc;
}

/// Parses a predictions document. Masks stay unbound (no dimensions) until
/// validate_predictions checks them against a manifest.
inline Loaded<PredictionSet> predictions_from_json(const nlohmann::json& doc) {
  Loaded<PredictionSet> out;
  io_detail::Reader rd(out.warnings);
  rd.require_object(doc, "$");
  rd.version(doc);
  rd.warn_unknown(doc, "$", {"schema_version", "predictions", "mode"});
  if (doc.contains("mode")) out.value.mode = rd.string(doc, "$", "mode");
  const auto& preds = rd.field(doc, "$", "predictions");
  if (!preds.is_array()) rd.fail("$.predictions", "expected an array");
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::string where = "predictions[" + std::to_string(i) + "]";
    const auto& jp = preds[i];
    rd.require_object(jp, where);
    rd.warn_unknown(jp, where, {"image_id", "box", "score", "mask_rle", "label"});
    PredictionRecord p;
    p.image_id = rd.string(jp, where, "image_id");
    p.box = rd.box(jp, where);
    p.score = rd.number(jp, where, "score");
    if (!(p.score >= 0 && p.score <= 1)) rd.fail(where + ".score", "score must lie in [0,1]");
    p.label = rd.string(jp, where, "label");
    if (jp.contains("mask_rle") && !jp["mask_rle"].is_null()) {
      p.mask_rle = Rle{0, 0, rd.counts(jp["mask_rle"], where + ".mask_rle")};
    }
    out.value.predictions.push_back(std::move(p));
  }
  return out;
}

inline Loaded<PredictionSet> load_predictions(const std::filesystem::path& path) {
  return predictions_from_json(io_detail::read_json(path));
}

inline void save_predictions(const PredictionSet& set, const std::filesystem::path& path) {
  io_detail::write_json(predictions_to_json(set), path);
}

/// Referential and geometric checks of predictions against a manifest:
/// every image_id must exist, masks must decode to the image size, and boxes
/// must lie within the image. Binds mask dimensions in place.
inline void validate_predictions(PredictionSet& set, const DatasetManifest& manifest) {
  for (std::size_t i = 0; i < set.predictions.size(); ++i) {
    auto& p = set.predictions[i];
    const std::string where = "predictions[" + std::to_string(i) + "]";
    const ManifestEntry* e = manifest.find(p.image_id);
    if (!e) throw FormatError(where + ".image_id: unknown image id '" + p.image_id + "'");
    if (p.box.x < -1 || p.box.y < -1 || p.box.right() > e->width + 1 || p.box.bottom() > e->height + 1) {
      throw FormatError(where + ".box: outside the " + std::to_string(e->width) + "x" + std::to_string(e->height) +
                        " image");
    }
    if (p.mask_rle) {
      p.mask_rle->width = e->width;
      p.mask_rle->height = e->height;
      if (p.mask_rle->total() != static_cast<std::uint64_t>(e->width) * static_cast<std::uint64_t>(e->height)) {
        throw FormatError(where + ".mask_rle: run total does not match image size");
      }
    }
  }
}

}  // namespace ropkit
