#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "ropkit/annot_io.hpp"
#include "ropkit/rng.hpp"

namespace fs = std::filesystem;
using namespace ropkit;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ropkit_tests" / "annot";
  fs::create_directories(dir);
  return dir / name;
}

Bitmap random_mask(Xoshiro256& rng, int w, int h, double p) {
  Bitmap m(w, h);
  for (auto& v : m.data()) v = rng.uniform() < p;
  return m;
}

json sample_manifest() {
  return json::parse(R"({
    "schema_version": 1, "split": "train",
    "images": [{"image_id": "a", "path": "a.png", "width": 2, "height": 2,
                "annotations": [{"box": [0, 0, 1, 1], "mask_rle": [0, 1, 3], "label": "ridge"}]}]})");
}

json sample_predictions() {
  return json::parse(R"({"schema_version": 1,
    "predictions": [{"image_id": "a", "box": [0, 0, 1, 1], "score": 0.5, "label": "ridge"}]})");
}

std::string error_of(const json& doc) {
  try {
    manifest_from_json(doc);
  } catch (const FormatError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Rle, HandTracedExamples) {
  EXPECT_EQ(rle_encode(Bitmap(2, 2)).counts, (std::vector<std::uint32_t>{4}));
  Bitmap m(2, 2);
  m(0, 0) = 1;
  EXPECT_EQ(rle_encode(m).counts, (std::vector<std::uint32_t>{0, 1, 3}));
  // Column-major: (1,0) is the third sample.
  Bitmap n(2, 2);
  n(1, 0) = 1;
  EXPECT_EQ(rle_encode(n).counts, (std::vector<std::uint32_t>{2, 1, 1}));
  EXPECT_EQ(rle_encode(Bitmap(2, 3, 1)).counts, (std::vector<std::uint32_t>{0, 6}));
}

TEST(Rle, RoundTripAndTotals) {
  Xoshiro256 rng(91);
  for (int t = 0; t < 100; ++t) {
    const int w = 1 + static_cast<int>(rng.uniform(0, 20)), h = 1 + static_cast<int>(rng.uniform(0, 20));
    const auto mask = random_mask(rng, w, h, rng.uniform());
    const auto rle = rle_encode(mask);
    ASSERT_EQ(rle.total(), static_cast<std::uint64_t>(w) * h);
    ASSERT_EQ(rle_decode(rle), mask);
  }
}

TEST(Rle, DecodeRejectsWrongTotal) {
  EXPECT_THROW(rle_decode({0, 1, 2}, 2, 2), FormatError);
  EXPECT_THROW(rle_decode({5}, 2, 2), FormatError);
  EXPECT_THROW(rle_decode({4}, 0, 4), InvalidInput);
}

TEST(Manifest, RoundTrip) {
  Xoshiro256 rng(92);
  DatasetManifest m;
  m.split = "train";
  for (int i = 0; i < 3; ++i) {
    const std::string id = "img" + std::to_string(i);
    ManifestEntry e{id, id + ".png", 30 + i, 20, {}};
    Bitmap mask(e.width, e.height);
    for (int y = 3; y < 9 + i; ++y) {
      for (int x = 4; x < 12; ++x) mask(x, y) = rng.uniform() < 0.8;
    }
    mask(4, 3) = mask(11, 8 + i) = 1;
    e.annotations.push_back(make_annotation(id, mask));
    e.annotations.push_back({id, {1.5, 2, 3, 4.25}, std::nullopt});
    m.images.push_back(e);
  }
  const auto path = scratch("m.json");
  save_manifest(m, path);
  const auto loaded = load_manifest(path, false);
  EXPECT_TRUE(loaded.warnings.empty());
  EXPECT_EQ(loaded.value, m);
  EXPECT_EQ(manifest_to_json(loaded.value), manifest_to_json(m));
}

TEST(Manifest, ErrorsNameRecordAndField) {
  auto doc = sample_manifest();
  doc["images"][0]["annotations"][0].erase("box");
  EXPECT_NE(error_of(doc).find("images[0].annotations[0]"), std::string::npos);
  EXPECT_NE(error_of(doc).find("'box'"), std::string::npos);

  doc = sample_manifest();
  doc["images"][0]["width"] = "two";
  EXPECT_NE(error_of(doc).find("images[0].width"), std::string::npos);

  doc = sample_manifest();
  doc["images"][0]["annotations"][0]["mask_rle"] = {0, 1, 2};
  EXPECT_NE(error_of(doc).find("images[0].annotations[0].mask_rle"), std::string::npos);

  doc = sample_manifest();
  doc["images"][0]["width"] = doc["images"][0]["height"] = 10;
  doc["images"][0]["annotations"][0]["mask_rle"] = {0, 1, 99};
  doc["images"][0]["annotations"][0]["box"] = {5, 5, 2, 2};
  EXPECT_NE(error_of(doc).find("tight box"), std::string::npos);

  doc = sample_manifest();
  doc["images"].push_back(doc["images"][0]);
  EXPECT_NE(error_of(doc).find("duplicate image id 'a'"), std::string::npos);

  doc = sample_manifest();
  doc["schema_version"] = 2;
  EXPECT_NE(error_of(doc).find("schema_version"), std::string::npos);

  doc = sample_manifest();
  doc["split"] = "val";
  EXPECT_NE(error_of(doc).find("split"), std::string::npos);
}

TEST(Manifest, UnknownFieldsWarn) {
  auto doc = sample_manifest();
  doc["creator"] = "someone";
  doc["images"][0]["annotations"][0]["grade"] = 2;
  const auto loaded = manifest_from_json(doc);
  ASSERT_EQ(loaded.warnings.size(), 2u);
  EXPECT_NE(loaded.warnings[1].find("images[0].annotations[0]: unknown field 'grade'"), std::string::npos);
}

TEST(Manifest, PathsMustResolve) {
  const auto path = scratch("paths.json");
  fs::remove(scratch("a.png"));
  std::ofstream(path) << sample_manifest().dump();
  EXPECT_THROW(load_manifest(path), FormatError);
  std::ofstream(scratch("a.png")) << "x";
  EXPECT_NO_THROW(load_manifest(path));
  EXPECT_EQ(resolve_image_path(path, load_manifest(path).value.images[0]), scratch("a.png"));
  EXPECT_THROW(load_manifest(scratch("missing.json")), IoError);
  std::ofstream(scratch("broken.json")) << "{ not json";
  EXPECT_THROW(load_manifest(scratch("broken.json")), FormatError);
}

TEST(Predictions, RoundTrip) {
  PredictionSet set;
  set.mode = "raw";
  set.predictions.push_back({"a", {0, 0, 1, 1}, 0.25, Rle{0, 0, {0, 1, 3}}});
  set.predictions.push_back({"a", {0.5, 0.5, 1, 1.5}, 1.0, std::nullopt});
  const auto path = scratch("p.json");
  save_predictions(set, path);
  const auto loaded = load_predictions(path);
  EXPECT_TRUE(loaded.warnings.empty());
  EXPECT_EQ(loaded.value, set);
}

TEST(Predictions, SchemaErrors) {
  auto doc = sample_predictions();
  doc["predictions"][0]["score"] = 1.5;
  EXPECT_THROW(predictions_from_json(doc), FormatError);
  doc = sample_predictions();
  doc["predictions"][0].erase("image_id");
  try {
    predictions_from_json(doc);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("predictions[0]: missing required field 'image_id'"), std::string::npos);
  }
  doc = sample_predictions();
  doc["predictions"][0]["box"] = {0, 0, 0, 1};
  EXPECT_THROW(predictions_from_json(doc), FormatError);
  doc = sample_predictions();
  doc["predictions"][0]["mask_rle"] = {1, -1};
  EXPECT_THROW(predictions_from_json(doc), FormatError);
}

TEST(Predictions, ValidatedAgainstManifest) {
  const auto manifest = manifest_from_json(sample_manifest()).value;
  auto doc = sample_predictions();
  doc["predictions"][0]["mask_rle"] = {0, 1, 3};
  auto set = predictions_from_json(doc).value;
  validate_predictions(set, manifest);
  EXPECT_EQ(set.predictions[0].mask_rle->width, 2);
  EXPECT_EQ(rle_decode(*set.predictions[0].mask_rle)(0, 0), 1);

  doc["predictions"][0]["image_id"] = "ghost";
  set = predictions_from_json(doc).value;
  try {
    validate_predictions(set, manifest);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("'ghost'"), std::string::npos);
  }

  doc = sample_predictions();
  doc["predictions"][0]["box"] = {0, 0, 9, 1};
  set = predictions_from_json(doc).value;
  EXPECT_THROW(validate_predictions(set, manifest), FormatError);

  doc = sample_predictions();
  doc["predictions"][0]["mask_rle"] = {0, 1, 4};
  set = predictions_from_json(doc).value;
  EXPECT_THROW(validate_predictions(set, manifest), FormatError);
}

TEST(Samples, DocumentedFilesParseCleanly) {
  const fs::path dir = ROPKIT_SAMPLES_DIR;
  const auto manifest = load_manifest(dir / "manifest.json");
  EXPECT_TRUE(manifest.warnings.empty());
  ASSERT_EQ(manifest.value.images.size(), 2u);
  const auto& a = manifest.value.images[0].annotations[0];
  EXPECT_EQ(a.box, *tight_box(rle_decode(*a.mask_rle)));
  EXPECT_FALSE(manifest.value.images[1].annotations[0].mask_rle.has_value());

  auto preds = load_predictions(dir / "predictions.json");
  EXPECT_TRUE(preds.warnings.empty());
  EXPECT_EQ(preds.value.mode, "enhanced");
  EXPECT_NO_THROW(validate_predictions(preds.value, manifest.value));
}
