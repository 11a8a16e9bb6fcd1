#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "ropkit/config.hpp"

using namespace ropkit;

namespace {

PipelineSettings parse(const std::string& text) {
  std::istringstream in(text);
  return parse_settings(in);
}

}  // namespace

TEST(Config, DefaultsFormatAndParseBack) {
  const PipelineSettings defaults;
  EXPECT_EQ(parse(format_settings(defaults)), defaults);
  EXPECT_EQ(defaults.enhance.clahe_tiles.rows, 8);
  EXPECT_EQ(defaults.detector.threshold_percentile, 99.0);
  EXPECT_EQ(defaults.nms_thresh, 0.3);
  EXPECT_EQ(defaults.match_iou, 0.5);
}

TEST(Config, RoundTripOfNonDefaults) {
  PipelineSettings s;
  s.enhance.clahe_tiles = {4, 6};
  s.enhance.clahe_clip = std::numeric_limits<double>::infinity();
  s.enhance.sigmoid_c = 0.1 + 0.2;
  s.enhance.fit_c = true;
  s.detector.scales = {1.5, 3};
  s.detector.min_area = 50;
  s.nms_thresh = 0.45;
  EXPECT_EQ(parse(format_settings(s)), s);
}

TEST(Config, CommentsBlanksAndSpacing) {
  const auto s = parse(
      "# tuned for small images\n"
      "\n"
      "   clahe_tiles=2x3   # rows x cols\n"
      "clahe_clip = INF\n"
      "scales = 1, 2 ,4\n"
      "fit_c = yes\n");
  EXPECT_EQ(s.enhance.clahe_tiles.rows, 2);
  EXPECT_EQ(s.enhance.clahe_tiles.cols, 3);
  EXPECT_TRUE(std::isinf(s.enhance.clahe_clip));
  EXPECT_EQ(s.detector.scales, (std::vector<double>{1, 2, 4}));
  EXPECT_TRUE(s.enhance.fit_c);
  EXPECT_EQ(s.enhance.psf_size, 9);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse("colour = red\n"), FormatError);
  EXPECT_THROW(parse("clahe_tiles 8x8\n"), FormatError);
  EXPECT_THROW(parse("clahe_clip = lots\n"), FormatError);
  EXPECT_THROW(parse("min_area = 2.5\n"), FormatError);
  EXPECT_THROW(parse("fit_c = maybe\n"), FormatError);
  EXPECT_THROW(parse("clahe_tiles = 8\n"), FormatError);
  EXPECT_THROW(parse("psf_size = 4\n"), InvalidInput);
  EXPECT_THROW(parse("scales = 4,2\n"), InvalidInput);
  EXPECT_THROW(parse("nms_thresh = 1.5\n"), InvalidInput);
  EXPECT_THROW(parse("c_lo = 30\n"), InvalidInput);
  EXPECT_THROW(load_settings("/nonexistent/ropkit.conf"), IoError);
  try {
    parse("wiener_nsr = 0.01\nbogus\n");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Config, ApplySettingLeavesOthersAlone) {
  PipelineSettings s;
  apply_setting(s, "wiener_nsr", "0.05");
  PipelineSettings expect;
  expect.enhance.wiener_nsr = 0.05;
  EXPECT_EQ(s, expect);
}
