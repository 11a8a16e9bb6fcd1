#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ropkit/detect.hpp"
#include "ropkit/enhance.hpp"
#include "ropkit/error.hpp"
#include "ropkit/eval.hpp"
#include "ropkit/nms.hpp"

// Flat `key = value` configuration ('#' starts a comment). Keys:
//   clahe_tiles (RxC), clahe_clip (number or inf), hist_bins, sigmoid_c,
//   sigmoid_offset, fit_c (true/false), c_lo, c_hi, psf_sigma, psf_size,
//   wiener_nsr, scales (comma list), threshold_percentile, min_area,
//   max_detections, nms_thresh, match_iou

namespace ropkit {

struct PipelineSettings {
  EnhanceConfig enhance;
  DetectorConfig detector;
  double nms_thresh = kDefaultNmsThreshold;
  double match_iou = kDefaultMatchIou;

  void validate() const {
    enhance.validate();
    detector.validate();
    if (!(nms_thresh >= 0 && nms_thresh <= 1)) throw InvalidInput("nms_thresh must lie in [0,1]");
    if (!(match_iou > 0 && match_iou <= 1)) throw InvalidInput("match_iou must lie in (0,1]");
  }

  bool operator==(const PipelineSettings&) const = default;
};

namespace config_detail {

inline std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c); };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

inline double to_double(const std::string& key, const std::string& v) {
  std::string lower = v;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "inf" || lower == "infinity") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw FormatError("config key '" + key + "': expected a number, got '" + v + "'");
}

inline int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw FormatError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw FormatError("config key '" + key + "': expected true/false, got '" + v + "'");
}

inline TileGrid to_tiles(const std::string& key, const std::string& v) {
  const auto sep = v.find_first_of("x,");
  if (sep == std::string::npos) throw FormatError("config key '" + key + "': expected RxC, got '" + v + "'");
  return {to_int(key, trim(v.substr(0, sep))), to_int(key, trim(v.substr(sep + 1)))};
}

inline std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  return out;
}

inline std::string format_double(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace config_detail

/// Applies one setting; unknown keys are an error.
inline void apply_setting(PipelineSettings& s, const std::string& key, const std::string& value) {
  using namespace config_detail;
  if (key == "clahe_tiles") s.enhance.clahe_tiles = to_tiles(key, value);
  else if (key == "clahe_clip") s.enhance.clahe_clip = to_double(key, value);
  else if (key == "hist_bins") s.enhance.hist_bins = to_int(key, value);
  else if (key == "sigmoid_c") s.enhance.sigmoid_c = to_double(key, value);
  else if (key == "sigmoid_offset") s.enhance.sigmoid_offset = to_double(key, value);
  else if (key == "fit_c") s.enhance.fit_c = to_bool(key, value);
  else if (key == "c_lo") s.enhance.c_lo = to_double(key, value);
  else if (key == "c_hi") s.enhance.c_hi = to_double(key, value);
  else if (key == "psf_sigma") s.enhance.psf_sigma = to_double(key, value);
  else if (key == "psf_size") s.enhance.psf_size = to_int(key, value);
  else if (key == "wiener_nsr") s.enhance.wiener_nsr = to_double(key, value);
  else if (key == "scales") s.detector.scales = to_list(key, value);
  else if (key == "threshold_percentile") s.detector.threshold_percentile = to_double(key, value);
  else if (key == "min_area") s.detector.min_area = to_int(key, value);
  else if (key == "max_detections") s.detector.max_detections = to_int(key, value);
  else if (key == "nms_thresh") s.nms_thresh = to_double(key, value);
  else if (key == "match_iou") s.match_iou = to_double(key, value);
  else throw FormatError("unknown config key '" + key + "'");
}

inline PipelineSettings parse_settings(std::istream& in, PipelineSettings base = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("config line " + std::to_string(lineno) + ": expected key = value");
    apply_setting(base, config_detail::trim(line.substr(0, eq)), config_detail::trim(line.substr(eq + 1)));
  }
  base.validate();
  return base;
}

inline PipelineSettings load_settings(const std::filesystem::path& path, PipelineSettings base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_settings(in, std::move(base));
}

inline std::string format_settings(const PipelineSettings& s) {
  using config_detail::format_double;
  std::ostringstream os;
  const auto& e = s.enhance;
  os << "clahe_tiles = " << e.clahe_tiles.rows << "x" << e.clahe_tiles.cols << '\n'
     << "clahe_clip = " << format_double(e.clahe_clip) << '\n'
     << "hist_bins = " << e.hist_bins << '\n'
     << "sigmoid_c = " << format_double(e.sigmoid_c) << '\n'
     << "sigmoid_offset = " << format_double(e.sigmoid_offset) << '\n'
     << "fit_c = " << (e.fit_c ? "true" : "false") << '\n'
     << "c_lo = " << format_double(e.c_lo) << '\n'
     << "c_hi = " << format_double(e.c_hi) << '\n'
     << "psf_sigma = " << format_double(e.psf_sigma) << '\n'
     << "psf_size = " << e.psf_size << '\n'
     << "wiener_nsr = " << format_double(e.wiener_nsr) << '\n';
  os << "scales = ";
  for (std::size_t i = 0; i < s.detector.scales.size(); ++i) {
    os << (i ? "," : "") << format_double(s.detector.scales[i]);
  }
  os << '\n'
     << "threshold_percentile = " << format_double(s.detector.threshold_percentile) << '\n'
     << "min_area = " << s.detector.min_area << '\n'
     << "max_detections = " << s.detector.max_detections << '\n'
     << "nms_thresh = " << format_double(s.nms_thresh) << '\n'
     << "match_iou = " << format_double(s.match_iou) << '\n';
  return os.str();
}

}  // namespace ropkit
