#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "ropkit/error.hpp"
#include "ropkit/phantom.hpp"

// PhantomSpec as JSON:
//   {seed, width, height, disc_center: [x, y], disc_radius, vessel_count,
//    ridge_arc: {center: [x, y], radius, angle_span, width, contrast},
//    degrade: {illum_gradient, blur_sigma, noise_sigma, contrast_factor}}
// Every key is optional; missing keys keep their defaults.

namespace ropkit {

inline nlohmann::json phantom_spec_to_json(const PhantomSpec& s) {
  return {
      {"seed", s.seed},
      {"width", s.width},
      {"height", s.height},
      {"disc_center", {s.disc_x, s.disc_y}},
      {"disc_radius", s.disc_radius},
      {"vessel_count", s.vessel_count},
      {"ridge_arc",
       {{"center", {s.ridge.center_x, s.ridge.center_y}},
        {"radius", s.ridge.radius},
        {"angle_span", s.ridge.angle_span},
        {"width", s.ridge.width},
        {"contrast", s.ridge.contrast}}},
      {"degrade",
       {{"illum_gradient", s.degrade.illum_gradient},
        {"blur_sigma", s.degrade.blur_sigma},
        {"noise_sigma", s.degrade.noise_sigma},
        {"contrast_factor", s.degrade.contrast_factor}}},
  };
}

inline PhantomSpec phantom_spec_from_json(const nlohmann::json& j, PhantomSpec s = {}) {
  try {
    auto pair = [](const nlohmann::json& v, double& x, double& y) {
      if (!v.is_array() || v.size() != 2) throw FormatError("expected [x, y]");
      x = v[0].get<double>();
      y = v[1].get<double>();
    };
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("width")) s.width = j["width"].get<int>();
    if (j.contains("height")) s.height = j["height"].get<int>();
    if (j.contains("disc_center")) pair(j["disc_center"], s.disc_x, s.disc_y);
    if (j.contains("disc_radius")) s.disc_radius = j["disc_radius"].get<double>();
    if (j.contains("vessel_count")) s.vessel_count = j["vessel_count"].get<int>();
    if (j.contains("ridge_arc")) {
      const auto& r = j["ridge_arc"];
      if (r.contains("center")) pair(r["center"], s.ridge.center_x, s.ridge.center_y);
      if (r.contains("radius")) s.ridge.radius = r["radius"].get<double>();
      if (r.contains("angle_span")) s.ridge.angle_span = r["angle_span"].get<double>();
      if (r.contains("width")) s.ridge.width = r["width"].get<double>();
      if (r.contains("contrast")) s.ridge.contrast = r["contrast"].get<double>();
    }
    if (j.contains("degrade")) {
      const auto& d = j["degrade"];
      if (d.contains("illum_gradient")) s.degrade.illum_gradient = d["illum_gradient"].get<double>();
      if (d.contains("blur_sigma")) s.degrade.blur_sigma = d["blur_sigma"].get<double>();
      if (d.contains("noise_sigma")) s.degrade.noise_sigma = d["noise_sigma"].get<double>();
      if (d.contains("contrast_factor")) s.degrade.contrast_factor = d["contrast_factor"].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("phantom spec: ") + e.what());
  }
  s.validate();
  return s;
}

inline PhantomSpec load_phantom_spec(const std::filesystem::path& path, PhantomSpec base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open phantom spec " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return phantom_spec_from_json(j, std::move(base));
}

}  // namespace ropkit
