#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "ropkit/error.hpp"
#include "ropkit/raster.hpp"

// PNG (8-bit gray/RGB) and binary PNM (P5/P6, maxval 255) codecs.
// Samples are mapped to [0,1] by /255 on read and rounded on write.

namespace ropkit {

namespace detail {

inline std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

inline std::vector<std::uint8_t> quantize(const RasterImage& img) {
  std::vector<std::uint8_t> bytes(img.data().size());
  std::transform(img.data().begin(), img.data().end(), bytes.begin(),
                 [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); });
  return bytes;
}

inline RasterImage dequantize(int w, int h, int channels, const std::vector<std::uint8_t>& bytes) {
  std::vector<double> data(bytes.size());
  std::transform(bytes.begin(), bytes.end(), data.begin(), [](std::uint8_t b) { return b / 255.0; });
  return RasterImage(w, h, channels, std::move(data));
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline RasterImage load_png(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw FormatError(path.string() + ": " + msg);
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw FormatError(path.string() + ": unsupported bit depth (16-bit PNG)");
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw FormatError(path.string() + ": " + msg);
  }
  return dequantize(static_cast<int>(image.width), static_cast<int>(image.height), color ? 3 : 1, pixels);
}

inline void save_png(const RasterImage& img, const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const auto bytes = quantize(img);
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError(path.string() + ": " + msg);
  }
}

// Reads one whitespace-delimited header token, skipping '#' comments.
inline std::string pnm_token(const std::vector<std::uint8_t>& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(buf[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < buf.size() && !std::isspace(buf[pos]) && buf[pos] != '#') tok.push_back(static_cast<char>(buf[pos++]));
  return tok;
}

inline int pnm_int(const std::vector<std::uint8_t>& buf, std::size_t& pos, const std::string& what,
                   const std::filesystem::path& path) {
  const std::string tok = pnm_token(buf, pos);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); }) ||
      tok.size() > 9) {
    throw FormatError(path.string() + ": malformed PNM " + what);
  }
  return std::stoi(tok);
}

inline RasterImage load_pnm(const std::filesystem::path& path) {
  const auto buf = read_file(path);
  std::size_t pos = 0;
  const std::string magic = pnm_token(buf, pos);
  int channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw FormatError(path.string() + ": unsupported PNM magic '" + magic + "'");
  }
  const int w = pnm_int(buf, pos, "width", path);
  const int h = pnm_int(buf, pos, "height", path);
  const int maxval = pnm_int(buf, pos, "maxval", path);
  if (w < 1 || h < 1) throw FormatError(path.string() + ": PNM dimensions must be positive");
  if (maxval != 255) throw FormatError(path.string() + ": unsupported bit depth (maxval " + std::to_string(maxval) + ")");
  if (pos >= buf.size() || !std::isspace(buf[pos])) throw FormatError(path.string() + ": malformed PNM header");
  ++pos;
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * channels;
  if (buf.size() - pos < need) throw FormatError(path.string() + ": truncated PNM pixel data");
  std::vector<std::uint8_t> pixels(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                                   buf.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return dequantize(w, h, channels, pixels);
}

inline void save_pnm(const RasterImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << (img.channels() == 3 ? "P6" : "P5") << '\n' << img.width() << ' ' << img.height() << "\n255\n";
  const auto bytes = quantize(img);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace detail

/// Loads a PNG, PGM or PPM file; the format is chosen by extension.
inline RasterImage load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  const std::string ext = detail::lower_extension(path);
  if (ext == ".png") return detail::load_png(path);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return detail::load_pnm(path);
  throw FormatError(path.string() + ": unsupported image extension '" + ext + "'");
}

inline void save_image(const RasterImage& img, const std::filesystem::path& path) {
  if (img.empty()) throw InvalidInput("cannot save an empty raster");
  const std::string ext = detail::lower_extension(path);
  if (ext == ".png") {
    detail::save_png(img, path);
  } else if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") {
    if ((ext == ".ppm" && img.channels() != 3) || (ext == ".pgm" && img.channels() != 1)) {
      throw InvalidInput(path.string() + ": channel count does not match PNM flavour");
    }
    detail::save_pnm(img, path);
  } else {
    throw FormatError(path.string() + ": unsupported image extension '" + ext + "'");
  }
}

/// Writes a binary mask as an 8-bit grayscale image (foreground = 255).
inline void save_mask(const Bitmap& mask, const std::filesystem::path& path) {
  std::vector<double> data(mask.size());
  std::transform(mask.data().begin(), mask.data().end(), data.begin(), [](std::uint8_t v) { return v ? 1.0 : 0.0; });
  save_image(RasterImage(mask.width(), mask.height(), 1, std::move(data)), path);
}

}  // namespace ropkit
