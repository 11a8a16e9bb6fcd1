#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "ropkit/error.hpp"
#include "ropkit/grid.hpp"

namespace ropkit {

/// Column-major run lengths of a binary mask, alternating background and
/// foreground and always starting with a (possibly empty) background run.
struct Rle {
  int width = 0;   ///< 0 while unbound (counts read before image size is known)
  int height = 0;
  std::vector<std::uint32_t> counts;

  std::uint64_t total() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  }
  bool bound() const noexcept { return width > 0 && height > 0; }
  bool operator==(const Rle&) const = default;
};

inline Rle rle_encode(const Bitmap& mask) {
  Rle rle{mask.width(), mask.height(), {}};
  bool current = false;
  std::uint32_t run = 0;
  for (int x = 0; x < mask.width(); ++x) {
    for (int y = 0; y < mask.height(); ++y) {
      const bool v = mask(x, y) != 0;
      if (v != current) {
        rle.counts.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

inline Bitmap rle_decode(const std::vector<std::uint32_t>& counts, int width, int height) {
  if (width < 1 || height < 1) throw InvalidInput("rle_decode needs positive dimensions");
  const std::uint64_t expected = static_cast<std::uint64_t>(width) * static_cast<std::uint64_t>(height);
  const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  if (total != expected) {
    throw FormatError("RLE run total " + std::to_string(total) + " does not match " + std::to_string(width) + "x" +
                      std::to_string(height));
  }
  Bitmap mask(width, height);
  std::uint64_t pos = 0;
  bool value = false;
  for (std::uint32_t run : counts) {
    for (std::uint32_t k = 0; k < run; ++k, ++pos) {
      if (value) {
        const int x = static_cast<int>(pos / static_cast<std::uint64_t>(height));
        const int y = static_cast<int>(pos % static_cast<std::uint64_t>(height));
        mask(x, y) = 1;
      }
    }
    value = !value;
  }
  return mask;
}

inline Bitmap rle_decode(const Rle& rle) { return rle_decode(rle.counts, rle.width, rle.height); }

}  // namespace ropkit
