#pragma once

#include <cstdint>
#include <vector>

#include "vigil/errors.hpp"
#include "vigil/image.hpp"

namespace vigil {

// Uncompressed COCO-style run-length counts. Pixels are visited
// column-major (x outer, y inner); the first run counts zeros and may be 0.
inline std::vector<std::int64_t> rle_encode(const Mask& m) {
  std::vector<std::int64_t> counts;
  std::uint8_t current = 0;
  std::int64_t run = 0;
  for (int x = 0; x < m.width; ++x)
    for (int y = 0; y < m.height; ++y) {
      const std::uint8_t v = m.at(x, y) ? 1 : 0;
      if (v != current) {
        counts.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  counts.push_back(run);
  return counts;
}

// Throws ProtocolError when the counts are negative or do not cover
// exactly width*height pixels.
inline Mask rle_decode(const std::vector<std::int64_t>& counts, int width, int height) {
  if (width <= 0 || height <= 0) throw ProtocolError("mask dimensions must be positive");
  Mask m(width, height);
  const std::int64_t total = static_cast<std::int64_t>(width) * height;
  std::int64_t pos = 0;
  bool value = false;
  for (auto c : counts) {
    if (c < 0) throw ProtocolError("negative run length in mask_rle");
    if (pos + c > total) throw ProtocolError("mask_rle covers more pixels than width*height");
    if (value)
      for (std::int64_t k = pos; k < pos + c; ++k)
        m.set(static_cast<int>(k / height), static_cast<int>(k % height));
    pos += c;
    value = !value;
  }
  if (pos != total) throw ProtocolError("mask_rle covers fewer pixels than width*height");
  return m;
}

}  // namespace vigil
