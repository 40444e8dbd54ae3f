#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vigil/errors.hpp"

namespace vigil {

using Rgb = std::array<std::uint8_t, 3>;

// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Box {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  long long area() const {
    return static_cast<long long>(width()) * static_cast<long long>(height());
  }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  bool contains(int x, int y) const {
    return x >= x0 && x < x1 && y >= y0 && y < y1;
  }
  bool contains(const Box& o) const {
    return o.x0 >= x0 && o.y0 >= y0 && o.x1 <= x1 && o.y1 <= y1;
  }
  bool intersects(const Box& o) const {
    return std::max(x0, o.x0) < std::min(x1, o.x1) &&
           std::max(y0, o.y0) < std::min(y1, o.y1);
  }
  bool operator==(const Box&) const = default;
};

// 8-bit RGB image, row-major, interleaved.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, Rgb fill = {0, 0, 0})
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3) {
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
      pixels[i] = fill[0];
      pixels[i + 1] = fill[1];
      pixels[i + 2] = fill[2];
    }
  }

  bool empty() const { return width <= 0 || height <= 0; }
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * width + x) * 3;
  }
  Rgb at(int x, int y) const {
    auto i = index(x, y);
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    auto i = index(x, y);
    pixels[i] = c[0];
    pixels[i + 1] = c[1];
    pixels[i + 2] = c[2];
  }
  void fill_rect(const Box& b, Rgb c) {
    for (int y = std::max(0, b.y0); y < std::min(height, b.y1); ++y)
      for (int x = std::max(0, b.x0); x < std::min(width, b.x1); ++x) set(x, y, c);
  }
  Box bounds() const { return {0, 0, width, height}; }
  bool operator==(const Image&) const = default;
};

// Binary mask, row-major, one byte per pixel (0 or 1).
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  bool at(int x, int y) const {
    return bits[static_cast<std::size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, bool v = true) {
    bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
  }
  void fill_rect(const Box& b) {
    for (int y = std::max(0, b.y0); y < std::min(height, b.y1); ++y)
      for (int x = std::max(0, b.x0); x < std::min(width, b.x1); ++x) set(x, y);
  }
  long long count() const {
    long long n = 0;
    for (auto b : bits) n += b;
    return n;
  }
  // Tight bounding box of set pixels; empty Box when the mask is empty.
  Box tight_box() const {
    Box b{width, height, 0, 0};
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        if (at(x, y)) {
          b.x0 = std::min(b.x0, x);
          b.y0 = std::min(b.y0, y);
          b.x1 = std::max(b.x1, x + 1);
          b.y1 = std::max(b.y1, y + 1);
        }
    if (b.empty()) return {};
    return b;
  }
  bool subset_of(const Mask& o) const {
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i] && !o.bits[i]) return false;
    return true;
  }
  bool operator==(const Mask&) const = default;
};

inline Box clamp_box(const Box& b, int width, int height) {
  return {std::clamp(b.x0, 0, width), std::clamp(b.y0, 0, height),
          std::clamp(b.x1, 0, width), std::clamp(b.y1, 0, height)};
}

// Box grown by round(delta * w) horizontally and round(delta * h) vertically
// on every side, clamped to the image.
inline Box pad_box(const Box& b, double delta, int width, int height) {
  const int px = static_cast<int>(std::lround(delta * b.width()));
  const int py = static_cast<int>(std::lround(delta * b.height()));
  return clamp_box({b.x0 - px, b.y0 - py, b.x1 + px, b.y1 + py}, width, height);
}

inline Image crop(const Image& img, const Box& b) {
  const Box c = clamp_box(b, img.width, img.height);
  if (c.empty()) throw ValidationError("crop box lies outside the image");
  Image out(c.width(), c.height());
  for (int y = 0; y < c.height(); ++y)
    std::copy_n(img.pixels.begin() + static_cast<std::ptrdiff_t>(img.index(c.x0, c.y0 + y)),
                static_cast<std::size_t>(c.width()) * 3,
                out.pixels.begin() + static_cast<std::ptrdiff_t>(out.index(0, y)));
  return out;
}

}  // namespace vigil
