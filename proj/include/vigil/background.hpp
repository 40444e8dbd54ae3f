#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "vigil/errors.hpp"
#include "vigil/image.hpp"

namespace vigil {

struct BackgroundConfig {
  double margin_delta = 0.1;       // fraction of bbox size, >= 0
  int diff_threshold = 30;         // on the per-pixel mean absolute channel difference
  double min_roi_area_frac = 0.001;
  Rgb fill_value = {0, 0, 0};

  void validate() const {
    if (!(margin_delta >= 0.0) || !std::isfinite(margin_delta))
      throw ConfigError("margin_delta must be >= 0");
    if (diff_threshold < 0 || diff_threshold > 255)
      throw ConfigError("diff_threshold must lie in [0, 255]");
    if (!(min_roi_area_frac >= 0.0 && min_roi_area_frac <= 1.0))
      throw ConfigError("min_roi_area_frac must lie in [0, 1]");
  }
};

struct RoiBox {
  Box box;
  long long pixel_count = 0;  // size of the connected component
  bool operator==(const RoiBox&) const = default;
};

namespace detail {

// out[i] = 1 iff any in[i-r .. i+r] is set, along one axis.
inline void dilate_line(const std::uint8_t* in, std::uint8_t* out, int n, std::ptrdiff_t stride,
                        int r, std::vector<int>& prefix) {
  prefix.assign(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + (in[i * stride] ? 1 : 0);
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - r), hi = std::min(n, i + r + 1);
    out[i * stride] = prefix[hi] - prefix[lo] > 0 ? 1 : 0;
  }
}

}  // namespace detail

// Dilation with a rectangular structuring element of half-extents
// (round(delta * bbox width), round(delta * bbox height)), clipped to the
// image.
inline Mask dilate_mask(const Mask& mask, const Box& bbox, double delta) {
  if (delta < 0.0) throw ValidationError("dilation margin must be >= 0");
  const int rx = static_cast<int>(std::lround(delta * bbox.width()));
  const int ry = static_cast<int>(std::lround(delta * bbox.height()));
  if (rx == 0 && ry == 0) return mask;
  Mask tmp(mask.width, mask.height), out(mask.width, mask.height);
  std::vector<int> prefix;
  for (int y = 0; y < mask.height; ++y) {
    const std::size_t off = static_cast<std::size_t>(y) * mask.width;
    detail::dilate_line(mask.bits.data() + off, tmp.bits.data() + off, mask.width, 1, rx, prefix);
  }
  for (int x = 0; x < mask.width; ++x)
    detail::dilate_line(tmp.bits.data() + x, out.bits.data() + x, mask.height, mask.width, ry,
                        prefix);
  return out;
}

inline Mask mask_union(std::span<const Mask> masks, int width, int height) {
  Mask u(width, height);
  for (const auto& m : masks) {
    if (m.width != width || m.height != height)
      throw ValidationError("mask size does not match image size");
    for (std::size_t i = 0; i < u.bits.size(); ++i) u.bits[i] |= m.bits[i];
  }
  return u;
}

// Pixels under the union of masks become fill; everything else is kept.
inline Image mask_out_objects(const Image& img, std::span<const Mask> masks,
                              Rgb fill = {0, 0, 0}) {
  const Mask u = mask_union(masks, img.width, img.height);
  Image out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      if (u.at(x, y)) out.set(x, y, fill);
  return out;
}

// Pixels whose mean absolute channel difference exceeds the threshold.
inline Mask diff_mask(const Image& a, const Image& b, int threshold) {
  if (a.width != b.width || a.height != b.height)
    throw ValidationError("diff_rois requires images of equal dimensions");
  Mask m(a.width, a.height);
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      const auto i = a.index(x, y);
      int sum = 0;
      for (int ch = 0; ch < 3; ++ch) sum += std::abs(int(a.pixels[i + ch]) - int(b.pixels[i + ch]));
      if (sum > 3 * threshold) m.set(x, y);
    }
  return m;
}

// 8-connected components of set pixels, each as (tight box, pixel count),
// in raster order of their first pixel.
inline std::vector<RoiBox> connected_components(const Mask& m) {
  std::vector<RoiBox> comps;
  std::vector<std::uint8_t> seen(m.bits.size(), 0);
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * m.width + x;
      if (!m.bits[idx] || seen[idx]) continue;
      RoiBox c{{x, y, x + 1, y + 1}, 0};
      seen[idx] = 1;
      stack.emplace_back(x, y);
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        ++c.pixel_count;
        c.box.x0 = std::min(c.box.x0, cx);
        c.box.y0 = std::min(c.box.y0, cy);
        c.box.x1 = std::max(c.box.x1, cx + 1);
        c.box.y1 = std::max(c.box.y1, cy + 1);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= m.width || ny >= m.height) continue;
            const std::size_t n = static_cast<std::size_t>(ny) * m.width + nx;
            if (m.bits[n] && !seen[n]) {
              seen[n] = 1;
              stack.emplace_back(nx, ny);
            }
          }
      }
      comps.push_back(c);
    }
  return comps;
}

// Both inputs are expected to be masked with the same union mask, so
// masked pixels compare equal. Boxes come back sorted by area, largest
// first; equal areas by (y0, x0).
inline std::vector<RoiBox> diff_rois(const Image& masked_a, const Image& masked_b,
                                     const BackgroundConfig& cfg) {
  const Mask hot = diff_mask(masked_a, masked_b, cfg.diff_threshold);
  const double min_pixels =
      cfg.min_roi_area_frac * static_cast<double>(masked_a.width) * masked_a.height;
  std::vector<RoiBox> out;
  for (const auto& c : connected_components(hot))
    if (static_cast<double>(c.pixel_count) >= min_pixels) out.push_back(c);
  std::stable_sort(out.begin(), out.end(), [](const RoiBox& l, const RoiBox& r) {
    if (l.box.area() != r.box.area()) return l.box.area() > r.box.area();
    if (l.box.y0 != r.box.y0) return l.box.y0 < r.box.y0;
    return l.box.x0 < r.box.x0;
  });
  return out;
}

}  // namespace vigil
