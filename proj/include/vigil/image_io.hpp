#pragma once

// Codec, resampling and annotation drawing, backed by OpenCV. Everything
// else in the library works on the plain Image/Mask value types.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "vigil/errors.hpp"
#include "vigil/hash.hpp"
#include "vigil/image.hpp"

namespace vigil {

namespace detail {

inline Image from_bgr_mat(const cv::Mat& bgr) {
  Image img(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) img.set(x, y, {row[x][2], row[x][1], row[x][0]});
  }
  return img;
}

inline cv::Mat to_bgr_mat(const Image& img) {
  cv::Mat m(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width; ++x) {
      auto c = img.at(x, y);
      row[x] = cv::Vec3b(c[2], c[1], c[0]);
    }
  }
  return m;
}

}  // namespace detail

inline Image decode_image(std::string_view bytes) {
  std::vector<uchar> buf(bytes.begin(), bytes.end());
  cv::Mat m;
  if (!buf.empty()) m = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (m.empty()) throw ValidationError("image bytes do not decode as PNG/JPEG");
  return detail::from_bgr_mat(m);
}

inline Image read_image(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (m.empty()) throw ValidationError("cannot decode image: " + path.string());
  return detail::from_bgr_mat(m);
}

// Cheap decodability check for dataset validation.
inline bool is_decodable_image(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return false;
  return !cv::imread(path.string(), cv::IMREAD_REDUCED_GRAYSCALE_8).empty();
}

inline std::string encode_png(const Image& img) {
  std::vector<uchar> buf;
  if (!cv::imencode(".png", detail::to_bgr_mat(img), buf, {cv::IMWRITE_PNG_COMPRESSION, 6}))
    throw Error("PNG encoding failed");
  return {buf.begin(), buf.end()};
}

inline void write_png(const Image& img, const std::filesystem::path& path) {
  if (!cv::imwrite(path.string(), detail::to_bgr_mat(img)))
    throw Error("cannot write image: " + path.string());
}

// Bilinear resampling.
inline Image resize_bilinear(const Image& img, int width, int height) {
  if (img.width == width && img.height == height) return img;
  cv::Mat out;
  cv::resize(detail::to_bgr_mat(img), out, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
  return detail::from_bgr_mat(out);
}

inline Image draw_boxes(const Image& img, const std::vector<Box>& boxes,
                        Rgb color = {255, 0, 0}, int thickness = 2) {
  cv::Mat m = detail::to_bgr_mat(img);
  for (const auto& b : boxes)
    cv::rectangle(m, cv::Point(b.x0, b.y0), cv::Point(b.x1 - 1, b.y1 - 1),
                  cv::Scalar(color[2], color[1], color[0]), thickness);
  return detail::from_bgr_mat(m);
}

// Digest of decoded pixels, independent of the container encoding.
inline std::string pixel_digest(const Image& img) {
  std::string buf = std::to_string(img.width) + "x" + std::to_string(img.height) + "x3:";
  buf.append(img.pixels.begin(), img.pixels.end());
  return sha256_hex(buf);
}

inline std::string image_to_b64(const Image& img) { return base64_encode(encode_png(img)); }

inline Image image_from_b64(std::string_view b64) { return decode_image(base64_decode(b64)); }

}  // namespace vigil
