#pragma once

// Request builders and response validators for the /v1/* inference
// protocol. Every backend's responses pass through these validators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vigil/errors.hpp"
#include "vigil/image.hpp"
#include "vigil/image_io.hpp"
#include "vigil/matching.hpp"
#include "vigil/models.hpp"
#include "vigil/rle.hpp"

namespace vigil::wire {

using json = nlohmann::json;

inline constexpr const char* kParse = "/v1/parse";
inline constexpr const char* kSegment = "/v1/segment";
inline constexpr const char* kEmbed = "/v1/embed";
inline constexpr const char* kReason = "/v1/reason";
inline constexpr const char* kJudge = "/v1/judge";
inline constexpr const char* kBaselineTask = "baseline";

inline json parse_request(const std::string& prompt) { return {{"prompt", prompt}}; }

inline json segment_request(const Image& img, const std::vector<std::string>& labels) {
  return {{"image_b64", image_to_b64(img)}, {"labels", labels}};
}

inline json embed_request(const Image& img) { return {{"image_b64", image_to_b64(img)}}; }

inline json reason_request(std::string_view task, std::span<const Image> images,
                           const std::string& instruction) {
  json imgs = json::array();
  for (const auto& im : images) imgs.push_back(image_to_b64(im));
  return {{"task", std::string(task)}, {"images_b64", std::move(imgs)}, {"instruction", instruction}};
}

inline json judge_request(const std::string& predicted, const std::string& ground_truth) {
  return {{"predicted", predicted}, {"ground_truth", ground_truth}};
}

namespace detail {

[[noreturn]] inline void fail(const std::string& what, const json& raw) {
  throw ProtocolError(what, raw.dump());
}

inline const json& field(const json& j, const char* key, const json& raw) {
  if (!j.is_object()) fail("response must be a JSON object", raw);
  auto it = j.find(key);
  if (it == j.end()) fail(std::string("response missing field: ") + key, raw);
  return *it;
}

inline std::string string_field(const json& j, const char* key, const json& raw) {
  const auto& v = field(j, key, raw);
  if (!v.is_string()) fail(std::string("response field must be a string: ") + key, raw);
  return v.get<std::string>();
}

inline long long count_field(const json& j, const char* key, const json& raw) {
  const auto& v = field(j, key, raw);
  if (!v.is_number_integer()) fail(std::string("response field must be an integer: ") + key, raw);
  const auto n = v.get<long long>();
  if (n < 0) fail(std::string("response field must be non-negative: ") + key, raw);
  return n;
}

inline bool is_lowercase(const std::string& s) {
  return std::none_of(s.begin(), s.end(), [](char c) { return c >= 'A' && c <= 'Z'; });
}

}  // namespace detail

inline std::vector<EntityDescriptor> validate_parse_response(const json& r) {
  const auto& ents = detail::field(r, "entities", r);
  if (!ents.is_array()) detail::fail("entities must be an array", r);
  std::vector<EntityDescriptor> out;
  for (const auto& e : ents) {
    EntityDescriptor d{detail::string_field(e, "name", r), detail::string_field(e, "class_label", r)};
    if (d.name.empty()) detail::fail("entity name must be non-empty", r);
    if (d.class_label.empty() || !detail::is_lowercase(d.class_label))
      detail::fail("entity class_label must be non-empty and lowercase", r);
    out.push_back(std::move(d));
  }
  return out;
}

// Objects come back sorted by descending confidence (stable).
inline std::vector<SegmentedObject> validate_segment_response(
    const json& r, const std::vector<std::string>& labels, const Image& image) {
  const auto& objs = detail::field(r, "objects", r);
  if (!objs.is_array()) detail::fail("objects must be an array", r);
  const std::set<std::string> allowed(labels.begin(), labels.end());
  std::vector<SegmentedObject> out;
  for (const auto& o : objs) {
    SegmentedObject so;
    so.class_label = detail::string_field(o, "class_label", r);
    if (!allowed.count(so.class_label))
      detail::fail("segment returned a label outside the requested set: " + so.class_label, r);
    const auto& conf = detail::field(o, "confidence", r);
    if (!conf.is_number()) detail::fail("confidence must be a number", r);
    so.confidence = conf.get<double>();
    if (!(so.confidence >= 0.0 && so.confidence <= 1.0)) detail::fail("confidence outside [0, 1]", r);

    const auto h = detail::count_field(o, "height", r);
    const auto w = detail::count_field(o, "width", r);
    if (h != image.height || w != image.width)
      detail::fail("mask dimensions do not match the image", r);

    const auto& bb = detail::field(o, "bbox", r);
    if (!bb.is_array() || bb.size() != 4 ||
        !std::all_of(bb.begin(), bb.end(), [](const json& v) { return v.is_number_integer(); }))
      detail::fail("bbox must be four integers", r);
    so.bbox = {bb[0].get<int>(), bb[1].get<int>(), bb[2].get<int>(), bb[3].get<int>()};
    if (so.bbox.empty() || !image.bounds().contains(so.bbox))
      detail::fail("bbox must satisfy x0<x1, y0<y1 and lie inside the image", r);

    const auto& rle = detail::field(o, "mask_rle", r);
    if (!rle.is_array()) detail::fail("mask_rle must be an array", r);
    std::vector<std::int64_t> counts;
    for (const auto& c : rle) {
      if (!c.is_number_integer()) detail::fail("mask_rle must contain integers", r);
      counts.push_back(c.get<std::int64_t>());
    }
    try {
      so.mask = rle_decode(counts, image.width, image.height);
    } catch (const ProtocolError& e) {
      detail::fail(e.what(), r);
    }
    for (int y = 0; y < so.mask.height; ++y)
      for (int x = 0; x < so.mask.width; ++x)
        if (so.mask.at(x, y) && !so.bbox.contains(x, y))
          detail::fail("mask pixel outside bbox", r);
    so.crop = crop(image, so.bbox);
    out.push_back(std::move(so));
  }
  std::stable_sort(out.begin(), out.end(), [](const SegmentedObject& a, const SegmentedObject& b) {
    return a.confidence > b.confidence;
  });
  return out;
}

inline Embedding validate_embed_response(const json& r, std::size_t expected_dim) {
  const auto dim = detail::count_field(r, "dim", r);
  const auto& vals = detail::field(r, "embedding", r);
  if (!vals.is_array()) detail::fail("embedding must be an array", r);
  if (static_cast<std::size_t>(dim) != expected_dim || vals.size() != expected_dim)
    detail::fail("embedding dimension " + std::to_string(vals.size()) + " (dim " +
                     std::to_string(dim) + ") does not match configured " +
                     std::to_string(expected_dim),
                 r);
  Embedding e;
  e.reserve(vals.size());
  for (const auto& v : vals) {
    if (!v.is_number()) detail::fail("embedding values must be numbers", r);
    const double d = v.get<double>();
    if (!std::isfinite(d)) detail::fail("embedding values must be finite", r);
    e.push_back(d);
  }
  return e;
}

inline Finding validate_reason_response(const json& r, ReasonTask task) {
  const auto& flagged = detail::field(r, "flagged", r);
  if (!flagged.is_boolean()) detail::fail("flagged must be a boolean", r);
  Finding f;
  f.flagged = flagged.get<bool>();
  const auto cat = parse_category(detail::string_field(r, "category", r));
  if (!cat) detail::fail("unknown category", r);
  if (*cat != category_for(task))
    detail::fail("category does not match task " + std::string(to_string(task)), r);
  f.category = *cat;
  const auto& sub = detail::field(r, "subtype", r);
  if (!sub.is_null()) {
    if (!sub.is_string()) detail::fail("subtype must be a string or null", r);
    f.subtype = parse_subtype(sub.get<std::string>());
    if (!f.subtype) detail::fail("unknown subtype", r);
    if (category_of(*f.subtype) != f.category) detail::fail("subtype does not belong to category", r);
  }
  f.description = detail::string_field(r, "description", r);
  if (!f.flagged && !f.description.empty())
    detail::fail("unflagged finding must have an empty description", r);
  if (f.flagged && f.description.empty())
    detail::fail("flagged finding must carry a description", r);
  return f;
}

inline BaselineDescriptions validate_baseline_response(const json& r) {
  if (!r.is_object()) detail::fail("response must be a JSON object", r);
  for (auto it = r.begin(); it != r.end(); ++it)
    if (it.key() != "objects" && it.key() != "background" && it.key() != "object_omission")
      detail::fail("unexpected field in baseline response: " + it.key(), r);
  return {detail::string_field(r, "objects", r), detail::string_field(r, "background", r),
          detail::string_field(r, "object_omission", r)};
}

inline JudgeCounts validate_judge_response(const json& r) {
  return {detail::count_field(r, "tp", r), detail::count_field(r, "fp", r),
          detail::count_field(r, "fn", r)};
}

// Response encoders, used by recorders and test servers.
inline json encode_segmented(const std::string& label, double confidence, const Box& bbox,
                             const Mask& mask) {
  return {{"class_label", label},
          {"confidence", confidence},
          {"bbox", {bbox.x0, bbox.y0, bbox.x1, bbox.y1}},
          {"mask_rle", rle_encode(mask)},
          {"height", mask.height},
          {"width", mask.width}};
}

inline json encode_finding(const Finding& f) {
  return {{"flagged", f.flagged},
          {"category", std::string(to_string(f.category))},
          {"subtype", f.subtype ? json(std::string(to_string(*f.subtype))) : json(nullptr)},
          {"description", f.description}};
}

}  // namespace vigil::wire
