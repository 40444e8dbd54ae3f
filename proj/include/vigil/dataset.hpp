#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "vigil/annotation.hpp"
#include "vigil/errors.hpp"
#include "vigil/image_io.hpp"
#include "vigil/taxonomy.hpp"

namespace vigil {

struct Sample {
  std::string id;
  ProductCategory category = ProductCategory::clothing;
  std::string prompt;
  std::filesystem::path background_image;
  std::vector<std::filesystem::path> reference_images;  // 1 or 2
  std::filesystem::path generated_image;
  HallucinationAnnotation annotation;
};

// A sample that failed validation, with a diagnostic naming the field.
struct RejectedSample {
  std::size_t index = 0;  // position in the manifest
  std::string id;         // may be empty if the id itself was bad
  std::string reason;
};

struct Dataset {
  std::filesystem::path root;
  std::vector<Sample> samples;  // manifest order
  std::vector<RejectedSample> rejected;

  std::size_t size() const { return samples.size(); }
  const Sample* find(const std::string& id) const {
    for (const auto& s : samples)
      if (s.id == id) return &s;
    return nullptr;
  }
};

struct LoadOptions {
  // Decode every referenced image during loading.
  bool verify_images = true;
};

inline constexpr const char* kManifestName = "manifest.json";

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& rec, const char* key) {
  auto it = rec.find(key);
  if (it == rec.end()) throw ValidationError(std::string("missing field: ") + key);
  return *it;
}

inline std::string require_string(const nlohmann::json& rec, const char* key) {
  const auto& v = require_field(rec, key);
  if (!v.is_string()) throw ValidationError(std::string("field must be a string: ") + key);
  return v.get<std::string>();
}

inline std::filesystem::path require_image(const std::filesystem::path& root,
                                           const std::string& rel, const char* field,
                                           bool verify) {
  if (rel.empty()) throw ValidationError(std::string("empty image path in field: ") + field);
  auto p = root / rel;
  std::error_code ec;
  if (!std::filesystem::is_regular_file(p, ec))
    throw ValidationError(std::string("missing image file in field ") + field + ": " + rel);
  if (verify && !is_decodable_image(p))
    throw ValidationError(std::string("undecodable image in field ") + field + ": " + rel);
  return p;
}

inline Sample parse_sample(const nlohmann::json& rec, const std::filesystem::path& root,
                           bool verify) {
  if (!rec.is_object()) throw ValidationError("manifest record must be an object");
  static const std::set<std::string> known = {
      "id", "category", "prompt", "background_image",
      "reference_images", "generated_image", "hallucination"};
  for (auto it = rec.begin(); it != rec.end(); ++it)
    if (!known.count(it.key())) throw ValidationError("unknown field: " + it.key());

  Sample s;
  s.id = require_string(rec, "id");
  if (s.id.empty() || s.id.front() == '.' ||
      s.id.find_first_not_of("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789._-") !=
          std::string::npos)
    throw ValidationError("field id must be non-empty and use only [A-Za-z0-9._-]: " + s.id);
  const auto cat = require_string(rec, "category");
  auto pc = parse_product_category(cat);
  if (!pc || cat != to_string(*pc))
    throw ValidationError("invalid value for field category: " + cat);
  s.category = *pc;
  s.prompt = require_string(rec, "prompt");
  if (s.prompt.empty()) throw ValidationError("field must be non-empty: prompt");
  s.background_image =
      require_image(root, require_string(rec, "background_image"), "background_image", verify);
  const auto& refs = require_field(rec, "reference_images");
  if (!refs.is_array() || refs.empty() || refs.size() > 2)
    throw ValidationError("field reference_images must be an array of 1-2 paths");
  for (const auto& r : refs) {
    if (!r.is_string()) throw ValidationError("field reference_images must contain strings");
    s.reference_images.push_back(
        require_image(root, r.get<std::string>(), "reference_images", verify));
  }
  s.generated_image =
      require_image(root, require_string(rec, "generated_image"), "generated_image", verify);
  try {
    s.annotation = validate_annotation(require_field(rec, "hallucination"));
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("field hallucination: ") + e.what());
  }
  return s;
}

}  // namespace detail

// Reads <root>/manifest.json. A missing or unparseable manifest and
// duplicate ids are fatal; other per-record problems reject the record.
inline Dataset load_dataset(const std::filesystem::path& root, LoadOptions opts = {}) {
  const auto manifest = root / kManifestName;
  std::ifstream in(manifest);
  if (!in) throw ValidationError("missing manifest: " + manifest.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("manifest is not valid JSON: " + std::string(e.what()));
  }
  if (!doc.is_array()) throw ValidationError("manifest must be a top-level JSON array");

  Dataset ds;
  ds.root = root;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& rec = doc[i];
    std::string id;
    if (rec.is_object() && rec.contains("id") && rec["id"].is_string())
      id = rec["id"].get<std::string>();
    if (!id.empty() && !ids.insert(id).second)
      throw ValidationError("duplicate sample id: " + id);
    try {
      ds.samples.push_back(detail::parse_sample(rec, root, opts.verify_images));
    } catch (const ValidationError& e) {
      ds.rejected.push_back({i, id, e.what()});
    }
  }
  return ds;
}

struct DatasetStats {
  std::size_t total = 0;
  std::map<ProductCategory, std::size_t> per_category;
  std::size_t clean = 0;
  std::size_t hallucinated = 0;
  std::map<HallucinationCategory, std::size_t> per_hallucination_type;

  bool operator==(const DatasetStats&) const = default;
};

inline DatasetStats dataset_stats(const std::vector<Sample>& samples) {
  DatasetStats st;
  for (auto c : kAllProductCategories) st.per_category[c] = 0;
  for (auto c : kAllCategories) st.per_hallucination_type[c] = 0;
  for (const auto& s : samples) {
    ++st.total;
    ++st.per_category[s.category];
    if (s.annotation.is_clean()) {
      ++st.clean;
      continue;
    }
    ++st.hallucinated;
    for (auto c : kAllCategories)
      if (!s.annotation[c].empty()) ++st.per_hallucination_type[c];
  }
  return st;
}

inline DatasetStats dataset_stats(const Dataset& ds) { return dataset_stats(ds.samples); }

inline nlohmann::ordered_json to_json(const DatasetStats& st) {
  nlohmann::ordered_json j;
  j["total"] = st.total;
  auto& pc = j["per_category"] = nlohmann::ordered_json::object();
  for (const auto& [c, n] : st.per_category) pc[std::string(to_string(c))] = n;
  j["clean"] = st.clean;
  j["hallucinated"] = st.hallucinated;
  auto& pt = j["per_hallucination_type"] = nlohmann::ordered_json::object();
  for (const auto& [c, n] : st.per_hallucination_type) pt[std::string(to_string(c))] = n;
  return j;
}

}  // namespace vigil
