#pragma once

#include <array>
#include <string>

#include "json.hpp"
#include "vigil/errors.hpp"
#include "vigil/taxonomy.hpp"

namespace vigil {

// Five free-text fields keyed by hallucination category. An empty string
// means no hallucination of that category. Used both for ground truth and
// for pipeline output.
class HallucinationAnnotation {
public:
  HallucinationAnnotation() = default;

  const std::string& operator[](HallucinationCategory c) const {
    return fields_[static_cast<std::size_t>(c)];
  }
  std::string& operator[](HallucinationCategory c) {
    return fields_[static_cast<std::size_t>(c)];
  }

  bool is_clean() const {
    for (const auto& f : fields_)
      if (!f.empty()) return false;
    return true;
  }

  bool operator==(const HallucinationAnnotation&) const = default;

private:
  std::array<std::string, 5> fields_;
};

// Keys are emitted in the canonical order objects, background,
// position_logic, physical, object_omission.
inline nlohmann::ordered_json to_json(const HallucinationAnnotation& a) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (auto c : kAllCategories) j[std::string(to_string(c))] = a[c];
  return j;
}

// Strict: all five keys, string values, nothing else.
template <typename Json>
HallucinationAnnotation validate_annotation(const Json& raw) {
  if (!raw.is_object())
    throw ValidationError("hallucination annotation must be a JSON object");
  for (auto it = raw.begin(); it != raw.end(); ++it)
    if (!parse_category(it.key()))
      throw ValidationError("unknown key: " + it.key());
  HallucinationAnnotation a;
  for (auto c : kAllCategories) {
    const std::string key(to_string(c));
    auto it = raw.find(key);
    if (it == raw.end()) throw ValidationError("missing key: " + key);
    if (!it->is_string())
      throw ValidationError("non-string value for key: " + key);
    a[c] = it->template get<std::string>();
  }
  return a;
}

}  // namespace vigil
