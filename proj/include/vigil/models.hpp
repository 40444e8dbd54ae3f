#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "vigil/errors.hpp"
#include "vigil/image.hpp"
#include "vigil/taxonomy.hpp"

namespace vigil {

struct EntityDescriptor {
  std::string name;         // short noun phrase from the prompt
  std::string class_label;  // single lowercase noun, used to prompt the segmenter
  bool operator==(const EntityDescriptor&) const = default;
};

struct SegmentedObject {
  std::string class_label;
  double confidence = 0.0;
  Box bbox;
  Mask mask;   // image-sized
  Image crop;  // pixels of bbox
};

struct Finding {
  HallucinationCategory category = HallucinationCategory::objects;
  std::optional<HallucinationSubtype> subtype;
  bool flagged = false;
  std::string description;
  bool operator==(const Finding&) const = default;
};

// "Subtype: description", or the bare description when no subtype is known.
inline std::string clause(const Finding& f) {
  if (!f.subtype) return f.description;
  return std::string(display_name(*f.subtype)) + ": " + f.description;
}

struct JudgeCounts {
  long long tp = 0, fp = 0, fn = 0;
  bool operator==(const JudgeCounts&) const = default;
};

enum class ReasonTask { object_pair, background_direct, background_roi };

constexpr std::string_view to_string(ReasonTask t) {
  switch (t) {
    case ReasonTask::object_pair: return "object_pair";
    case ReasonTask::background_direct: return "background_direct";
    case ReasonTask::background_roi: return "background_roi";
  }
  return "";
}

constexpr HallucinationCategory category_for(ReasonTask t) {
  return t == ReasonTask::object_pair ? HallucinationCategory::objects
                                      : HallucinationCategory::background;
}

// Zero-shot inspector answer: one description per detected category.
struct BaselineDescriptions {
  std::string objects;
  std::string background;
  std::string object_omission;
  bool operator==(const BaselineDescriptions&) const = default;
};

}  // namespace vigil
