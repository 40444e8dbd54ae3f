#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "vigil/errors.hpp"

namespace vigil {

enum class HallucinationCategory {
  objects,
  background,
  position_logic,
  physical,
  object_omission,
};

inline constexpr std::array<HallucinationCategory, 5> kAllCategories = {
    HallucinationCategory::objects, HallucinationCategory::background,
    HallucinationCategory::position_logic, HallucinationCategory::physical,
    HallucinationCategory::object_omission};

// The three categories the pipeline detects and the metrics score.
inline constexpr std::array<HallucinationCategory, 3> kDetectedCategories = {
    HallucinationCategory::objects, HallucinationCategory::background,
    HallucinationCategory::object_omission};

// Annotation JSON keys, byte-for-byte.
constexpr std::string_view to_string(HallucinationCategory c) {
  switch (c) {
    case HallucinationCategory::objects: return "objects";
    case HallucinationCategory::background: return "background";
    case HallucinationCategory::position_logic: return "position_logic";
    case HallucinationCategory::physical: return "physical";
    case HallucinationCategory::object_omission: return "object_omission";
  }
  return "";
}

inline std::optional<HallucinationCategory> parse_category(std::string_view s) {
  for (auto c : kAllCategories)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

enum class HallucinationSubtype {
  ObjectMutation,
  ReferenceBleeding,
  BackgroundMutation,
  ContextSwap,
  Misplacement,
  ReplacementFailure,
  UnwantedObjectFabrication,
  LightingShadowIncoherence,
  PerspectiveScaleIssues,
  ArtifactsDeformations,
  ObjectOmission,
};

inline constexpr std::array<HallucinationSubtype, 11> kAllSubtypes = {
    HallucinationSubtype::ObjectMutation,
    HallucinationSubtype::ReferenceBleeding,
    HallucinationSubtype::BackgroundMutation,
    HallucinationSubtype::ContextSwap,
    HallucinationSubtype::Misplacement,
    HallucinationSubtype::ReplacementFailure,
    HallucinationSubtype::UnwantedObjectFabrication,
    HallucinationSubtype::LightingShadowIncoherence,
    HallucinationSubtype::PerspectiveScaleIssues,
    HallucinationSubtype::ArtifactsDeformations,
    HallucinationSubtype::ObjectOmission};

constexpr HallucinationCategory category_of(HallucinationSubtype s) {
  using S = HallucinationSubtype;
  using C = HallucinationCategory;
  switch (s) {
    case S::ObjectMutation:
    case S::ReferenceBleeding: return C::objects;
    case S::BackgroundMutation:
    case S::ContextSwap: return C::background;
    case S::Misplacement:
    case S::ReplacementFailure:
    case S::UnwantedObjectFabrication: return C::position_logic;
    case S::LightingShadowIncoherence:
    case S::PerspectiveScaleIssues:
    case S::ArtifactsDeformations: return C::physical;
    case S::ObjectOmission: return C::object_omission;
  }
  return C::objects;
}

// Wire identifier.
constexpr std::string_view to_string(HallucinationSubtype s) {
  using S = HallucinationSubtype;
  switch (s) {
    case S::ObjectMutation: return "ObjectMutation";
    case S::ReferenceBleeding: return "ReferenceBleeding";
    case S::BackgroundMutation: return "BackgroundMutation";
    case S::ContextSwap: return "ContextSwap";
    case S::Misplacement: return "Misplacement";
    case S::ReplacementFailure: return "ReplacementFailure";
    case S::UnwantedObjectFabrication: return "UnwantedObjectFabrication";
    case S::LightingShadowIncoherence: return "LightingShadowIncoherence";
    case S::PerspectiveScaleIssues: return "PerspectiveScaleIssues";
    case S::ArtifactsDeformations: return "ArtifactsDeformations";
    case S::ObjectOmission: return "ObjectOmission";
  }
  return "";
}

// Human-readable clause prefix used in report text fields.
constexpr std::string_view display_name(HallucinationSubtype s) {
  using S = HallucinationSubtype;
  switch (s) {
    case S::ObjectMutation: return "Object mutation";
    case S::ReferenceBleeding: return "Reference bleeding";
    case S::BackgroundMutation: return "Background mutation";
    case S::ContextSwap: return "Context swap";
    case S::Misplacement: return "Misplacement";
    case S::ReplacementFailure: return "Replacement failure";
    case S::UnwantedObjectFabrication: return "Unwanted object fabrication";
    case S::LightingShadowIncoherence: return "Lighting and shadow incoherence";
    case S::PerspectiveScaleIssues: return "Perspective and scale issues";
    case S::ArtifactsDeformations: return "Artifacts and deformations";
    case S::ObjectOmission: return "Object omission";
  }
  return "";
}

inline std::optional<HallucinationSubtype> parse_subtype(std::string_view s) {
  for (auto t : kAllSubtypes)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

enum class ProductCategory { clothing, furniture, cosmetics, electronics, cars };

inline constexpr std::array<ProductCategory, 5> kAllProductCategories = {
    ProductCategory::clothing, ProductCategory::furniture,
    ProductCategory::cosmetics, ProductCategory::electronics,
    ProductCategory::cars};

constexpr std::string_view to_string(ProductCategory c) {
  switch (c) {
    case ProductCategory::clothing: return "clothing";
    case ProductCategory::furniture: return "furniture";
    case ProductCategory::cosmetics: return "cosmetics";
    case ProductCategory::electronics: return "electronics";
    case ProductCategory::cars: return "cars";
  }
  return "";
}

// Accepts the canonical names plus "clothes", the column name used in
// published score tables. Case-insensitive.
inline std::optional<ProductCategory> parse_product_category(std::string_view s) {
  std::string lower(s);
  for (auto& ch : lower)
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
  if (lower == "clothes") return ProductCategory::clothing;
  for (auto c : kAllProductCategories)
    if (to_string(c) == lower) return c;
  return std::nullopt;
}

inline ProductCategory require_product_category(std::string_view s) {
  if (auto c = parse_product_category(s)) return *c;
  throw ValidationError("unknown product category: " + std::string(s));
}

}  // namespace vigil
