#pragma once

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vigil/annotation.hpp"
#include "vigil/errors.hpp"
#include "vigil/models.hpp"
#include "vigil/taxonomy.hpp"

namespace vigil {

// Positive flags for the three detected categories.
struct LabelVector {
  bool objects = false;
  bool background = false;
  bool object_omission = false;

  bool operator[](HallucinationCategory c) const {
    switch (c) {
      case HallucinationCategory::objects: return objects;
      case HallucinationCategory::background: return background;
      case HallucinationCategory::object_omission: return object_omission;
      default: throw ValidationError("category is not scored: " + std::string(to_string(c)));
    }
  }
  bool operator==(const LabelVector&) const = default;
};

inline LabelVector binarize(const HallucinationAnnotation& a) {
  return {!a[HallucinationCategory::objects].empty(), !a[HallucinationCategory::background].empty(),
          !a[HallucinationCategory::object_omission].empty()};
}

struct TypeScore {
  long long tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  // Some ratio had a zero denominator and was reported as 0.
  bool degenerate = false;
};

struct F1Breakdown {
  std::array<TypeScore, 3> per_type;  // kDetectedCategories order
  double macro_f1 = 0.0;
  bool degenerate = false;

  const TypeScore& operator[](HallucinationCategory c) const { return per_type[slot(c)]; }

  static std::size_t slot(HallucinationCategory c) {
    for (std::size_t i = 0; i < kDetectedCategories.size(); ++i)
      if (kDetectedCategories[i] == c) return i;
    throw ValidationError("category is not scored: " + std::string(to_string(c)));
  }
};

inline TypeScore score_counts(long long tp, long long fp, long long fn) {
  TypeScore s{tp, fp, fn};
  const auto pd = tp + fp, rd = tp + fn;
  s.precision = pd > 0 ? static_cast<double>(tp) / static_cast<double>(pd) : 0.0;
  s.recall = rd > 0 ? static_cast<double>(tp) / static_cast<double>(rd) : 0.0;
  const double fd = s.precision + s.recall;
  s.f1 = fd > 0.0 ? 2.0 * s.precision * s.recall / fd : 0.0;
  s.degenerate = pd == 0 || rd == 0 || fd == 0.0;
  return s;
}

namespace detail {

inline F1Breakdown finish(const std::array<std::array<long long, 3>, 3>& counts) {
  F1Breakdown out;
  double sum = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    out.per_type[i] = score_counts(counts[i][0], counts[i][1], counts[i][2]);
    out.degenerate = out.degenerate || out.per_type[i].degenerate;
    sum += out.per_type[i].f1;
  }
  out.macro_f1 = sum / 3.0;
  return out;
}

}  // namespace detail

inline F1Breakdown multilabel_f1(std::span<const LabelVector> predictions,
                                 std::span<const LabelVector> ground_truth) {
  if (predictions.size() != ground_truth.size())
    throw ValidationError("predictions and ground truth differ in length");
  std::array<std::array<long long, 3>, 3> counts{};
  for (std::size_t s = 0; s < predictions.size(); ++s)
    for (std::size_t i = 0; i < 3; ++i) {
      const auto c = kDetectedCategories[i];
      const bool p = predictions[s][c], t = ground_truth[s][c];
      if (p && t) ++counts[i][0];
      else if (p) ++counts[i][1];
      else if (t) ++counts[i][2];
    }
  return detail::finish(counts);
}

// Sums defect-level judge counts per category, then scores like
// multilabel_f1.
inline F1Breakdown aggregate_judge(std::span<const std::pair<HallucinationCategory, JudgeCounts>> per_sample) {
  std::array<std::array<long long, 3>, 3> counts{};
  for (const auto& [cat, jc] : per_sample) {
    if (jc.tp < 0 || jc.fp < 0 || jc.fn < 0) throw ValidationError("judge counts must be non-negative");
    const auto i = F1Breakdown::slot(cat);
    counts[i][0] += jc.tp;
    counts[i][1] += jc.fp;
    counts[i][2] += jc.fn;
  }
  return detail::finish(counts);
}

inline nlohmann::ordered_json to_json(const F1Breakdown& b) {
  nlohmann::ordered_json j;
  auto& pt = j["per_type"] = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& s = b.per_type[i];
    pt[std::string(to_string(kDetectedCategories[i]))] = {
        {"tp", s.tp},     {"fp", s.fp}, {"fn", s.fn},
        {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
        {"degenerate", s.degenerate}};
  }
  j["macro_f1"] = b.macro_f1;
  j["degenerate"] = b.degenerate;
  return j;
}

}  // namespace vigil
