#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "vigil/annotation.hpp"
#include "vigil/background.hpp"
#include "vigil/client.hpp"
#include "vigil/dataset.hpp"
#include "vigil/errors.hpp"
#include "vigil/image_io.hpp"
#include "vigil/matching.hpp"
#include "vigil/models.hpp"

namespace vigil {

using ojson = nlohmann::ordered_json;

inline constexpr double kMinSegmentConfidence = 0.5;
inline constexpr const char* kInstructionSlot = "{instruction prompt}";

struct PromptTemplates {
  // {entity} is replaced by the entity name.
  std::string object_pair =
      "The first image is a crop of the reference object \"{entity}\". The second image is the "
      "same object as rendered in a generated scene. When a third image is present it shows the "
      "other reference object of the scene. Decide whether the generated object deviates from its "
      "reference in texture, material, color or geometric structure (ObjectMutation), or whether "
      "visual traits of the other reference object leaked into it (ReferenceBleeding). Ignore "
      "changes in pose, scale, lighting and cropping. Answer with a flag, an optional subtype and "
      "a one-sentence description of the defect.";
  // {fill} is replaced by the mask fill color name.
  std::string background_direct =
      "The first image is the original background scene and the second image is the generated "
      "scene. Regions painted {fill} were occupied by inserted objects and must be ignored. "
      "Report structural changes to the remaining environment (BackgroundMutation) or a "
      "replaced environment (ContextSwap). Contact shadows, reflections and subtle lighting "
      "adjustments needed to integrate the objects are not hallucinations.";
  // {fill} and {roi_count} are replaced.
  std::string background_roi =
      "The first image is the original background scene and the second image is the generated "
      "scene. Regions painted {fill} were occupied by inserted objects and must be ignored. "
      "{roi_count} red box(es) mark areas where the two images differ at pixel level. Inspect "
      "the boxed areas and report structural changes (BackgroundMutation) or a replaced "
      "environment (ContextSwap). Contact shadows, reflections and subtle lighting adjustments "
      "needed to integrate the objects are not hallucinations.";
  std::string baseline =
      "You are an image re-contextualization hallucination inspector.\n"
      "You will be given:\n\n"
      "- An instruction prompt (what the generator was asked to do),\n\n"
      "- A background image (background image),\n\n"
      "- Reference object image(s) (one or two) - object 1 image, object 2 image,\n\n"
      "- The generated image (generated image) - result of re-contextualization.\n\n"
      "Your task: compare the generated image to the references and to the instruction, and "
      "produce THREE SHORT SEMANTIC DESCRIPTIONS (1-3 sentences each) answering the following "
      "categories. If no issues or hallucinations are detected in a category, return an empty "
      "string (\"\") for that category.\n\n"
      "Categories:\n\n"
      "1) objects: Object Visual Fidelity - texture/shape/color identity mismatches, mutations, "
      "identity loss, reference bleeding. Example: \"Feature Mutation: sofa's color changed from "
      "dark green to black; Identity Loss: inserted cabinet is metallic vs wicker.\"\n\n"
      "2) background: Background Fidelity - background mutations, background detail loss, context "
      "swap. Example: \"Background Mutation: wall color changed; Context Swap: bedroom replaced by "
      "living room.\"\n\n"
      "3) object omission: Object Omission - missing required objects from the instruction that "
      "should have been pasted from object image. Example: \"Object Omission: green cabinet "
      "missing.\"\n\n"
      "Instruction Prompt:\n"
      "{instruction prompt}\n\n"
      "Analyze the provided images now.";
};

struct PipelineConfig {
  double tau = 0.1;
  BackgroundConfig background{.margin_delta = 0.2};
  bool use_roi_boxes = false;
  PromptTemplates prompt_templates;
  std::size_t embed_dim = kDefaultEmbedDim;

  void validate() const {
    if (!(tau >= -1.0 && tau <= 1.0)) throw ConfigError("tau must lie in [-1, 1]");
    background.validate();
    if (embed_dim == 0) throw ConfigError("embed_dim must be positive");
    const auto& t = prompt_templates;
    for (const auto* s : {&t.object_pair, &t.background_direct, &t.background_roi, &t.baseline})
      if (s->empty()) throw ConfigError("prompt templates must be non-empty");
  }
  void validate_for_baseline() const {
    validate();
    if (prompt_templates.baseline.find(kInstructionSlot) == std::string::npos)
      throw ConfigError("baseline template lacks the {instruction prompt} slot");
  }
};

inline ojson to_json(const PipelineConfig& c) {
  const auto& b = c.background;
  return {{"tau", c.tau},
          {"background",
           {{"margin_delta", b.margin_delta},
            {"diff_threshold", b.diff_threshold},
            {"min_roi_area_frac", b.min_roi_area_frac},
            {"fill_value", {b.fill_value[0], b.fill_value[1], b.fill_value[2]}}}},
          {"use_roi_boxes", c.use_roi_boxes},
          {"prompt_templates",
           {{"object_pair", c.prompt_templates.object_pair},
            {"background_direct", c.prompt_templates.background_direct},
            {"background_roi", c.prompt_templates.background_roi},
            {"baseline", c.prompt_templates.baseline}}},
          {"embed_dim", c.embed_dim}};
}

namespace detail {

template <typename F>
void for_each_known(const nlohmann::json& obj, const std::set<std::string>& known,
                    const std::string& where, F&& f) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("unknown config key: " + where + it.key());
    f(it.key(), it.value());
  }
}

template <typename T>
T config_value(const nlohmann::json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("bad type for config key: " + key);
  }
}

}  // namespace detail

// Missing keys keep their defaults; unknown keys are rejected.
inline PipelineConfig parse_pipeline_config(const nlohmann::json& j) {
  PipelineConfig c;
  detail::for_each_known(
      j, {"tau", "background", "use_roi_boxes", "prompt_templates", "embed_dim"}, "",
      [&](const std::string& k, const nlohmann::json& v) {
        if (k == "tau") c.tau = detail::config_value<double>(v, k);
        else if (k == "use_roi_boxes") c.use_roi_boxes = detail::config_value<bool>(v, k);
        else if (k == "embed_dim") c.embed_dim = detail::config_value<std::size_t>(v, k);
        else if (k == "background")
          detail::for_each_known(
              v, {"margin_delta", "diff_threshold", "min_roi_area_frac", "fill_value"}, "background.",
              [&](const std::string& bk, const nlohmann::json& bv) {
                if (bk == "margin_delta") c.background.margin_delta = detail::config_value<double>(bv, bk);
                else if (bk == "diff_threshold") c.background.diff_threshold = detail::config_value<int>(bv, bk);
                else if (bk == "min_roi_area_frac")
                  c.background.min_roi_area_frac = detail::config_value<double>(bv, bk);
                else {
                  const auto rgb = detail::config_value<std::vector<int>>(bv, bk);
                  if (rgb.size() != 3 || std::any_of(rgb.begin(), rgb.end(), [](int x) { return x < 0 || x > 255; }))
                    throw ConfigError("fill_value must be three integers in [0, 255]");
                  c.background.fill_value = {static_cast<std::uint8_t>(rgb[0]), static_cast<std::uint8_t>(rgb[1]),
                                             static_cast<std::uint8_t>(rgb[2])};
                }
              });
        else
          detail::for_each_known(
              v, {"object_pair", "background_direct", "background_roi", "baseline"}, "prompt_templates.",
              [&](const std::string& tk, const nlohmann::json& tv) {
                auto s = detail::config_value<std::string>(tv, tk);
                auto& t = c.prompt_templates;
                (tk == "object_pair" ? t.object_pair
                 : tk == "background_direct" ? t.background_direct
                 : tk == "background_roi" ? t.background_roi
                                          : t.baseline) = std::move(s);
              });
      });
  c.validate();
  return c;
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  try {
    return parse_pipeline_config(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
}

inline std::string fill_template(std::string text, const std::map<std::string, std::string>& slots) {
  for (const auto& [key, value] : slots) {
    const std::string token = "{" + key + "}";
    for (auto pos = text.find(token); pos != std::string::npos; pos = text.find(token, pos + value.size()))
      text.replace(pos, token.size(), value);
  }
  return text;
}

inline std::string color_name(Rgb c) {
  if (c == Rgb{0, 0, 0}) return "black";
  if (c == Rgb{255, 255, 255}) return "white";
  return "rgb(" + std::to_string(c[0]) + "," + std::to_string(c[1]) + "," + std::to_string(c[2]) + ")";
}

// Which stage produced a finding.
struct SourcedFinding {
  std::string source;  // "omission:<ref>", "pair:<ref>", "background_direct", "background_roi", "baseline"
  Finding finding;
};

struct ObjectSummary {
  std::string entity;  // empty for generated objects
  std::string class_label;
  double confidence = 0.0;
  Box bbox;
  std::size_t image = 0;  // reference image index, or 0 for the generated image
};

struct DetectionReport {
  std::string sample_id;
  std::string mode = "pipeline";
  HallucinationAnnotation hallucination;
  std::vector<SourcedFinding> findings;
  std::optional<MatchResult> match;
  std::vector<ObjectSummary> references;
  std::vector<ObjectSummary> generated;
  std::vector<RoiBox> rois;
  std::vector<std::string> warnings;
  ojson provenance = ojson::object();
};

inline ojson box_json(const Box& b) { return ojson::array({b.x0, b.y0, b.x1, b.y1}); }

inline ojson to_json(const DetectionReport& r) {
  ojson j;
  j["sample_id"] = r.sample_id;
  j["mode"] = r.mode;
  j["hallucination"] = to_json(r.hallucination);
  auto& fs = j["findings"] = ojson::array();
  for (const auto& sf : r.findings) {
    const auto& f = sf.finding;
    fs.push_back({{"source", sf.source},
                  {"category", std::string(to_string(f.category))},
                  {"subtype", f.subtype ? ojson(std::string(to_string(*f.subtype))) : ojson(nullptr)},
                  {"flagged", f.flagged},
                  {"description", f.description}});
  }
  if (r.match) {
    const auto& m = *r.match;
    ojson mj;
    mj["tau"] = m.tau;
    auto objects = [](const std::vector<ObjectSummary>& v) {
      ojson a = ojson::array();
      for (const auto& o : v) {
        ojson e;
        if (!o.entity.empty()) e["entity"] = o.entity;
        e["class_label"] = o.class_label;
        e["confidence"] = o.confidence;
        e["bbox"] = box_json(o.bbox);
        e["image"] = o.image;
        a.push_back(std::move(e));
      }
      return a;
    };
    mj["references"] = objects(r.references);
    mj["generated"] = objects(r.generated);
    auto pairs = [](const std::vector<MatchedPair>& v) {
      ojson a = ojson::array();
      for (const auto& p : v) a.push_back({{"ref", p.ref}, {"gen", p.gen}, {"similarity", p.similarity}});
      return a;
    };
    mj["pairs"] = pairs(m.pairs);
    mj["rejected"] = pairs(m.rejected);
    mj["omissions"] = m.omissions;
    j["match"] = std::move(mj);
  } else {
    j["match"] = nullptr;
  }
  auto& rois = j["rois"] = ojson::array();
  for (const auto& roi : r.rois) rois.push_back(box_json(roi.box));
  j["warnings"] = r.warnings;
  j["provenance"] = r.provenance;
  return j;
}

// Five-key schema with the two undetected categories empty.
inline HallucinationAnnotation validate_report(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("report must be a JSON object");
  if (!j.contains("sample_id") || !j["sample_id"].is_string() || j["sample_id"].get<std::string>().empty())
    throw ValidationError("report lacks a sample_id");
  if (!j.contains("hallucination")) throw ValidationError("report lacks the hallucination map");
  auto a = validate_annotation(j["hallucination"]);
  for (auto c : {HallucinationCategory::position_logic, HallucinationCategory::physical})
    if (!a[c].empty())
      throw ValidationError("report field must be empty: " + std::string(to_string(c)));
  return a;
}

class NoEntitiesError : public Error {
public:
  using Error::Error;
};

namespace detail {

inline std::string join_clauses(const std::vector<std::string>& clauses) {
  std::string out;
  for (const auto& c : clauses) {
    if (!out.empty()) out += "; ";
    out += c;
  }
  return out;
}

struct Detection {
  SegmentedObject object;
  std::size_t image = 0;
};

// Keeps detections at or above the confidence floor, at most `cap[label]`
// per label, highest confidence first (ties by input order).
inline std::vector<Detection> filter_detections(std::vector<Detection> dets,
                                                const std::map<std::string, std::size_t>& cap) {
  std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    return a.object.confidence > b.object.confidence;
  });
  std::map<std::string, std::size_t> taken;
  std::vector<Detection> out;
  for (auto& d : dets) {
    if (d.object.confidence < kMinSegmentConfidence) continue;
    auto it = cap.find(d.object.class_label);
    if (it == cap.end() || taken[d.object.class_label] >= it->second) continue;
    ++taken[d.object.class_label];
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace detail

inline DetectionReport run_sample(const Sample& sample, const PipelineConfig& cfg, const ModelClient& client) {
  cfg.validate();
  const auto& bg_cfg = cfg.background;
  const double delta = bg_cfg.margin_delta;

  DetectionReport rep;
  rep.sample_id = sample.id;

  // (1) entities
  const auto entities = client.parse_entities(sample.prompt);
  if (entities.empty()) throw NoEntitiesError("no entities parsed from prompt of sample " + sample.id);
  std::vector<std::string> labels;
  std::map<std::string, std::size_t> per_label;
  for (const auto& e : entities) {
    if (per_label[e.class_label]++ == 0) labels.push_back(e.class_label);
  }

  // (2) segmentation
  std::vector<Image> ref_images;
  for (const auto& p : sample.reference_images) ref_images.push_back(read_image(p));
  const Image generated = read_image(sample.generated_image);

  std::vector<detail::Detection> ref_raw;
  for (std::size_t k = 0; k < ref_images.size(); ++k)
    for (auto& o : client.segment(ref_images[k], labels)) ref_raw.push_back({std::move(o), k});
  auto ref_dets = detail::filter_detections(std::move(ref_raw), per_label);

  std::vector<detail::Detection> gen_raw;
  for (auto& o : client.segment(generated, labels)) gen_raw.push_back({std::move(o), 0});
  const auto gen_dets = detail::filter_detections(std::move(gen_raw), per_label);

  // Reference objects in entity mention order; each entity takes the next
  // unused reference detection with its label (reference image order,
  // then confidence).
  std::stable_sort(ref_dets.begin(), ref_dets.end(),
                   [](const detail::Detection& a, const detail::Detection& b) { return a.image < b.image; });
  std::vector<const detail::Detection*> refs;
  std::vector<char> used(ref_dets.size(), 0);
  for (const auto& e : entities) {
    const detail::Detection* found = nullptr;
    for (std::size_t i = 0; i < ref_dets.size() && !found; ++i)
      if (!used[i] && ref_dets[i].object.class_label == e.class_label) {
        used[i] = 1;
        found = &ref_dets[i];
      }
    if (!found) {
      rep.warnings.push_back("no reference detection for entity \"" + e.name + "\"");
      continue;
    }
    refs.push_back(found);
    rep.references.push_back({e.name, e.class_label, found->object.confidence, found->object.bbox, found->image});
  }
  for (const auto& d : gen_dets)
    rep.generated.push_back({"", d.object.class_label, d.object.confidence, d.object.bbox, 0});

  // (3) embeddings and matching
  auto padded_crop = [&](const Image& img, const Box& b) {
    return crop(img, pad_box(b, delta, img.width, img.height));
  };
  std::vector<Image> ref_crops, gen_crops;
  std::vector<LabeledEmbedding> ref_emb, gen_emb;
  for (const auto* d : refs) {
    ref_crops.push_back(padded_crop(ref_images[d->image], d->object.bbox));
    ref_emb.push_back({client.embed(ref_crops.back()), d->object.class_label});
  }
  for (const auto& d : gen_dets) {
    gen_crops.push_back(padded_crop(generated, d.object.bbox));
    gen_emb.push_back({client.embed(gen_crops.back()), d.object.class_label});
  }
  const auto matrix = build_similarity_matrix(ref_emb, gen_emb);
  rep.match = match_objects(matrix, cfg.tau);
  const auto& match = *rep.match;

  // (4) omissions
  std::vector<std::string> omission_clauses;
  for (auto r : match.omissions) {
    Finding f{HallucinationCategory::object_omission, HallucinationSubtype::ObjectOmission, true,
              "The " + rep.references[r].entity + " is missing from the generated image."};
    omission_clauses.push_back(clause(f));
    rep.findings.push_back({"omission:" + std::to_string(r), std::move(f)});
  }
  rep.hallucination[HallucinationCategory::object_omission] = detail::join_clauses(omission_clauses);

  // (5) pair reasoning
  std::vector<std::string> object_clauses;
  for (const auto& p : match.pairs) {
    std::vector<Image> imgs{ref_crops[p.ref], gen_crops[p.gen]};
    if (sample.reference_images.size() == 2)
      for (std::size_t o = 0; o < refs.size(); ++o)
        if (o != p.ref) {
          imgs.push_back(ref_crops[o]);
          break;
        }
    const auto instr = fill_template(cfg.prompt_templates.object_pair, {{"entity", rep.references[p.ref].entity}});
    auto f = client.reason(ReasonTask::object_pair, imgs, instr);
    if (f.flagged) object_clauses.push_back(clause(f));
    rep.findings.push_back({"pair:" + std::to_string(p.ref), std::move(f)});
  }
  rep.hallucination[HallucinationCategory::objects] = detail::join_clauses(object_clauses);

  // (6) background
  Image background = read_image(sample.background_image);
  ojson resize_note = nullptr;
  if (background.width != generated.width || background.height != generated.height) {
    resize_note = {{"from", {background.width, background.height}}, {"to", {generated.width, generated.height}},
                   {"method", "bilinear"}};
    background = resize_bilinear(background, generated.width, generated.height);
  }
  std::vector<Mask> dilated;
  for (const auto& d : gen_dets) dilated.push_back(dilate_mask(d.object.mask, d.object.bbox, delta));
  const Image masked_bg = mask_out_objects(background, dilated, bg_cfg.fill_value);
  const Image masked_gen = mask_out_objects(generated, dilated, bg_cfg.fill_value);
  const auto fill = color_name(bg_cfg.fill_value);

  std::vector<std::string> bg_clauses;
  auto add_bg = [&](const char* source, Finding f) {
    if (f.flagged) {
      auto c = clause(f);
      if (std::find(bg_clauses.begin(), bg_clauses.end(), c) == bg_clauses.end()) bg_clauses.push_back(c);
    }
    rep.findings.push_back({source, std::move(f)});
  };
  {
    const std::vector<Image> imgs{masked_bg, masked_gen};
    add_bg("background_direct",
           client.reason(ReasonTask::background_direct, imgs,
                         fill_template(cfg.prompt_templates.background_direct, {{"fill", fill}})));
  }
  if (cfg.use_roi_boxes) {
    rep.rois = diff_rois(masked_bg, masked_gen, bg_cfg);
    if (!rep.rois.empty()) {
      std::vector<Box> boxes;
      for (const auto& r : rep.rois) boxes.push_back(r.box);
      const std::vector<Image> imgs{draw_boxes(masked_bg, boxes), draw_boxes(masked_gen, boxes)};
      add_bg("background_roi",
             client.reason(ReasonTask::background_roi, imgs,
                           fill_template(cfg.prompt_templates.background_roi,
                                         {{"fill", fill}, {"roi_count", std::to_string(boxes.size())}})));
    }
  }
  rep.hallucination[HallucinationCategory::background] = detail::join_clauses(bg_clauses);

  // (7) provenance
  rep.provenance = {{"backend", client.identity()},
                    {"config", to_json(cfg)},
                    {"min_segment_confidence", kMinSegmentConfidence},
                    {"background_resized", resize_note}};
  return rep;
}

inline DetectionReport run_baseline(const Sample& sample, const PipelineConfig& cfg, const ModelClient& client) {
  cfg.validate_for_baseline();
  std::vector<Image> imgs{read_image(sample.background_image)};
  for (const auto& p : sample.reference_images) imgs.push_back(read_image(p));
  imgs.push_back(read_image(sample.generated_image));
  const auto instr = fill_template(cfg.prompt_templates.baseline, {{"instruction prompt", sample.prompt}});
  const auto d = client.inspect(imgs, instr);

  DetectionReport rep;
  rep.sample_id = sample.id;
  rep.mode = "baseline";
  rep.hallucination[HallucinationCategory::objects] = d.objects;
  rep.hallucination[HallucinationCategory::background] = d.background;
  rep.hallucination[HallucinationCategory::object_omission] = d.object_omission;
  for (auto c : kDetectedCategories)
    rep.findings.push_back({"baseline", Finding{c, std::nullopt, !rep.hallucination[c].empty(), rep.hallucination[c]}});
  rep.provenance = {{"backend", client.identity()}, {"config", to_json(cfg)}};
  return rep;
}

enum class SampleStatus { ok, skipped, failed };

constexpr std::string_view to_string(SampleStatus s) {
  switch (s) {
    case SampleStatus::ok: return "ok";
    case SampleStatus::skipped: return "skipped";
    case SampleStatus::failed: return "failed";
  }
  return "";
}

struct SampleOutcome {
  std::string sample_id;
  SampleStatus status = SampleStatus::ok;
  std::optional<DetectionReport> report;
  std::string error;
  std::string raw_response;  // protocol errors only
  bool transport_failure = false;
  double seconds = 0.0;
};

struct RunOptions {
  bool baseline = false;
  unsigned workers = 1;
};

inline SampleOutcome run_one(const Sample& s, const PipelineConfig& cfg, const ModelClient& client, bool baseline) {
  SampleOutcome out;
  out.sample_id = s.id;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    out.report = baseline ? run_baseline(s, cfg, client) : run_sample(s, cfg, client);
  } catch (const NoEntitiesError& e) {
    out.status = SampleStatus::skipped;
    out.error = e.what();
  } catch (const TransportError& e) {
    out.status = SampleStatus::failed;
    out.error = e.what();
    out.transport_failure = true;
  } catch (const ProtocolError& e) {
    out.status = SampleStatus::failed;
    out.error = e.what();
    out.raw_response = e.raw();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    out.status = SampleStatus::failed;
    out.error = e.what();
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// Samples run concurrently on `workers` threads; outcomes come back in
// input order.
inline std::vector<SampleOutcome> run_samples(const std::vector<Sample>& samples, const PipelineConfig& cfg,
                                              const ModelClient& client, RunOptions opts = {}) {
  if (opts.baseline) cfg.validate_for_baseline();
  else cfg.validate();
  std::vector<SampleOutcome> out(samples.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < samples.size();)
      out[i] = run_one(samples[i], cfg, client, opts.baseline);
  };
  const unsigned n = std::max(1u, std::min<unsigned>(opts.workers, static_cast<unsigned>(samples.size())));
  if (n <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(work);
  }
  return out;
}

inline std::string report_filename(const std::string& sample_id) { return sample_id + ".report.json"; }

inline void write_report(const DetectionReport& r, const std::filesystem::path& dir) {
  std::ofstream(dir / report_filename(r.sample_id)) << to_json(r).dump(2) << "\n";
}

}  // namespace vigil
