#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vigil/errors.hpp"
#include "vigil/models.hpp"
#include "vigil/transport.hpp"
#include "vigil/wire.hpp"

namespace vigil {

inline constexpr std::size_t kDefaultEmbedDim = 768;

// Typed access to the five model roles over any Transport. Responses are
// validated before they leave this class.
class ModelClient {
public:
  explicit ModelClient(std::shared_ptr<Transport> transport, std::size_t embed_dim = kDefaultEmbedDim)
      : transport_(std::move(transport)), embed_dim_(embed_dim) {}

  std::vector<EntityDescriptor> parse_entities(const std::string& prompt) const {
    if (prompt.empty()) throw ValidationError("parse_entities requires a non-empty prompt");
    return wire::validate_parse_response(transport_->post(wire::kParse, wire::parse_request(prompt)));
  }

  std::vector<SegmentedObject> segment(const Image& image, const std::vector<std::string>& labels) const {
    if (image.empty()) throw ValidationError("segment requires a non-empty image");
    if (labels.empty()) throw ValidationError("segment requires at least one label");
    return wire::validate_segment_response(
        transport_->post(wire::kSegment, wire::segment_request(image, labels)), labels, image);
  }

  Embedding embed(const Image& crop) const {
    if (crop.empty()) throw ValidationError("embed requires a non-empty crop");
    return wire::validate_embed_response(transport_->post(wire::kEmbed, wire::embed_request(crop)),
                                         embed_dim_);
  }

  Finding reason(ReasonTask task, std::span<const Image> images, const std::string& instruction) const {
    const auto n = images.size();
    const bool ok = task == ReasonTask::object_pair ? (n == 2 || n == 3) : n == 2;
    if (!ok)
      throw ValidationError("reason(" + std::string(to_string(task)) + ") got " + std::to_string(n) +
                            " images");
    return wire::validate_reason_response(
        transport_->post(wire::kReason, wire::reason_request(to_string(task), images, instruction)),
        task);
  }

  // Zero-shot inspector call: all sample images plus the filled template.
  BaselineDescriptions inspect(std::span<const Image> images, const std::string& instruction) const {
    if (images.size() < 3 || images.size() > 4)
      throw ValidationError("baseline inspection takes background, 1-2 references and the generated image");
    return wire::validate_baseline_response(transport_->post(
        wire::kReason, wire::reason_request(wire::kBaselineTask, images, instruction)));
  }

  JudgeCounts judge(const std::string& predicted, const std::string& ground_truth) const {
    return wire::validate_judge_response(
        transport_->post(wire::kJudge, wire::judge_request(predicted, ground_truth)));
  }

  std::size_t embed_dim() const { return embed_dim_; }
  std::string identity() const { return transport_->identity(); }
  const std::shared_ptr<Transport>& transport() const { return transport_; }

private:
  std::shared_ptr<Transport> transport_;
  std::size_t embed_dim_;
};

}  // namespace vigil
