// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <span>
#include <string_view>

#include "lesiongraph/baselines.hpp"
#include "lesiongraph/model.hpp"

namespace lesiongraph {

enum class Variant {
  kCrossAttention,
  kMlpClinical,
  kMlpImage,
  kMlpClinicalImage,
  kMilImage,
  kGraphConvImage,
  kAblationGraphConvCrossAtt,
  kAblationConcatFusion,
};

inline constexpr std::array<Variant, 8> kAllVariants = {
    Variant::kCrossAttention,   Variant::kMlpClinical,
    Variant::kMlpImage,         Variant::kMlpClinicalImage,
    Variant::kMilImage,         Variant::kGraphConvImage,
    Variant::kAblationGraphConvCrossAtt, Variant::kAblationConcatFusion,
};

// Report tags: cross-attention, mlp-clinical, mlp-image-avg, mlp-clinical+image-avg,
// mil-image, graphconv-image, ablation-graphconv-crossatt, ablation-concat-fusion.
std::string_view variant_tag(Variant v);
Variant parse_variant(std::string_view tag);  // throws std::invalid_argument

// Whether edge weights (and so the gamma grid axis) affect the variant.
bool uses_graph(Variant v);
bool uses_clinical(Variant v);
bool uses_imaging(Variant v);

struct Dims {
  std::size_t features = 0;
  std::size_t clinical = 0;
};

ModelParams init_params(Variant v, const Dims& dims, std::size_t hidden, Rng& rng);

// Appends the variant's forward pass for one patient; trace.prob is 1 x 1.
ForwardTrace build_forward(diff::Graph& g, Variant v, const diff::BoundParams& params,
                           const PatientInput& x, const ForwardContext& ctx);

// Evaluation-mode probability.
double predict(Variant v, const ModelParams& params, const PatientInput& x);
std::vector<double> predict_all(Variant v, const ModelParams& params,
                                std::span<const PatientInput> xs);

}  // namespace lesiongraph
