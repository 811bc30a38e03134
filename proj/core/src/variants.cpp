// SPDX-License-Identifier: Apache-2.0
#include "lesiongraph/variants.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace lesiongraph {

using diff::Graph;
using diff::NodeId;

std::string_view variant_tag(Variant v) {
  switch (v) {
    case Variant::kCrossAttention: return "cross-attention";
    case Variant::kMlpClinical: return "mlp-clinical";
    case Variant::kMlpImage: return "mlp-image-avg";
    case Variant::kMlpClinicalImage: return "mlp-clinical+image-avg";
    case Variant::kMilImage: return "mil-image";
    case Variant::kGraphConvImage: return "graphconv-image";
    case Variant::kAblationGraphConvCrossAtt: return "ablation-graphconv-crossatt";
    case Variant::kAblationConcatFusion: return "ablation-concat-fusion";
  }
  return "unknown";
}

Variant parse_variant(std::string_view tag) {
  for (Variant v : kAllVariants) {
    if (variant_tag(v) == tag) return v;
  }
  throw std::invalid_argument("unknown variant '" + std::string(tag) + "'");
}

bool uses_graph(Variant v) {
  switch (v) {
    case Variant::kCrossAttention:
    case Variant::kGraphConvImage:
    case Variant::kAblationGraphConvCrossAtt:
    case Variant::kAblationConcatFusion:
      return true;
    default:
      return false;
  }
}

bool uses_clinical(Variant v) {
  switch (v) {
    case Variant::kMlpImage:
    case Variant::kMilImage:
    case Variant::kGraphConvImage:
      return false;
    default:
      return true;
  }
}

bool uses_imaging(Variant v) { return v != Variant::kMlpClinical; }

ModelParams init_params(Variant v, const Dims& dims, std::size_t hidden, Rng& rng) {
  switch (v) {
    case Variant::kCrossAttention:
      return init_cross_attention_model(dims.features, dims.clinical, hidden, rng);
    case Variant::kMlpClinical:
      return init_mlp(dims.clinical, hidden, rng);
    case Variant::kMlpImage:
      return init_mlp(dims.features, hidden, rng);
    case Variant::kMlpClinicalImage:
      return init_mlp(dims.clinical + dims.features, hidden, rng);
    case Variant::kMilImage:
      return init_mil(dims.features, hidden, rng);
    case Variant::kGraphConvImage:
      return init_graphconv_image(dims.features, hidden, rng);
    case Variant::kAblationGraphConvCrossAtt:
      return init_graphconv_crossatt(dims.features, dims.clinical, hidden, rng);
    case Variant::kAblationConcatFusion:
      return init_concat_fusion(dims.features, dims.clinical, hidden, rng);
  }
  throw std::invalid_argument("init_params: unknown variant");
}

namespace {

ForwardTrace build_canonical(Graph& g, Variant v, const diff::BoundParams& params,
                             const PatientInput& x, const ForwardContext& ctx) {
  ForwardTrace trace;
  switch (v) {
    case Variant::kCrossAttention:
      return cross_attention_model(g, params, x, ctx);
    case Variant::kMlpClinical:
      trace.prob = mlp_graph(g, params, g.input(x.clinical.data(), 1, x.clinical.rows()), ctx);
      return trace;
    case Variant::kMlpImage:
      trace.prob = mlp_graph(g, params, g.input(x.image_mean), ctx);
      return trace;
    case Variant::kMlpClinicalImage: {
      const NodeId clin = g.input(x.clinical.data(), 1, x.clinical.rows());
      trace.prob = mlp_graph(g, params, g.concat_cols(clin, g.input(x.image_mean)), ctx);
      return trace;
    }
    case Variant::kMilImage:
      trace.prob = mil_graph(g, params, g.input(x.features), ctx);
      return trace;
    case Variant::kGraphConvImage:
      trace.prob = graphconv_image_graph(g, params, x, ctx);
      return trace;
    case Variant::kAblationGraphConvCrossAtt:
      return graphconv_crossatt_graph(g, params, x, ctx);
    case Variant::kAblationConcatFusion:
      return concat_fusion_graph(g, params, x, ctx);
  }
  throw std::invalid_argument("build_forward: unknown variant");
}

}  // namespace

ForwardTrace build_forward(Graph& g, Variant v, const diff::BoundParams& params,
                           const PatientInput& x, const ForwardContext& ctx) {
  auto order = canonical_lesion_order(x);
  if (std::is_sorted(order.begin(), order.end())) return build_canonical(g, v, params, x, ctx);
  // Graph inputs copy their values, so the reordered patient may die here.
  ForwardTrace trace = build_canonical(g, v, params, permute_lesions(x, order), ctx);
  trace.lesion_order = std::move(order);
  return trace;
}

double predict(Variant v, const ModelParams& params, const PatientInput& x) {
  Graph g;
  const auto bound = diff::bind_params(g, params, false);
  const ForwardTrace trace = build_forward(g, v, bound, x, {});
  return g.forward(trace.prob)[0];
}

std::vector<double> predict_all(Variant v, const ModelParams& params,
                                std::span<const PatientInput> xs) {
  std::vector<double> out;
  out.reserve(xs.size());
  Graph g;
  diff::BoundParams bound;
  for (const auto& x : xs) {
    g.clear();
    if (bound.empty()) {
      bound = diff::bind_params(g, params, false);
    } else {
      diff::rebind_params(g, params, bound, false);
    }
    const ForwardTrace trace = build_forward(g, v, bound, x, {});
    out.push_back(g.forward(trace.prob)[0]);
  }
  return out;
}

}  // namespace lesiongraph
