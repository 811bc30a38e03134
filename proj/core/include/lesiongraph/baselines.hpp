// SPDX-License-Identifier: Apache-2.0
//
// Comparison models and ablations. All of them reuse the layer builders of
// model.hpp and the diff tape, so they share the same gradient machinery.
#pragma once

#include <span>

#include "lesiongraph/model.hpp"

namespace lesiongraph {

// linear -> ReLU -> linear -> ReLU -> linear(1) -> sigmoid, both hidden layers `hidden` wide.
ModelParams init_mlp(std::size_t input_dim, std::size_t hidden, Rng& rng);
diff::NodeId mlp_graph(diff::Graph& g, const diff::BoundParams& p, diff::NodeId input_row,
                       const ForwardContext& ctx);
double mlp_forward(std::span<const double> input, const ModelParams& params);

// Per-lesion linear + ReLU, column-wise max over lesions, linear(1) + sigmoid.
ModelParams init_mil(std::size_t features, std::size_t hidden, Rng& rng);
diff::NodeId mil_graph(diff::Graph& g, const diff::BoundParams& p, diff::NodeId lesions,
                       const ForwardContext& ctx);
double mil_forward(const Matrix& lesions, const ModelParams& params);

/// z_i' = z_i Root + (sum_j w_ij z_j) Rel; the neighbour sum includes the self-loop.
/// Root and Rel are stored D_in x D_out under "<prefix>.root" / "<prefix>.rel".
void init_graphconv_layer(ModelParams& params, std::string_view prefix, std::size_t in,
                          std::size_t out, Rng& rng);
diff::NodeId graphconv_layer(diff::Graph& g, const diff::BoundParams& p, std::string_view prefix,
                             diff::NodeId z, diff::NodeId edge_matrix);

// Two GraphConv layers (hidden, then 1), ReLU between, max-pool, sigmoid.
ModelParams init_graphconv_image(std::size_t features, std::size_t hidden, Rng& rng);
diff::NodeId graphconv_image_graph(diff::Graph& g, const diff::BoundParams& p,
                                   const PatientInput& x, const ForwardContext& ctx);
double graphconv_forward(const LesionGraph& graph, const ModelParams& params);

// The proposed network with GraphConv layers in place of GATv2.
ModelParams init_graphconv_crossatt(std::size_t features, std::size_t clinical,
                                    std::size_t hidden, Rng& rng);
ForwardTrace graphconv_crossatt_graph(diff::Graph& g, const diff::BoundParams& p,
                                      const PatientInput& x, const ForwardContext& ctx);

/// The proposed network with each cross-attention replaced by [z_i || c] and a
/// learned (hidden + D_clin) x hidden projection ("fuse1.proj", "fuse2.proj").
ModelParams init_concat_fusion(std::size_t features, std::size_t clinical, std::size_t hidden,
                               Rng& rng);
ForwardTrace concat_fusion_graph(diff::Graph& g, const diff::BoundParams& p,
                                 const PatientInput& x, const ForwardContext& ctx);
double ablation_concat_forward(const PatientInput& x, const ModelParams& params);

}  // namespace lesiongraph
