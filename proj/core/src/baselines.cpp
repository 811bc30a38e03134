// SPDX-License-Identifier: Apache-2.0
#include "lesiongraph/baselines.hpp"

#include <string>

#include "lesiongraph/errors.hpp"

namespace lesiongraph {

using diff::Graph;
using diff::NodeId;

namespace {

std::string key(std::string_view prefix, std::string_view name) {
  std::string k(prefix);
  k += '.';
  k += name;
  return k;
}

NodeId affine(Graph& g, const diff::BoundParams& p, NodeId x, std::string_view w,
              std::string_view b) {
  return g.add(g.matmul(x, diff::lookup(p, w)), diff::lookup(p, b));
}

double eval_prob(Graph& g, NodeId prob) { return g.forward(prob)[0]; }

// c^T repeated once per lesion, L x D_clin.
Matrix tiled_clinical(const PatientInput& x) {
  const std::size_t n = x.lesion_count();
  const std::size_t d = x.clinical.rows();
  Matrix t(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) t(r, c) = x.clinical[c];
  return t;
}

}  // namespace

ModelParams init_mlp(std::size_t input_dim, std::size_t hidden, Rng& rng) {
  ModelParams p;
  p["mlp.w1"] = diff::glorot_uniform(input_dim, hidden, rng);
  p["mlp.b1"] = Matrix(1, hidden);
  p["mlp.w2"] = diff::glorot_uniform(hidden, hidden, rng);
  p["mlp.b2"] = Matrix(1, hidden);
  p["mlp.w3"] = diff::glorot_uniform(hidden, 1, rng);
  p["mlp.b3"] = Matrix(1, 1);
  return p;
}

NodeId mlp_graph(Graph& g, const diff::BoundParams& p, NodeId input_row,
                 const ForwardContext& ctx) {
  if (g.rows(input_row) != 1) throw DimensionError("mlp: input must be a single row");
  if (g.cols(input_row) != g.rows(diff::lookup(p, "mlp.w1"))) {
    throw DimensionError("mlp: input width " + std::to_string(g.cols(input_row)) +
                         " does not match first layer " +
                         std::to_string(g.rows(diff::lookup(p, "mlp.w1"))));
  }
  NodeId h = g.relu(affine(g, p, input_row, "mlp.w1", "mlp.b1"));
  h = apply_dropout(g, h, ctx);
  h = g.relu(affine(g, p, h, "mlp.w2", "mlp.b2"));
  h = apply_dropout(g, h, ctx);
  return g.sigmoid(affine(g, p, h, "mlp.w3", "mlp.b3"));
}

double mlp_forward(std::span<const double> input, const ModelParams& params) {
  Graph g;
  const auto bound = diff::bind_params(g, params, false);
  const NodeId x = g.input(input, 1, input.size());
  return eval_prob(g, mlp_graph(g, bound, x, {}));
}

ModelParams init_mil(std::size_t features, std::size_t hidden, Rng& rng) {
  ModelParams p;
  p["mil.w1"] = diff::glorot_uniform(features, hidden, rng);
  p["mil.b1"] = Matrix(1, hidden);
  p["mil.w2"] = diff::glorot_uniform(hidden, 1, rng);
  p["mil.b2"] = Matrix(1, 1);
  return p;
}

NodeId mil_graph(Graph& g, const diff::BoundParams& p, NodeId lesions, const ForwardContext& ctx) {
  if (g.rows(lesions) == 0) throw DimensionError("mil: patient has no lesions");
  NodeId h = g.relu(affine(g, p, lesions, "mil.w1", "mil.b1"));
  h = apply_dropout(g, h, ctx);
  const NodeId pooled = g.row_max_pool(h);
  return g.sigmoid(affine(g, p, pooled, "mil.w2", "mil.b2"));
}

double mil_forward(const Matrix& lesions, const ModelParams& params) {
  Graph g;
  const auto bound = diff::bind_params(g, params, false);
  return eval_prob(g, mil_graph(g, bound, g.input(lesions), {}));
}

void init_graphconv_layer(ModelParams& params, std::string_view prefix, std::size_t in,
                          std::size_t out, Rng& rng) {
  params[key(prefix, "root")] = diff::glorot_uniform(in, out, rng);
  params[key(prefix, "rel")] = diff::glorot_uniform(in, out, rng);
}

NodeId graphconv_layer(Graph& g, const diff::BoundParams& p, std::string_view prefix, NodeId z,
                       NodeId edge_matrix) {
  const NodeId root = diff::lookup(p, key(prefix, "root"));
  const NodeId rel = diff::lookup(p, key(prefix, "rel"));
  if (g.cols(z) != g.rows(root)) {
    throw DimensionError("graphconv " + std::string(prefix) + ": input width " +
                         std::to_string(g.cols(z)) + ", layer expects " +
                         std::to_string(g.rows(root)));
  }
  const NodeId neighbours = g.matmul(edge_matrix, z);
  return g.add(g.matmul(z, root), g.matmul(neighbours, rel));
}

ModelParams init_graphconv_image(std::size_t features, std::size_t hidden, Rng& rng) {
  ModelParams p;
  init_graphconv_layer(p, "gc1", features, hidden, rng);
  init_graphconv_layer(p, "gc2", hidden, 1, rng);
  return p;
}

NodeId graphconv_image_graph(Graph& g, const diff::BoundParams& p, const PatientInput& x,
                             const ForwardContext& ctx) {
  const NodeId z = g.input(x.features);
  const NodeId w = g.input(x.edge_weights);
  NodeId h = graphconv_layer(g, p, "gc1", z, w);
  h = g.relu(apply_dropout(g, h, ctx));
  h = graphconv_layer(g, p, "gc2", h, w);
  return g.sigmoid(g.row_max_pool(h));
}

double graphconv_forward(const LesionGraph& graph, const ModelParams& params) {
  PatientInput x;
  x.patient_id = graph.patient_id;
  x.features = graph.node_features;
  x.edge_weights = graph.edge_weights;
  Graph g;
  const auto bound = diff::bind_params(g, params, false);
  return eval_prob(g, graphconv_image_graph(g, bound, x, {}));
}

ModelParams init_graphconv_crossatt(std::size_t features, std::size_t clinical,
                                    std::size_t hidden, Rng& rng) {
  ModelParams p;
  init_graphconv_layer(p, "gc1", features, hidden, rng);
  CrossAttentionParams::init(hidden, clinical, rng).store(p, "xatt1");
  init_graphconv_layer(p, "gc2", hidden, hidden, rng);
  CrossAttentionParams::init(hidden, clinical, rng).store(p, "xatt2");
  p["head.w"] = diff::glorot_uniform(hidden, 1, rng);
  p["head.b"] = Matrix(1, 1);
  return p;
}

ForwardTrace graphconv_crossatt_graph(Graph& g, const diff::BoundParams& p, const PatientInput& x,
                                      const ForwardContext& ctx) {
  const NodeId z = g.input(x.features);
  const NodeId w = g.input(x.edge_weights);
  const NodeId c = g.input(x.clinical);
  ForwardTrace trace;
  NodeId h = z;
  for (std::string_view block : {"1", "2"}) {
    const std::string b(block);
    const NodeId conv = graphconv_layer(g, p, "gc" + b, h, w);
    const NodeId activated = g.relu(apply_dropout(g, conv, ctx));
    const LayerOutput fused =
        cross_attention_layer(g, activated, c, CrossAttNodes::bind(p, "xatt" + b));
    trace.cross_attention.push_back(fused.attention);
    h = fused.out;
  }
  const NodeId pooled = g.row_max_pool(h);
  trace.prob = g.sigmoid(affine(g, p, pooled, "head.w", "head.b"));
  return trace;
}

ModelParams init_concat_fusion(std::size_t features, std::size_t clinical, std::size_t hidden,
                               Rng& rng) {
  ModelParams p;
  GATv2Params::init(features, hidden, rng).store(p, "gat1");
  p["fuse1.proj"] = diff::glorot_uniform(hidden + clinical, hidden, rng);
  GATv2Params::init(hidden, hidden, rng).store(p, "gat2");
  p["fuse2.proj"] = diff::glorot_uniform(hidden + clinical, hidden, rng);
  p["head.w"] = diff::glorot_uniform(hidden, 1, rng);
  p["head.b"] = Matrix(1, 1);
  return p;
}

ForwardTrace concat_fusion_graph(Graph& g, const diff::BoundParams& p, const PatientInput& x,
                                 const ForwardContext& ctx) {
  const std::size_t n = x.lesion_count();
  const NodeId z = g.input(x.features);
  const NodeId edges = g.input(x.edge_weights.data(), n * n, 1);
  const NodeId c_rows = g.input(tiled_clinical(x));
  ForwardTrace trace;
  NodeId h = z;
  for (std::string_view block : {"1", "2"}) {
    const std::string b(block);
    const LayerOutput gat = gatv2_layer(g, h, edges, GatNodes::bind(p, "gat" + b));
    const NodeId activated = g.relu(apply_dropout(g, gat.out, ctx));
    trace.gat_attention.push_back(gat.attention);
    h = g.matmul(g.concat_cols(activated, c_rows), diff::lookup(p, "fuse" + b + ".proj"));
  }
  const NodeId pooled = g.row_max_pool(h);
  trace.prob = g.sigmoid(affine(g, p, pooled, "head.w", "head.b"));
  return trace;
}

double ablation_concat_forward(const PatientInput& x, const ModelParams& params) {
  Graph g;
  const auto bound = diff::bind_params(g, params, false);
  return eval_prob(g, concat_fusion_graph(g, bound, x, {}).prob);
}

}  // namespace lesiongraph
