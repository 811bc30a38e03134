// SPDX-License-Identifier: Apache-2.0
#include "lesiongraph/model.hpp"

#include <algorithm>
#include <cmath>
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

const Matrix& param(const ModelParams& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ContractError("missing parameter '" + name + "'");
  return it->second;
}

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, std::string_view what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ", got " + m.shape_string());
  }
}

}  // namespace

PatientInput make_input(const PatientRecord& standardized, const PopulationStats& stats) {
  LesionGraph graph = build_graph(standardized, stats);
  PatientInput in;
  in.patient_id = standardized.id;
  in.label = standardized.label;
  in.features = std::move(graph.node_features);
  in.edge_weights = std::move(graph.edge_weights);
  in.clinical = Matrix::column(standardized.clinical);
  in.image_mean = Matrix(1, in.features.cols());
  for (std::size_t r = 0; r < in.features.rows(); ++r)
    for (std::size_t c = 0; c < in.features.cols(); ++c) in.image_mean(0, c) += in.features(r, c);
  for (auto& v : in.image_mean.data()) v /= static_cast<double>(in.features.rows());
  return in;
}

std::vector<std::size_t> canonical_lesion_order(const PatientInput& input) {
  const std::size_t n = input.lesion_count();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (n < 2) return order;
  std::vector<std::vector<double>> edges;
  auto edge_key = [&](std::size_t i) -> const std::vector<double>& {
    if (edges.empty()) {
      edges.resize(n);
      for (std::size_t r = 0; r < n; ++r) {
        const auto row = input.edge_weights.row_span(r);
        edges[r].assign(row.begin(), row.end());
        std::sort(edges[r].begin(), edges[r].end());
      }
    }
    return edges[i];
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ra = input.features.row_span(a);
    const auto rb = input.features.row_span(b);
    if (std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end())) return true;
    if (std::lexicographical_compare(rb.begin(), rb.end(), ra.begin(), ra.end())) return false;
    return edge_key(a) < edge_key(b);
  });
  return order;
}

std::vector<PatientInput> make_inputs(const Cohort& standardized, const PopulationStats& stats) {
  std::vector<PatientInput> out;
  out.reserve(standardized.size());
  for (const auto& p : standardized.patients()) out.push_back(make_input(p, stats));
  return out;
}

PatientInput permute_lesions(const PatientInput& input, std::span<const std::size_t> order) {
  const std::size_t n = input.lesion_count();
  if (order.size() != n) throw DimensionError("permute_lesions: order length mismatch");
  PatientInput out = input;
  for (std::size_t a = 0; a < n; ++a) {
    const auto src = input.features.row_span(order[a]);
    std::copy(src.begin(), src.end(), out.features.row_span(a).begin());
    for (std::size_t b = 0; b < n; ++b)
      out.edge_weights(a, b) = input.edge_weights(order[a], order[b]);
  }
  return out;
}

Matrix sample_dropout_mask(std::size_t rows, std::size_t cols, const ForwardContext& ctx) {
  Matrix mask(rows, cols, 1.0);
  if (ctx.mode != Mode::kTrain || ctx.dropout <= 0.0) return mask;
  if (ctx.dropout >= 1.0) throw ContractError("dropout probability must be < 1");
  if (ctx.rng == nullptr) throw ContractError("training-mode dropout needs an RNG");
  std::bernoulli_distribution keep(1.0 - ctx.dropout);
  const double scale = 1.0 / (1.0 - ctx.dropout);
  for (auto& v : mask.data()) v = keep(*ctx.rng) ? scale : 0.0;
  return mask;
}

NodeId apply_dropout(Graph& g, NodeId x, const ForwardContext& ctx) {
  if (ctx.mode != Mode::kTrain || ctx.dropout <= 0.0) return x;
  return g.dropout_mask(x, sample_dropout_mask(g.rows(x), g.cols(x), ctx));
}

GATv2Params GATv2Params::init(std::size_t in, std::size_t out, Rng& rng) {
  GATv2Params p;
  p.theta_src = diff::glorot_uniform(out, in, rng);
  p.theta_dst = diff::glorot_uniform(out, in, rng);
  p.theta_edge = diff::glorot_uniform(out, 1, rng);
  p.att = diff::glorot_uniform(out, 1, rng);
  return p;
}

void GATv2Params::store(ModelParams& params, std::string_view prefix) const {
  params[key(prefix, "theta_src")] = theta_src;
  params[key(prefix, "theta_dst")] = theta_dst;
  params[key(prefix, "theta_edge")] = theta_edge;
  params[key(prefix, "att")] = att;
}

GATv2Params GATv2Params::load(const ModelParams& params, std::string_view prefix) {
  GATv2Params p;
  p.theta_src = param(params, key(prefix, "theta_src"));
  p.theta_dst = param(params, key(prefix, "theta_dst"));
  p.theta_edge = param(params, key(prefix, "theta_edge"));
  p.att = param(params, key(prefix, "att"));
  return p;
}

CrossAttentionParams CrossAttentionParams::init(std::size_t gat_dim, std::size_t clin_dim,
                                                Rng& rng) {
  CrossAttentionParams p;
  p.wq = diff::glorot_uniform(gat_dim, clin_dim, rng);
  p.wk = diff::glorot_uniform(1, clin_dim, rng);
  p.wv = diff::glorot_uniform(1, gat_dim, rng);
  return p;
}

void CrossAttentionParams::store(ModelParams& params, std::string_view prefix) const {
  params[key(prefix, "wq")] = wq;
  params[key(prefix, "wk")] = wk;
  params[key(prefix, "wv")] = wv;
}

CrossAttentionParams CrossAttentionParams::load(const ModelParams& params,
                                                std::string_view prefix) {
  CrossAttentionParams p;
  p.wq = param(params, key(prefix, "wq"));
  p.wk = param(params, key(prefix, "wk"));
  p.wv = param(params, key(prefix, "wv"));
  return p;
}

GatNodes GatNodes::bind(const diff::BoundParams& bound, std::string_view prefix) {
  return {diff::lookup(bound, key(prefix, "theta_src")),
          diff::lookup(bound, key(prefix, "theta_dst")),
          diff::lookup(bound, key(prefix, "theta_edge")), diff::lookup(bound, key(prefix, "att"))};
}

CrossAttNodes CrossAttNodes::bind(const diff::BoundParams& bound, std::string_view prefix) {
  return {diff::lookup(bound, key(prefix, "wq")), diff::lookup(bound, key(prefix, "wk")),
          diff::lookup(bound, key(prefix, "wv"))};
}

LayerOutput gatv2_layer(Graph& g, NodeId z, NodeId edge_column, const GatNodes& p) {
  const std::size_t n = g.rows(z);
  if (g.cols(p.theta_src) != g.cols(z) || g.cols(p.theta_dst) != g.cols(z)) {
    throw DimensionError("gatv2: node features have " + std::to_string(g.cols(z)) +
                         " columns, layer expects " + std::to_string(g.cols(p.theta_src)));
  }
  if (g.rows(edge_column) != n * n || g.cols(edge_column) != 1) {
    throw DimensionError("gatv2: edge column must be " + std::to_string(n * n) + "x1");
  }
  std::vector<std::uint32_t> src(n * n);
  std::vector<std::uint32_t> dst(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      src[i * n + j] = static_cast<std::uint32_t>(i);
      dst[i * n + j] = static_cast<std::uint32_t>(j);
    }
  }
  const NodeId from_src = g.matmul(z, g.transpose(p.theta_src));
  const NodeId from_dst = g.matmul(z, g.transpose(p.theta_dst));
  NodeId pairs = g.add(g.gather_rows(from_src, src), g.gather_rows(from_dst, dst));
  pairs = g.add(pairs, g.matmul(edge_column, g.transpose(p.theta_edge)));
  const NodeId scores = g.matmul(g.leaky_relu(pairs, kLeakySlope), p.att);
  const NodeId alpha = g.row_softmax(g.reshape(scores, n, n));
  return {g.matmul(alpha, from_dst), alpha};
}

LayerOutput cross_attention_layer(Graph& g, NodeId z, NodeId clinical, const CrossAttNodes& p) {
  const std::size_t d_clin = g.rows(clinical);
  if (g.cols(clinical) != 1) throw DimensionError("cross-attention: clinical must be a column");
  if (g.cols(p.wq) != d_clin || g.cols(p.wk) != d_clin) {
    throw DimensionError("cross-attention: clinical vector has " + std::to_string(d_clin) +
                         " entries, layer expects " + std::to_string(g.cols(p.wq)));
  }
  const NodeId query = g.matmul(z, p.wq);
  const NodeId keys = g.matmul(clinical, p.wk);
  const NodeId logits =
      g.scale(g.matmul(query, g.transpose(keys)), 1.0 / std::sqrt(static_cast<double>(d_clin)));
  const NodeId attention = g.row_softmax(logits);
  const NodeId values = g.matmul(clinical, p.wv);
  return {g.matmul(attention, values), attention};
}

GatResult gatv2_forward(const LesionGraph& graph, const GATv2Params& params) {
  const std::size_t n = graph.size();
  expect_shape(graph.edge_weights, n, n, "gatv2_forward edge weights");
  Graph g;
  const NodeId z = g.input(graph.node_features);
  const NodeId w = g.input(graph.edge_weights.data(), n * n, 1);
  GatNodes nodes{g.input(params.theta_src), g.input(params.theta_dst), g.input(params.theta_edge),
                 g.input(params.att)};
  const LayerOutput layer = gatv2_layer(g, z, w, nodes);
  const NodeId out = g.relu(layer.out);
  g.forward(out);
  return {g.value(out), g.value(layer.attention)};
}

CrossAttentionResult cross_attention_forward(const Matrix& z, std::span<const double> clinical,
                                             const CrossAttentionParams& params) {
  expect_shape(params.wq, z.cols(), clinical.size(), "cross-attention W^Q");
  expect_shape(params.wk, 1, clinical.size(), "cross-attention W^K");
  expect_shape(params.wv, 1, z.cols(), "cross-attention W^V");
  Graph g;
  const NodeId zin = g.input(z);
  const NodeId c = g.input(clinical, clinical.size(), 1);
  CrossAttNodes nodes{g.input(params.wq), g.input(params.wk), g.input(params.wv)};
  const LayerOutput layer = cross_attention_layer(g, zin, c, nodes);
  g.forward(layer.out);
  return {g.value(layer.out), g.value(layer.attention)};
}

ModelParams init_cross_attention_model(std::size_t features, std::size_t clinical,
                                       std::size_t hidden, Rng& rng) {
  ModelParams params;
  GATv2Params::init(features, hidden, rng).store(params, "gat1");
  CrossAttentionParams::init(hidden, clinical, rng).store(params, "xatt1");
  GATv2Params::init(hidden, hidden, rng).store(params, "gat2");
  CrossAttentionParams::init(hidden, clinical, rng).store(params, "xatt2");
  params["head.w"] = diff::glorot_uniform(hidden, 1, rng);
  params["head.b"] = Matrix(1, 1);
  return params;
}

ForwardTrace cross_attention_model(Graph& g, const diff::BoundParams& p, const PatientInput& x,
                                   const ForwardContext& ctx) {
  const std::size_t n = x.lesion_count();
  const NodeId z = g.input(x.features);
  const NodeId edges = g.input(x.edge_weights.data(), n * n, 1);
  const NodeId c = g.input(x.clinical);

  ForwardTrace trace;
  NodeId h = z;
  for (std::string_view block : {"1", "2"}) {
    const LayerOutput gat = gatv2_layer(g, h, edges, GatNodes::bind(p, "gat" + std::string(block)));
    const NodeId activated = g.relu(apply_dropout(g, gat.out, ctx));
    const LayerOutput fused =
        cross_attention_layer(g, activated, c, CrossAttNodes::bind(p, "xatt" + std::string(block)));
    trace.gat_attention.push_back(gat.attention);
    trace.cross_attention.push_back(fused.attention);
    h = fused.out;
  }
  const NodeId pooled = g.row_max_pool(h);
  const NodeId logit =
      g.add(g.matmul(pooled, diff::lookup(p, "head.w")), diff::lookup(p, "head.b"));
  trace.prob = g.sigmoid(logit);
  return trace;
}

double weighted_bce(double pred, int label, double pos_weight) {
  const double p = std::clamp(pred, 1e-12, 1.0 - 1e-12);
  const double y = static_cast<double>(label);
  return -(pos_weight * y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

}  // namespace lesiongraph
