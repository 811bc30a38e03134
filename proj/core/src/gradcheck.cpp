// SPDX-License-Identifier: Apache-2.0
#include "lesiongraph/gradcheck.hpp"

#include <fmt/format.h>

#include <functional>
#include <random>

#include "lesiongraph/baselines.hpp"
#include "lesiongraph/variants.hpp"

namespace lesiongraph {

using diff::Graph;
using diff::NodeId;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = gauss(rng);
  return m;
}

// Moves every parameter off its initial value (zero biases included) so the
// check runs at a generic point rather than on a ReLU kink.
ModelParams jitter(ModelParams params, Rng& rng) {
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (auto& [name, m] : params) {
    for (double& v : m.data()) v += u(rng);
  }
  return params;
}

// sum(out .* R) for a fixed random R, so every output entry matters.
NodeId project(Graph& g, NodeId out, Rng& rng) {
  return g.sum(g.mul(out, g.input(random_matrix(g.rows(out), g.cols(out), rng))));
}

GradCheckCase check_case(std::string name, double h, double tol,
                         const std::function<NodeId(Graph&)>& build) {
  Graph g;
  const NodeId root = build(g);
  return {std::move(name), diff::check_gradients(g, root, h, tol)};
}

}  // namespace

PatientInput random_patient(const GradCheckDims& dims, Rng& rng) {
  std::uniform_real_distribution<double> weight(0.05, 1.0);
  PatientInput x;
  x.patient_id = "gradcheck";
  x.label = 1;
  x.features = random_matrix(dims.lesions, dims.features, rng);
  x.edge_weights = Matrix(dims.lesions, dims.lesions, 1.0);
  for (std::size_t i = 0; i < dims.lesions; ++i) {
    for (std::size_t j = i + 1; j < dims.lesions; ++j) {
      x.edge_weights(i, j) = x.edge_weights(j, i) = weight(rng);
    }
  }
  x.clinical = random_matrix(dims.clinical, 1, rng);
  x.image_mean = Matrix(1, dims.features);
  for (std::size_t i = 0; i < dims.lesions; ++i) {
    for (std::size_t f = 0; f < dims.features; ++f) {
      x.image_mean(0, f) += x.features(i, f) / static_cast<double>(dims.lesions);
    }
  }
  return x;
}

std::vector<GradCheckCase> run_gradient_checks(const GradCheckDims& dims, std::uint64_t seed,
                                               double h, double tol) {
  Rng rng = make_rng(seed, "gradcheck");
  const PatientInput x = random_patient(dims, rng);
  const std::size_t n = dims.lesions;
  std::vector<GradCheckCase> cases;

  cases.push_back(check_case("layer:gatv2", h, tol, [&](Graph& g) {
    ModelParams p;
    GATv2Params::init(dims.features, dims.hidden, rng).store(p, "gat");
    const auto bound = diff::bind_params(g, p, true);
    const NodeId z = g.input(x.features, true, "z");
    const NodeId edges = g.input(x.edge_weights.data(), n * n, 1, true, "edges");
    const LayerOutput out = gatv2_layer(g, z, edges, GatNodes::bind(bound, "gat"));
    return project(g, out.out, rng);
  }));

  cases.push_back(check_case("layer:cross-attention", h, tol, [&](Graph& g) {
    ModelParams p;
    CrossAttentionParams::init(dims.hidden, dims.clinical, rng).store(p, "xatt");
    const auto bound = diff::bind_params(g, p, true);
    const NodeId z = g.input(random_matrix(n, dims.hidden, rng), true, "z");
    const NodeId c = g.input(x.clinical, true, "clinical");
    const LayerOutput out = cross_attention_layer(g, z, c, CrossAttNodes::bind(bound, "xatt"));
    return project(g, out.out, rng);
  }));

  cases.push_back(check_case("layer:graphconv", h, tol, [&](Graph& g) {
    ModelParams p;
    init_graphconv_layer(p, "gc", dims.features, dims.hidden, rng);
    const auto bound = diff::bind_params(g, p, true);
    const NodeId z = g.input(x.features, true, "z");
    const NodeId w = g.input(x.edge_weights, true, "edges");
    return project(g, graphconv_layer(g, bound, "gc", z, w), rng);
  }));

  cases.push_back(check_case("layer:mlp", h, tol, [&](Graph& g) {
    const ModelParams p = jitter(init_mlp(dims.clinical, dims.hidden, rng), rng);
    const auto bound = diff::bind_params(g, p, true);
    const NodeId in = g.input(x.clinical.data(), 1, dims.clinical, true, "input");
    return project(g, mlp_graph(g, bound, in, {}), rng);
  }));

  cases.push_back(check_case("layer:mil", h, tol, [&](Graph& g) {
    const ModelParams p = jitter(init_mil(dims.features, dims.hidden, rng), rng);
    const auto bound = diff::bind_params(g, p, true);
    return project(g, mil_graph(g, bound, g.input(x.features, true, "lesions"), {}), rng);
  }));

  cases.push_back(check_case("layer:max-pool-head", h, tol, [&](Graph& g) {
    const NodeId z = g.input(random_matrix(n, dims.hidden, rng), true, "z");
    const NodeId w = g.input(random_matrix(dims.hidden, 1, rng), true, "head.w");
    const NodeId b = g.input(random_matrix(1, 1, rng), true, "head.b");
    const NodeId prob = g.sigmoid(g.add(g.matmul(g.row_max_pool(z), w), b));
    return g.weighted_bce(prob, 1, 2.5);
  }));

  for (Variant v : kAllVariants) {
    for (int label : {0, 1}) {
      cases.push_back(check_case(fmt::format("model:{}:y={}", variant_tag(v), label), h, tol,
                                 [&](Graph& g) {
                                   const ModelParams p = jitter(
                                       init_params(v, {dims.features, dims.clinical},
                                                   dims.hidden, rng),
                                       rng);
                                   const auto bound = diff::bind_params(g, p, true);
                                   const ForwardTrace t = build_forward(g, v, bound, x, {});
                                   return g.weighted_bce(t.prob, label, 2.5);
                                 }));
    }
  }
  return cases;
}

std::string gradcheck_csv(const std::vector<GradCheckCase>& cases, const std::string& tag) {
  fmt::memory_buffer out;
  if (!tag.empty()) fmt::format_to(std::back_inserter(out), "# {}\n", tag);
  fmt::format_to(std::back_inserter(out),
                 "case,parameter,entries,rel_error,analytic,numeric,failing,failing_abs_diff,"
                 "norm_rel_error,passed\n");
  for (const auto& c : cases) {
    for (const auto& e : c.report.entries) {
      fmt::format_to(std::back_inserter(out), "{},{},{},{:.3e},{:.10g},{:.10g},{},{:.3e},{:.3e},{}\n",
                     c.name, e.name, e.entries, e.rel_error, e.analytic, e.numeric, e.failing,
                     e.failing_abs_diff, e.norm_rel_error, e.passed ? "pass" : "FAIL");
    }
  }
  return {out.data(), out.size()};
}

}  // namespace lesiongraph
