// SPDX-License-Identifier: Apache-2.0
//
// Lesion-graph network: two (GATv2 -> cross-attention) blocks followed by a
// max-pool over lesions, a linear head and a sigmoid.
//
// Layer builders append to a diff::Graph so every variant shares one gradient
// path; the *_forward functions are value-level conveniences for inspection.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lesiongraph/cohort.hpp"
#include "lesiongraph/diff.hpp"
#include "lesiongraph/graph_build.hpp"
#include "lesiongraph/matrix.hpp"
#include "lesiongraph/rng.hpp"

namespace lesiongraph {

using ModelParams = diff::ParamSet;

inline constexpr double kLeakySlope = 0.2;

/// Everything a variant may read about one standardized patient.
struct PatientInput {
  std::string patient_id;
  int label = 0;
  Matrix features;      // L x D_features
  Matrix edge_weights;  // L x L
  Matrix clinical;      // D_clin x 1
  Matrix image_mean;    // 1 x D_features, per-lesion average

  std::size_t lesion_count() const { return features.rows(); }
};

PatientInput make_input(const PatientRecord& standardized, const PopulationStats& stats);
std::vector<PatientInput> make_inputs(const Cohort& standardized, const PopulationStats& stats);

// Returns a copy with lesions (rows, and matching edge-weight rows/cols) reordered.
PatientInput permute_lesions(const PatientInput& input, std::span<const std::size_t> order);

// Lesion order by content: feature rows lexicographically, ties broken by the
// sorted edge-weight row. Sums over lesions then run in the same order for any
// input permutation, which keeps predictions bit-identical under reordering.
// Lesions equal in both keys keep their relative input order.
std::vector<std::size_t> canonical_lesion_order(const PatientInput& input);

enum class Mode { kTrain, kEval };

struct ForwardContext {
  Mode mode = Mode::kEval;
  double dropout = 0.0;
  Rng* rng = nullptr;  // required when mode == kTrain and dropout > 0
};

// Fresh 0 / (1/(1-p)) mask, or all ones outside training.
Matrix sample_dropout_mask(std::size_t rows, std::size_t cols, const ForwardContext& ctx);
diff::NodeId apply_dropout(diff::Graph& g, diff::NodeId x, const ForwardContext& ctx);

/// GATv2 parameters. The attention input transform applied to [z_i || z_j || w_ij]
/// is stored as its three column blocks; theta_dst doubles as the value transform.
struct GATv2Params {
  Matrix theta_src;   // D_out x D_in
  Matrix theta_dst;   // D_out x D_in
  Matrix theta_edge;  // D_out x 1
  Matrix att;         // D_out x 1

  static GATv2Params init(std::size_t in, std::size_t out, Rng& rng);
  void store(ModelParams& params, std::string_view prefix) const;
  static GATv2Params load(const ModelParams& params, std::string_view prefix);
};

/// Cross-attention with lesion queries and clinical keys/values; c is a D_clin x 1 column.
struct CrossAttentionParams {
  Matrix wq;  // D_GAT x D_clin
  Matrix wk;  // 1 x D_clin
  Matrix wv;  // 1 x D_GAT

  static CrossAttentionParams init(std::size_t gat_dim, std::size_t clin_dim, Rng& rng);
  void store(ModelParams& params, std::string_view prefix) const;
  static CrossAttentionParams load(const ModelParams& params, std::string_view prefix);
};

struct GatNodes {
  diff::NodeId theta_src, theta_dst, theta_edge, att;
  static GatNodes bind(const diff::BoundParams& bound, std::string_view prefix);
};

struct CrossAttNodes {
  diff::NodeId wq, wk, wv;
  static CrossAttNodes bind(const diff::BoundParams& bound, std::string_view prefix);
};

struct LayerOutput {
  diff::NodeId out;        // pre-activation layer output
  diff::NodeId attention;  // L x L (GAT) or L x D_clin (cross-attention)
};

// score(i,j) = att . LeakyReLU(theta_src z_i + theta_dst z_j + theta_edge w_ij),
// alpha = row-softmax(score), out_i = sum_j alpha_ij theta_dst z_j.
// `edge_column` is the L*L x 1 row-major flattening of the edge weights.
LayerOutput gatv2_layer(diff::Graph& g, diff::NodeId z, diff::NodeId edge_column,
                        const GatNodes& p);

// A = row-softmax((Z Wq)(c Wk)^T / sqrt(D_clin)), out = A (c Wv).
LayerOutput cross_attention_layer(diff::Graph& g, diff::NodeId z, diff::NodeId clinical,
                                  const CrossAttNodes& p);

struct GatResult {
  Matrix output;     // ReLU(out), L x D_out
  Matrix attention;  // L x L
};
GatResult gatv2_forward(const LesionGraph& graph, const GATv2Params& params);

struct CrossAttentionResult {
  Matrix output;     // L x D_GAT
  Matrix attention;  // L x D_clin
};
CrossAttentionResult cross_attention_forward(const Matrix& z, std::span<const double> clinical,
                                             const CrossAttentionParams& params);

struct ForwardTrace {
  diff::NodeId prob;
  std::vector<diff::NodeId> gat_attention;
  std::vector<diff::NodeId> cross_attention;
  // Attention row/col r refers to input lesion lesion_order[r]; empty means identity.
  std::vector<std::size_t> lesion_order;
};

ModelParams init_cross_attention_model(std::size_t features, std::size_t clinical,
                                       std::size_t hidden, Rng& rng);
ForwardTrace cross_attention_model(diff::Graph& g, const diff::BoundParams& p,
                                   const PatientInput& x, const ForwardContext& ctx);

double weighted_bce(double pred, int label, double pos_weight);

}  // namespace lesiongraph
