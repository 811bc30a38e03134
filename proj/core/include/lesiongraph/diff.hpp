// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over dense double matrices.
//
// A Graph is a tape: every builder call appends one node whose parents are
// already on the tape, so creation order is a topological order. Building is
// cheap and shape-checked immediately; values are computed by forward() and
// gradients by backward(). Graphs are rebuilt per patient per step, and
// clear() keeps node storage alive so steady-state training does not allocate.
#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lesiongraph/matrix.hpp"

namespace lesiongraph::diff {

enum class Op : std::uint8_t {
  kInput,
  kMatMul,
  kAdd,         // same shape, or broadcast of a 1 x C row / 1 x 1 scalar
  kConcatCols,
  kScale,
  kLeakyRelu,
  kRelu,
  kSigmoid,
  kRowSoftmax,
  kRowMaxPool,  // column-wise max over rows, R x C -> 1 x C
  kDropoutMask,
  kExp,
  kNeg,
  kWeightedBce,
  kTranspose,
  kGatherRows,
  kReshape,
  kSum,
  kMul,         // elementwise
};

std::string_view op_name(Op op);

struct NodeId {
  std::uint32_t index = std::numeric_limits<std::uint32_t>::max();
  bool valid() const { return index != std::numeric_limits<std::uint32_t>::max(); }
  friend bool operator==(NodeId, NodeId) = default;
};

class Graph {
 public:
  Graph() = default;

  NodeId input(const Matrix& value, bool requires_grad = false, std::string_view name = {});
  // Input viewed with a different (row-major compatible) shape.
  NodeId input(std::span<const double> values, std::size_t rows, std::size_t cols,
               bool requires_grad = false, std::string_view name = {});

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);
  NodeId leaky_relu(NodeId a, double slope);
  NodeId relu(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId row_softmax(NodeId a);
  NodeId row_max_pool(NodeId a);
  // Multiplies by a fixed 0 / (1/(1-p)) mask of the same shape as `a`.
  NodeId dropout_mask(NodeId a, const Matrix& mask);
  NodeId exp(NodeId a);
  NodeId neg(NodeId a);
  // Scalar loss -[w y log p + (1-y) log(1-p)] on a 1 x 1 probability,
  // with p clamped to [1e-12, 1 - 1e-12].
  NodeId weighted_bce(NodeId pred, int label, double pos_weight);
  NodeId transpose(NodeId a);
  NodeId gather_rows(NodeId a, std::span<const std::uint32_t> rows);
  NodeId reshape(NodeId a, std::size_t rows, std::size_t cols);
  NodeId sum(NodeId a);
  NodeId mul(NodeId a, NodeId b);

  // Evaluates every node up to and including `root`.
  const Matrix& forward(NodeId root);
  // Accumulates d(root)/d(node) into every requires-grad node up to `root`.
  void backward(NodeId root);

  const Matrix& value(NodeId id) const { return node(id).value; }
  const Matrix& grad(NodeId id) const { return node(id).grad; }
  Matrix& input_value(NodeId id);
  Op op(NodeId id) const { return node(id).op; }
  std::size_t rows(NodeId id) const { return node(id).rows; }
  std::size_t cols(NodeId id) const { return node(id).cols; }
  const std::string& name(NodeId id) const { return node(id).name; }
  bool requires_grad(NodeId id) const { return node(id).requires_grad; }
  std::size_t node_count() const { return count_; }

  // Requires-grad input nodes in creation order.
  std::vector<NodeId> parameters() const;

  void clear() { count_ = 0; }

  // Test hook: scales every gradient propagated through nodes of kind `op`.
  void set_gradient_fault(Op op, double factor) {
    fault_op_ = op;
    fault_factor_ = factor;
  }

 private:
  struct Node {
    Op op = Op::kInput;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    double scalar = 0.0;
    double scalar2 = 0.0;
    bool requires_grad = false;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint32_t> index;  // gather rows, or argmax per column for max-pool
    Matrix aux;                        // dropout mask
    Matrix value;
    Matrix grad;
    std::string name;
  };

  Node& node(NodeId id);
  const Node& node(NodeId id) const;
  Node& push(Op op, std::size_t rows, std::size_t cols);
  Node& push_unary(Op op, NodeId a);
  void eval(Node& n);
  void propagate(Node& n);

  std::vector<Node> nodes_;
  std::size_t count_ = 0;
  Op fault_op_ = Op::kInput;
  double fault_factor_ = 1.0;
};

// Named learnable matrices of one model instance. Ordered so that iteration,
// checkpoints and optimizer updates are deterministic.
using ParamSet = std::map<std::string, Matrix, std::less<>>;
using BoundParams = std::map<std::string, NodeId, std::less<>>;

// Places every parameter on the tape as a named input node.
BoundParams bind_params(Graph& graph, const ParamSet& params, bool requires_grad);
// Reads gradients of bound parameters after backward().
ParamSet collect_grads(const Graph& graph, const BoundParams& bound);
NodeId lookup(const BoundParams& bound, std::string_view name);

Matrix glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

struct GradCheckEntry {
  std::string name;
  NodeId node;
  std::size_t entries = 0;
  double rel_error = 0.0;       // worst entry, decides `passed`
  std::size_t worst_index = 0;
  double analytic = 0.0;        // at worst_index
  double numeric = 0.0;
  std::size_t failing = 0;      // entries at or above tol
  double failing_abs_diff = 0;  // largest |a-b| among them
  double norm_rel_error = 0.0;  // same ratio on L2 norms over the parameter
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool all_passed() const;
  double max_rel_error() const;
};

// Central differences (f(x+h) - f(x-h)) / 2h against backward() for every entry
// of every requires-grad input. A parameter passes when every entry has
// |a-b| / max(|a|, |b|, 1e-8) < tol. The numeric estimate carries roughly
// ulp(f) / 2h of roundoff, so entries whose true gradient is below ~1e-8 can
// fail on noise alone; failing_abs_diff and norm_rel_error help tell that
// apart from a wrong derivative. h must lie in [1e-7, 1e-4].
GradCheckReport check_gradients(Graph& graph, NodeId root, double h = 1e-5, double tol = 1e-4);

struct AdamState {
  explicit AdamState(double learning_rate) : lr(learning_rate) {}
  ParamSet first_moment;
  ParamSet second_moment;
  std::uint64_t step = 0;
  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void adam_step(AdamState& state, ParamSet& params, const ParamSet& grads);
// Same update, reading gradients straight off the tape after backward().
void adam_step(AdamState& state, ParamSet& params, const Graph& graph, const BoundParams& bound);

// Re-adds `params` to a cleared graph in binding order, reusing `bound`'s node ids.
void rebind_params(Graph& graph, const ParamSet& params, const BoundParams& bound,
                   bool requires_grad);

}  // namespace lesiongraph::diff
