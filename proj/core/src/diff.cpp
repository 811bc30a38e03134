// SPDX-License-Identifier: Apache-2.0
#include "lesiongraph/diff.hpp"

#include <algorithm>
#include <cmath>

#include "lesiongraph/errors.hpp"

namespace lesiongraph::diff {

namespace {

constexpr double kProbClamp = 1e-12;

std::string shape(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

// C = A * B, A is m x k, B is k x n. Rows of C are produced four at a time
// so each loaded row of B feeds four accumulations.
void gemm_nn(const double* __restrict a, const double* __restrict b, double* __restrict c,
             std::size_t m, std::size_t k, std::size_t n) {
  if (n == 1) {
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p];
      c[i] = s;
    }
    return;
  }
  std::fill(c, c + m * n, 0.0);
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    double* c0 = c + i * n;
    double* c1 = c0 + n;
    double* c2 = c1 + n;
    double* c3 = c2 + n;
    const double* a0 = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double x0 = a0[p], x1 = a0[k + p], x2 = a0[2 * k + p], x3 = a0[3 * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double bj = brow[j];
        c0[j] += x0 * bj;
        c1[j] += x1 * bj;
        c2[j] += x2 * bj;
        c3[j] += x3 * bj;
      }
    }
  }
  for (; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      if (aip == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// dA += dC * B^T, dC is m x n, B is k x n. B is transposed into scratch first
// so the inner loop is an axpy instead of a serial dot product.
void gemm_nt_acc(const double* __restrict dc, const double* __restrict b, double* __restrict da,
                 std::size_t m, std::size_t k, std::size_t n) {
  if (n == 1) {
    for (std::size_t i = 0; i < m; ++i) {
      const double g = dc[i];
      for (std::size_t p = 0; p < k; ++p) da[i * k + p] += g * b[p];
    }
    return;
  }
  thread_local std::vector<double> bt;
  bt.resize(k * n);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
  for (std::size_t i = 0; i < m; ++i) {
    const double* dcrow = dc + i * n;
    double* __restrict darow = da + i * k;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const double g0 = dcrow[j], g1 = dcrow[j + 1], g2 = dcrow[j + 2], g3 = dcrow[j + 3];
      const double* b0 = bt.data() + j * k;
      const double* b1 = b0 + k;
      const double* b2 = b1 + k;
      const double* b3 = b2 + k;
      for (std::size_t p = 0; p < k; ++p)
        darow[p] += g0 * b0[p] + g1 * b1[p] + g2 * b2[p] + g3 * b3[p];
    }
    for (; j < n; ++j) {
      const double g = dcrow[j];
      if (g == 0.0) continue;
      const double* btrow = bt.data() + j * k;
      for (std::size_t p = 0; p < k; ++p) darow[p] += g * btrow[p];
    }
  }
}

// dB += A^T * dC, A is m x k, dC is m x n.
void gemm_tn_acc(const double* __restrict a, const double* __restrict dc, double* __restrict db,
                 std::size_t m, std::size_t k, std::size_t n) {
  if (n == 1) {
    for (std::size_t i = 0; i < m; ++i) {
      const double g = dc[i];
      if (g == 0.0) continue;
      const double* arow = a + i * k;
      for (std::size_t p = 0; p < k; ++p) db[p] += arow[p] * g;
    }
    return;
  }
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* a0 = a + i * k;
    const double* d0 = dc + i * n;
    const double* d1 = d0 + n;
    const double* d2 = d1 + n;
    const double* d3 = d2 + n;
    for (std::size_t p = 0; p < k; ++p) {
      const double x0 = a0[p], x1 = a0[k + p], x2 = a0[2 * k + p], x3 = a0[3 * k + p];
      double* dbrow = db + p * n;
      for (std::size_t j = 0; j < n; ++j)
        dbrow[j] += x0 * d0[j] + x1 * d1[j] + x2 * d2[j] + x3 * d3[j];
    }
  }
  for (; i < m; ++i) {
    const double* arow = a + i * k;
    const double* dcrow = dc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      if (aip == 0.0) continue;
      double* dbrow = db + p * n;
      for (std::size_t j = 0; j < n; ++j) dbrow[j] += aip * dcrow[j];
    }
  }
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kMatMul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kConcatCols: return "concat-cols";
    case Op::kScale: return "scale";
    case Op::kLeakyRelu: return "leaky-relu";
    case Op::kRelu: return "relu";
    case Op::kSigmoid: return "sigmoid";
    case Op::kRowSoftmax: return "row-softmax";
    case Op::kRowMaxPool: return "row-max-pool";
    case Op::kDropoutMask: return "dropout-mask";
    case Op::kExp: return "exp";
    case Op::kNeg: return "neg";
    case Op::kWeightedBce: return "weighted-bce";
    case Op::kTranspose: return "transpose";
    case Op::kGatherRows: return "gather-rows";
    case Op::kReshape: return "reshape";
    case Op::kSum: return "sum";
    case Op::kMul: return "mul";
  }
  return "unknown";
}

Graph::Node& Graph::node(NodeId id) {
  if (id.index >= count_) throw ContractError("node id out of range");
  return nodes_[id.index];
}

const Graph::Node& Graph::node(NodeId id) const {
  if (id.index >= count_) throw ContractError("node id out of range");
  return nodes_[id.index];
}

Graph::Node& Graph::push(Op op, std::size_t rows, std::size_t cols) {
  if (count_ == nodes_.size()) nodes_.emplace_back();
  Node& n = nodes_[count_++];
  n.op = op;
  n.a = n.b = 0;
  n.scalar = n.scalar2 = 0.0;
  n.requires_grad = false;
  n.rows = rows;
  n.cols = cols;
  n.index.clear();
  n.name.clear();
  return n;
}

Graph::Node& Graph::push_unary(Op op, NodeId a) {
  const Node& pa = node(a);
  const std::size_t r = pa.rows, c = pa.cols;
  const bool rg = pa.requires_grad;
  Node& n = push(op, r, c);
  n.a = a.index;
  n.requires_grad = rg;
  return n;
}

NodeId Graph::input(const Matrix& value, bool requires_grad, std::string_view name) {
  return input(value.data(), value.rows(), value.cols(), requires_grad, name);
}

NodeId Graph::input(std::span<const double> values, std::size_t rows, std::size_t cols,
                    bool requires_grad, std::string_view name) {
  if (values.size() != rows * cols) {
    throw DimensionError("input: " + std::to_string(values.size()) + " values cannot form " +
                         shape(rows, cols));
  }
  Node& n = push(Op::kInput, rows, cols);
  n.value.resize(rows, cols);
  std::copy(values.begin(), values.end(), n.value.data().begin());
  n.requires_grad = requires_grad;
  n.name.assign(name);
  return NodeId{static_cast<std::uint32_t>(count_ - 1)};
}

Matrix& Graph::input_value(NodeId id) {
  Node& n = node(id);
  if (n.op != Op::kInput) throw ContractError("input_value on a non-input node");
  return n.value;
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Node& pa = node(a);
  const Node& pb = node(b);
  if (pa.cols != pb.rows) {
    throw DimensionError("matmul: inner dimensions differ (" + shape(pa.rows, pa.cols) + " * " +
                         shape(pb.rows, pb.cols) + ")");
  }
  const std::size_t r = pa.rows, c = pb.cols;
  const bool rg = pa.requires_grad || pb.requires_grad;
  Node& n = push(Op::kMatMul, r, c);
  n.a = a.index;
  n.b = b.index;
  n.requires_grad = rg;
  return NodeId{static_cast<std::uint32_t>(count_ - 1)};
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Node& pa = node(a);
  const Node& pb = node(b);
  const bool ok = (pa.rows == pb.rows && pa.cols == pb.cols) ||
                  (pb.rows == 1 && pb.cols == pa.cols) || (pb.rows == 1 && pb.cols == 1);
  if (!ok) {
    throw DimensionError("add: cannot broadcast " + shape(pb.rows, pb.cols) + " onto " +
                         shape(pa.rows, pa.cols));
  }
  const std::size_t r = pa.rows, c = pa.cols;
  const bool rg = pa.requires_grad || pb.requires_grad;
  Node& n = push(Op::kAdd, r, c);
  n.a = a.index;
  n.b = b.index;
  n.requires_grad = rg;
  return NodeId{static_cast<std::uint32_t>(count_ - 1)};
}

NodeId Graph::mul(NodeId a, NodeId b) {
  const Node& pa = node(a);
  const Node& pb = node(b);
  if (pa.rows != pb.rows || pa.cols != pb.cols) {
    throw DimensionError("mul: shapes differ (" + shape(pa.rows, pa.cols) + " vs " +
                         shape(pb.rows, pb.cols) + ")");
  }
  const std::size_t r = pa.rows, c = pa.cols;
  const bool rg = pa.requires_grad || pb.requires_grad;
  Node& n = push(Op::kMul, r, c);
  n.a = a.index;
  n.b = b.index;
  n.requires_grad = rg;
  return NodeId{static_cast<std::uint32_t>(count_ - 1)};
}

NodeId Graph::concat_cols(NodeId a, NodeId b) {
  const Node& pa = node(a);
  const Node& pb = node(b);
  if (pa.rows != pb.rows) {
    throw DimensionError("concat-cols: row counts differ (" + shape(pa.rows, pa.cols) + " | " +
                         shape(pb.rows, pb.cols) + ")");
  }
  const std::size_t r = pa.rows, c = pa.cols + pb.cols;
  const bool rg = pa.requires_grad || pb.requires_grad;
  Node& n = push(Op::kConcatCols, r, c);
  n.a = a.index;
  n.b = b.index;
  n.requires_grad = rg;
  return NodeId{static_cast<std::uint32_t>(count_ - 1)};
}

NodeId Graph::scale(NodeId a, double factor) {
  push_unary(Op::kScale, a).scalar = factor;
  return NodeId{static_cast<std::uint32_t>(count_ - 1)};
}

NodeId Graph::leaky_relu(NodeId a, double slope) {
  push_unary(Op::kLeakyRelu, a).scalar = slope;
  return NodeId{static_cast<std::uint32_t>(count_ - 1)};
}

NodeId Graph::relu(NodeId a) {
  push_unary(Op::kRelu, a);
  return NodeId{static_cast<std::uint32_t>(count_ - 1)};
}

NodeId Graph::sigmoid(NodeId a) {
  push_unary(Op::kSigmoid, a);
  return NodeId{static_cast<std::uint32_t>(count_ - 1)};
}

NodeId Graph::row_softmax(NodeId a) {
  push_unary(Op::kRowSoftmax, a);
  return NodeId{static_cast<std::uint32_t>(count_ - 1)};
}

NodeId Graph::exp(NodeId a) {
  push_unary(Op::kExp, a);
  return NodeId{static_cast<std::uint32_t>(count_ - 1)};
}

NodeId Graph::neg(NodeId a) {
  push_unary(Op::kNeg, a);
  return NodeId{static_cast<std::uint32_t>(count_ - 1)};
}

NodeId Graph::row_max_pool(NodeId a) {
  const Node& pa = node(a);
  if (pa.rows == 0) throw DimensionError("row-max-pool: input has no rows");
  const std::size_t c = pa.cols;
  const bool rg = pa.requires_grad;
  Node& n = push(Op::kRowMaxPool, 1, c);
  n.a = a.index;
  n.requires_grad = rg;
  return NodeId{static_cast<std::uint32_t>(count_ - 1)};
}

NodeId Graph::dropout_mask(NodeId a, const Matrix& mask) {
  const Node& pa = node(a);
  if (pa.rows != mask.rows() || pa.cols != mask.cols()) {
    throw DimensionError("dropout-mask: mask " + mask.shape_string() + " does not match input " +
                         shape(pa.rows, pa.cols));
  }
  Node& n = push_unary(Op::kDropoutMask, a);
  n.aux.resize(mask.rows(), mask.cols());
  std::copy(mask.data().begin(), mask.data().end(), n.aux.data().begin());
  return NodeId{static_cast<std::uint32_t>(count_ - 1)};
}

NodeId Graph::weighted_bce(NodeId pred, int label, double pos_weight) {
  const Node& pp = node(pred);
  if (pp.rows != 1 || pp.cols != 1) {
    throw DimensionError("weighted-bce: prediction must be 1x1, got " + shape(pp.rows, pp.cols));
  }
  if (label != 0 && label != 1) throw ContractError("weighted-bce: label must be 0 or 1");
  Node& n = push_unary(Op::kWeightedBce, pred);
  n.scalar = label;
  n.scalar2 = pos_weight;
  return NodeId{static_cast<std::uint32_t>(count_ - 1)};
}

NodeId Graph::transpose(NodeId a) {
  const Node& pa = node(a);
  const std::size_t r = pa.cols, c = pa.rows;
  const bool rg = pa.requires_grad;
  Node& n = push(Op::kTranspose, r, c);
  n.a = a.index;
  n.requires_grad = rg;
  return NodeId{static_cast<std::uint32_t>(count_ - 1)};
}

NodeId Graph::gather_rows(NodeId a, std::span<const std::uint32_t> rows) {
  const Node& pa = node(a);
  for (auto r : rows) {
    if (r >= pa.rows) {
      throw DimensionError("gather-rows: row " + std::to_string(r) + " out of range for " +
                           shape(pa.rows, pa.cols));
    }
  }
  const std::size_t c = pa.cols;
  const bool rg = pa.requires_grad;
  Node& n = push(Op::kGatherRows, rows.size(), c);
  n.a = a.index;
  n.requires_grad = rg;
  n.index.assign(rows.begin(), rows.end());
  return NodeId{static_cast<std::uint32_t>(count_ - 1)};
}

NodeId Graph::reshape(NodeId a, std::size_t rows, std::size_t cols) {
  const Node& pa = node(a);
  if (pa.rows * pa.cols != rows * cols) {
    throw DimensionError("reshape: cannot view " + shape(pa.rows, pa.cols) + " as " +
                         shape(rows, cols));
  }
  const bool rg = pa.requires_grad;
  Node& n = push(Op::kReshape, rows, cols);
  n.a = a.index;
  n.requires_grad = rg;
  return NodeId{static_cast<std::uint32_t>(count_ - 1)};
}

NodeId Graph::sum(NodeId a) {
  const bool rg = node(a).requires_grad;
  Node& n = push(Op::kSum, 1, 1);
  n.a = a.index;
  n.requires_grad = rg;
  return NodeId{static_cast<std::uint32_t>(count_ - 1)};
}

std::vector<NodeId> Graph::parameters() const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < count_; ++i) {
    if (nodes_[i].op == Op::kInput && nodes_[i].requires_grad) {
      out.push_back(NodeId{static_cast<std::uint32_t>(i)});
    }
  }
  return out;
}

void Graph::eval(Node& n) {
  if (n.op == Op::kInput) return;
  n.value.resize(n.rows, n.cols);
  double* out = n.value.data().data();
  const std::size_t size = n.rows * n.cols;
  const Node& a = nodes_[n.a];
  const double* x = a.value.data().data();

  switch (n.op) {
    case Op::kInput:
      break;
    case Op::kMatMul: {
      const Node& b = nodes_[n.b];
      gemm_nn(x, b.value.data().data(), out, a.rows, a.cols, b.cols);
      break;
    }
    case Op::kAdd: {
      const Node& b = nodes_[n.b];
      const double* y = b.value.data().data();
      if (b.rows == a.rows && b.cols == a.cols) {
        for (std::size_t i = 0; i < size; ++i) out[i] = x[i] + y[i];
      } else if (b.rows == 1 && b.cols == a.cols) {
        for (std::size_t r = 0; r < n.rows; ++r)
          for (std::size_t c = 0; c < n.cols; ++c) out[r * n.cols + c] = x[r * n.cols + c] + y[c];
      } else {
        for (std::size_t i = 0; i < size; ++i) out[i] = x[i] + y[0];
      }
      break;
    }
    case Op::kMul: {
      const double* y = nodes_[n.b].value.data().data();
      for (std::size_t i = 0; i < size; ++i) out[i] = x[i] * y[i];
      break;
    }
    case Op::kConcatCols: {
      const Node& b = nodes_[n.b];
      const double* y = b.value.data().data();
      for (std::size_t r = 0; r < n.rows; ++r) {
        std::copy(x + r * a.cols, x + (r + 1) * a.cols, out + r * n.cols);
        std::copy(y + r * b.cols, y + (r + 1) * b.cols, out + r * n.cols + a.cols);
      }
      break;
    }
    case Op::kScale:
      for (std::size_t i = 0; i < size; ++i) out[i] = n.scalar * x[i];
      break;
    case Op::kLeakyRelu:
      for (std::size_t i = 0; i < size; ++i) out[i] = x[i] > 0.0 ? x[i] : n.scalar * x[i];
      break;
    case Op::kRelu:
      for (std::size_t i = 0; i < size; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
    case Op::kSigmoid:
      for (std::size_t i = 0; i < size; ++i) {
        out[i] = x[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-x[i]))
                             : std::exp(x[i]) / (1.0 + std::exp(x[i]));
      }
      break;
    case Op::kRowSoftmax:
      for (std::size_t r = 0; r < n.rows; ++r) {
        const double* xr = x + r * n.cols;
        double* yr = out + r * n.cols;
        const double mx = *std::max_element(xr, xr + n.cols);
        double total = 0.0;
        for (std::size_t c = 0; c < n.cols; ++c) {
          yr[c] = std::exp(xr[c] - mx);
          total += yr[c];
        }
        for (std::size_t c = 0; c < n.cols; ++c) yr[c] /= total;
      }
      break;
    case Op::kRowMaxPool:
      n.index.assign(n.cols, 0);
      for (std::size_t c = 0; c < n.cols; ++c) {
        double best = x[c];
        std::uint32_t arg = 0;
        for (std::size_t r = 1; r < a.rows; ++r) {
          if (x[r * n.cols + c] > best) {
            best = x[r * n.cols + c];
            arg = static_cast<std::uint32_t>(r);
          }
        }
        out[c] = best;
        n.index[c] = arg;
      }
      break;
    case Op::kDropoutMask: {
      const double* m = n.aux.data().data();
      for (std::size_t i = 0; i < size; ++i) out[i] = x[i] * m[i];
      break;
    }
    case Op::kExp:
      for (std::size_t i = 0; i < size; ++i) out[i] = std::exp(x[i]);
      break;
    case Op::kNeg:
      for (std::size_t i = 0; i < size; ++i) out[i] = -x[i];
      break;
    case Op::kWeightedBce: {
      const double p = std::clamp(x[0], kProbClamp, 1.0 - kProbClamp);
      const double y = n.scalar;
      out[0] = -(n.scalar2 * y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
      break;
    }
    case Op::kTranspose:
      for (std::size_t r = 0; r < a.rows; ++r)
        for (std::size_t c = 0; c < a.cols; ++c) out[c * a.rows + r] = x[r * a.cols + c];
      break;
    case Op::kGatherRows:
      for (std::size_t r = 0; r < n.rows; ++r) {
        const double* src = x + static_cast<std::size_t>(n.index[r]) * n.cols;
        std::copy(src, src + n.cols, out + r * n.cols);
      }
      break;
    case Op::kReshape:
      std::copy(x, x + size, out);
      break;
    case Op::kSum: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.rows * a.cols; ++i) s += x[i];
      out[0] = s;
      break;
    }
  }
  if (!n.value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + std::string(op_name(n.op)));
  }
}

const Matrix& Graph::forward(NodeId root) {
  if (root.index >= count_) throw ContractError("forward: root out of range");
  for (std::size_t i = 0; i <= root.index; ++i) eval(nodes_[i]);
  return nodes_[root.index].value;
}

void Graph::propagate(Node& n) {
  if (n.op == Op::kInput) return;
  Node& a = nodes_[n.a];
  const double* g = n.grad.data().data();
  const std::size_t size = n.rows * n.cols;
  if (n.op == fault_op_ && fault_factor_ != 1.0) {
    for (auto& v : n.grad.data()) v *= fault_factor_;
  }
  double* ga = a.requires_grad ? a.grad.data().data() : nullptr;
  const double* x = a.value.data().data();
  const double* y = n.value.data().data();

  switch (n.op) {
    case Op::kInput:
      break;
    case Op::kMatMul: {
      Node& b = nodes_[n.b];
      if (ga) gemm_nt_acc(g, b.value.data().data(), ga, a.rows, a.cols, b.cols);
      if (b.requires_grad) gemm_tn_acc(x, g, b.grad.data().data(), a.rows, a.cols, b.cols);
      break;
    }
    case Op::kAdd: {
      Node& b = nodes_[n.b];
      if (ga)
        for (std::size_t i = 0; i < size; ++i) ga[i] += g[i];
      if (b.requires_grad) {
        double* gb = b.grad.data().data();
        if (b.rows == a.rows && b.cols == a.cols) {
          for (std::size_t i = 0; i < size; ++i) gb[i] += g[i];
        } else if (b.rows == 1 && b.cols == a.cols) {
          for (std::size_t r = 0; r < n.rows; ++r)
            for (std::size_t c = 0; c < n.cols; ++c) gb[c] += g[r * n.cols + c];
        } else {
          for (std::size_t i = 0; i < size; ++i) gb[0] += g[i];
        }
      }
      break;
    }
    case Op::kMul: {
      Node& b = nodes_[n.b];
      const double* yb = b.value.data().data();
      if (ga)
        for (std::size_t i = 0; i < size; ++i) ga[i] += g[i] * yb[i];
      if (b.requires_grad) {
        double* gb = b.grad.data().data();
        for (std::size_t i = 0; i < size; ++i) gb[i] += g[i] * x[i];
      }
      break;
    }
    case Op::kConcatCols: {
      Node& b = nodes_[n.b];
      for (std::size_t r = 0; r < n.rows; ++r) {
        if (ga)
          for (std::size_t c = 0; c < a.cols; ++c) ga[r * a.cols + c] += g[r * n.cols + c];
        if (b.requires_grad) {
          double* gb = b.grad.data().data();
          for (std::size_t c = 0; c < b.cols; ++c)
            gb[r * b.cols + c] += g[r * n.cols + a.cols + c];
        }
      }
      break;
    }
    case Op::kScale:
      for (std::size_t i = 0; i < size; ++i) ga[i] += n.scalar * g[i];
      break;
    case Op::kLeakyRelu:
      for (std::size_t i = 0; i < size; ++i) ga[i] += x[i] > 0.0 ? g[i] : n.scalar * g[i];
      break;
    case Op::kRelu:
      for (std::size_t i = 0; i < size; ++i)
        if (x[i] > 0.0) ga[i] += g[i];
      break;
    case Op::kSigmoid:
      for (std::size_t i = 0; i < size; ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
      break;
    case Op::kRowSoftmax:
      for (std::size_t r = 0; r < n.rows; ++r) {
        const double* yr = y + r * n.cols;
        const double* gr = g + r * n.cols;
        double dot = 0.0;
        for (std::size_t c = 0; c < n.cols; ++c) dot += gr[c] * yr[c];
        for (std::size_t c = 0; c < n.cols; ++c) ga[r * n.cols + c] += yr[c] * (gr[c] - dot);
      }
      break;
    case Op::kRowMaxPool:
      for (std::size_t c = 0; c < n.cols; ++c) ga[n.index[c] * n.cols + c] += g[c];
      break;
    case Op::kDropoutMask: {
      const double* m = n.aux.data().data();
      for (std::size_t i = 0; i < size; ++i) ga[i] += g[i] * m[i];
      break;
    }
    case Op::kExp:
      for (std::size_t i = 0; i < size; ++i) ga[i] += g[i] * y[i];
      break;
    case Op::kNeg:
      for (std::size_t i = 0; i < size; ++i) ga[i] -= g[i];
      break;
    case Op::kWeightedBce: {
      const double p = x[0];
      if (p > kProbClamp && p < 1.0 - kProbClamp) {
        const double lbl = n.scalar;
        ga[0] += g[0] * (-n.scalar2 * lbl / p + (1.0 - lbl) / (1.0 - p));
      }
      break;
    }
    case Op::kTranspose:
      for (std::size_t r = 0; r < a.rows; ++r)
        for (std::size_t c = 0; c < a.cols; ++c) ga[r * a.cols + c] += g[c * a.rows + r];
      break;
    case Op::kGatherRows:
      for (std::size_t r = 0; r < n.rows; ++r) {
        double* dst = ga + static_cast<std::size_t>(n.index[r]) * n.cols;
        const double* src = g + r * n.cols;
        for (std::size_t c = 0; c < n.cols; ++c) dst[c] += src[c];
      }
      break;
    case Op::kReshape:
      for (std::size_t i = 0; i < size; ++i) ga[i] += g[i];
      break;
    case Op::kSum:
      for (std::size_t i = 0; i < a.rows * a.cols; ++i) ga[i] += g[0];
      break;
  }
}

void Graph::backward(NodeId root) {
  Node& r = node(root);
  if (r.rows != 1 || r.cols != 1) {
    throw ContractError("backward: root must be 1x1, got " + shape(r.rows, r.cols));
  }
  for (std::size_t i = 0; i <= root.index; ++i) {
    Node& n = nodes_[i];
    if (!n.requires_grad) continue;
    n.grad.resize(n.rows, n.cols);
    n.grad.fill(0.0);
  }
  if (!r.requires_grad) return;
  r.grad[0] = 1.0;
  for (std::size_t i = root.index + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.requires_grad) propagate(n);
  }
}

BoundParams bind_params(Graph& graph, const ParamSet& params, bool requires_grad) {
  BoundParams bound;
  for (const auto& [name, value] : params) {
    bound.emplace(name, graph.input(value, requires_grad, name));
  }
  return bound;
}

ParamSet collect_grads(const Graph& graph, const BoundParams& bound) {
  ParamSet grads;
  for (const auto& [name, id] : bound) {
    if (graph.requires_grad(id)) grads.emplace(name, graph.grad(id));
  }
  return grads;
}

NodeId lookup(const BoundParams& bound, std::string_view name) {
  auto it = bound.find(name);
  if (it == bound.end()) throw ContractError("missing parameter '" + std::string(name) + "'");
  return it->second;
}

Matrix glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = dist(rng);
  return m;
}

bool GradCheckReport::all_passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.rel_error);
  return worst;
}

GradCheckReport check_gradients(Graph& graph, NodeId root, double h, double tol) {
  if (!(h >= 1e-7 && h <= 1e-4)) throw ContractError("check_gradients: h must be in [1e-7, 1e-4]");
  graph.forward(root);
  graph.backward(root);

  GradCheckReport report;
  for (NodeId param : graph.parameters()) {
    if (param.index > root.index) continue;
    const Matrix analytic = graph.grad(param);
    Matrix& value = graph.input_value(param);
    GradCheckEntry entry;
    entry.name = graph.name(param);
    entry.node = param;
    entry.entries = value.size();
    double diff_sq = 0.0, analytic_sq = 0.0, numeric_sq = 0.0;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + h;
      const double up = graph.forward(root)[0];
      value[i] = saved - h;
      const double down = graph.forward(root)[0];
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i];
      diff_sq += (a - numeric) * (a - numeric);
      analytic_sq += a * a;
      numeric_sq += numeric * numeric;
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      if (!(err < tol)) {
        ++entry.failing;
        entry.failing_abs_diff = std::max(entry.failing_abs_diff, std::abs(a - numeric));
      }
      if (i == 0 || err > entry.rel_error) {
        entry.rel_error = err;
        entry.worst_index = i;
        entry.analytic = a;
        entry.numeric = numeric;
      }
    }
    entry.norm_rel_error = std::sqrt(diff_sq) /
                           std::max({std::sqrt(analytic_sq), std::sqrt(numeric_sq), 1e-8});
    entry.passed = entry.failing == 0;
    report.entries.push_back(std::move(entry));
  }
  graph.forward(root);
  return report;
}

namespace {

void adam_update(AdamState& state, const std::string& name, Matrix& p, const Matrix& g) {
  if (!p.same_shape(g)) {
    throw DimensionError("adam_step: gradient " + g.shape_string() + " does not match parameter '" +
                         name + "' " + p.shape_string());
  }
  auto m_it = state.first_moment.find(name);
  if (m_it == state.first_moment.end()) {
    m_it = state.first_moment.emplace(name, Matrix(p.rows(), p.cols())).first;
  }
  auto v_it = state.second_moment.find(name);
  if (v_it == state.second_moment.end()) {
    v_it = state.second_moment.emplace(name, Matrix(p.rows(), p.cols())).first;
  }
  Matrix& m = m_it->second;
  Matrix& v = v_it->second;
  if (!m.same_shape(p) || !v.same_shape(p)) {
    throw DimensionError("adam_step: moment shape mismatch for '" + name + "'");
  }
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  double* __restrict pm = m.data().data();
  double* __restrict pv = v.data().data();
  double* __restrict pp = p.data().data();
  const double* __restrict pg = g.data().data();
  const double b1 = state.beta1, b2 = state.beta2, lr = state.lr, eps = state.eps;
  for (std::size_t i = 0; i < p.size(); ++i) {
    pm[i] = b1 * pm[i] + (1.0 - b1) * pg[i];
    pv[i] = b2 * pv[i] + (1.0 - b2) * pg[i] * pg[i];
    const double m_hat = pm[i] / correction1;
    const double v_hat = pv[i] / correction2;
    pp[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

}  // namespace

void adam_step(AdamState& state, ParamSet& params, const ParamSet& grads) {
  ++state.step;
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw ContractError("adam_step: unknown parameter '" + name + "'");
    adam_update(state, name, it->second, g);
  }
}

void adam_step(AdamState& state, ParamSet& params, const Graph& graph, const BoundParams& bound) {
  ++state.step;
  for (const auto& [name, id] : bound) {
    if (!graph.requires_grad(id)) continue;
    auto it = params.find(name);
    if (it == params.end()) throw ContractError("adam_step: unknown parameter '" + name + "'");
    adam_update(state, name, it->second, graph.grad(id));
  }
}

void rebind_params(Graph& graph, const ParamSet& params, const BoundParams& bound,
                   bool requires_grad) {
  if (params.size() != bound.size()) throw ContractError("rebind_params: parameter set changed");
  auto b = bound.begin();
  for (const auto& [name, value] : params) {
    const NodeId id = graph.input(value, requires_grad, name);
    if (b->first != name || !(b->second == id)) {
      throw ContractError("rebind_params: binding order differs at '" + name + "'");
    }
    ++b;
  }
}

}  // namespace lesiongraph::diff
