// SPDX-License-Identifier: Apache-2.0
// Straight-loop forward passes used as oracles for the tape-based models.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lesiongraph/matrix.hpp"
#include "lesiongraph/model.hpp"

namespace testing::ref {

using lesiongraph::Matrix;
using lesiongraph::ModelParams;

inline Matrix mul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

inline Matrix relu(Matrix m) {
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::max(0.0, m[i]);
  return m;
}

inline Matrix add_row(Matrix m, const Matrix& bias) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) += bias[j];
  return m;
}

inline Matrix max_pool(const Matrix& m) {
  Matrix out(1, m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double best = m(0, j);
    for (std::size_t i = 1; i < m.rows(); ++i) best = std::max(best, m(i, j));
    out[j] = best;
  }
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void softmax_rows(Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double mx = m(i, 0);
    for (std::size_t j = 1; j < m.cols(); ++j) mx = std::max(mx, m(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) z += (m(i, j) = std::exp(m(i, j) - mx));
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) /= z;
  }
}

struct Layer {
  Matrix out;
  Matrix attention;
};

// Pre-activation GATv2 output; messages are the destination projections.
inline Layer gatv2(const Matrix& z, const Matrix& w, const Matrix& ts, const Matrix& td,
                   const Matrix& te, const Matrix& att) {
  const std::size_t n = z.rows(), d = ts.rows();
  const Matrix src = mul(z, ts.transposed());
  const Matrix dst = mul(z, td.transposed());
  Matrix e(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double v = src(i, k) + dst(j, k) + te[k] * w(i, j);
        s += att[k] * (v > 0.0 ? v : lesiongraph::kLeakySlope * v);
      }
      e(i, j) = s;
    }
  softmax_rows(e);
  return {mul(e, dst), e};
}

inline Layer gatv2(const Matrix& z, const Matrix& w, const ModelParams& p, const std::string& pre) {
  return gatv2(z, w, p.at(pre + ".theta_src"), p.at(pre + ".theta_dst"),
               p.at(pre + ".theta_edge"), p.at(pre + ".att"));
}

inline Layer cross_attention(const Matrix& z, const Matrix& c, const Matrix& wq, const Matrix& wk,
                             const Matrix& wv) {
  const std::size_t n = z.rows(), dc = c.rows();
  const Matrix q = mul(z, wq);
  Matrix logits(n, dc);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < dc; ++k) {
      double s = 0.0;
      for (std::size_t m = 0; m < dc; ++m) s += q(i, m) * c[k] * wk[m];
      logits(i, k) = s / std::sqrt(static_cast<double>(dc));
    }
  softmax_rows(logits);
  return {mul(logits, mul(c, wv)), logits};
}

inline Layer cross_attention(const Matrix& z, const Matrix& c, const ModelParams& p,
                             const std::string& pre) {
  return cross_attention(z, c, p.at(pre + ".wq"), p.at(pre + ".wk"), p.at(pre + ".wv"));
}

inline double head(const Matrix& h, const ModelParams& p) {
  return sigmoid(mul(max_pool(h), p.at("head.w"))[0] + p.at("head.b")[0]);
}

inline double cross_attention_model(const lesiongraph::PatientInput& x, const ModelParams& p) {
  Matrix h = x.features;
  for (std::string b : {"1", "2"}) {
    const Matrix act = relu(gatv2(h, x.edge_weights, p, "gat" + b).out);
    h = cross_attention(act, x.clinical, p, "xatt" + b).out;
  }
  return head(h, p);
}

inline Matrix concat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
    for (std::size_t j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
  }
  return out;
}

inline double concat_fusion(const lesiongraph::PatientInput& x, const ModelParams& p) {
  Matrix tiled(x.lesion_count(), x.clinical.rows());
  for (std::size_t i = 0; i < tiled.rows(); ++i)
    for (std::size_t j = 0; j < tiled.cols(); ++j) tiled(i, j) = x.clinical[j];
  Matrix h = x.features;
  for (std::string b : {"1", "2"}) {
    const Matrix act = relu(gatv2(h, x.edge_weights, p, "gat" + b).out);
    h = mul(concat(act, tiled), p.at("fuse" + b + ".proj"));
  }
  return head(h, p);
}

inline double mlp(const Matrix& row, const ModelParams& p) {
  Matrix h = relu(add_row(mul(row, p.at("mlp.w1")), p.at("mlp.b1")));
  h = relu(add_row(mul(h, p.at("mlp.w2")), p.at("mlp.b2")));
  return sigmoid(add_row(mul(h, p.at("mlp.w3")), p.at("mlp.b3"))[0]);
}

inline double mil(const Matrix& lesions, const ModelParams& p) {
  const Matrix h = relu(add_row(mul(lesions, p.at("mil.w1")), p.at("mil.b1")));
  return sigmoid(add_row(mul(max_pool(h), p.at("mil.w2")), p.at("mil.b2"))[0]);
}

inline Matrix graphconv(const Matrix& z, const Matrix& w, const ModelParams& p,
                        const std::string& pre) {
  Matrix a = mul(z, p.at(pre + ".root"));
  const Matrix b = mul(mul(w, z), p.at(pre + ".rel"));
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline double graphconv_image(const lesiongraph::PatientInput& x, const ModelParams& p) {
  const Matrix h = relu(graphconv(x.features, x.edge_weights, p, "gc1"));
  return sigmoid(max_pool(graphconv(h, x.edge_weights, p, "gc2"))[0]);
}

}  // namespace testing::ref
