// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "inputs.hpp"
#include "lesiongraph/baselines.hpp"
#include "lesiongraph/errors.hpp"
#include "lesiongraph/variants.hpp"
#include "reference.hpp"

using namespace lesiongraph;
using testing::random_input;

TEST_CASE("MLP variants match the loop implementation on their inputs") {
  Rng rng = make_rng(21, "mlp");
  const PatientInput x = random_input(4, 5, 3, rng);
  const Matrix clin = x.clinical.transposed();
  const auto a = testing::jittered_params(Variant::kMlpClinical, 5, 3, 8, rng);
  CHECK(std::abs(predict(Variant::kMlpClinical, a, x) - testing::ref::mlp(clin, a)) < 1e-12);
  CHECK(std::abs(mlp_forward(clin.data(), a) - testing::ref::mlp(clin, a)) < 1e-12);
  const auto b = testing::jittered_params(Variant::kMlpImage, 5, 3, 8, rng);
  CHECK(std::abs(predict(Variant::kMlpImage, b, x) - testing::ref::mlp(x.image_mean, b)) < 1e-12);
  const auto c = testing::jittered_params(Variant::kMlpClinicalImage, 5, 3, 8, rng);
  CHECK(std::abs(predict(Variant::kMlpClinicalImage, c, x) -
                 testing::ref::mlp(testing::ref::concat(clin, x.image_mean), c)) < 1e-12);
}

TEST_CASE("MIL is a max-pooled per-lesion MLP") {
  Rng rng = make_rng(22, "mil");
  for (std::size_t lesions : {1u, 3u, 10u}) {
    const PatientInput x = random_input(lesions, 5, 3, rng);
    const auto p = testing::jittered_params(Variant::kMilImage, 5, 3, 8, rng);
    CHECK(std::abs(predict(Variant::kMilImage, p, x) - testing::ref::mil(x.features, p)) < 1e-12);
    CHECK(std::abs(mil_forward(x.features, p) - testing::ref::mil(x.features, p)) < 1e-12);
  }
}

TEST_CASE("GraphConv image baseline matches root plus weighted-neighbour sums") {
  Rng rng = make_rng(23, "gc");
  for (std::size_t lesions : {1u, 4u, 7u}) {
    const PatientInput x = random_input(lesions, 5, 3, rng);
    const auto p = testing::jittered_params(Variant::kGraphConvImage, 5, 3, 8, rng);
    CHECK(std::abs(predict(Variant::kGraphConvImage, p, x) - testing::ref::graphconv_image(x, p)) <
          1e-12);
    LesionGraph graph;
    graph.node_features = x.features;
    graph.edge_weights = x.edge_weights;
    CHECK(std::abs(graphconv_forward(graph, p) - testing::ref::graphconv_image(x, p)) < 1e-12);
  }
}

TEST_CASE("concat fusion ablation tiles the clinical vector beside every lesion") {
  Rng rng = make_rng(24, "concat");
  for (std::size_t lesions : {1u, 3u, 6u}) {
    const PatientInput x = random_input(lesions, 5, 3, rng);
    const auto p = testing::jittered_params(Variant::kAblationConcatFusion, 5, 3, 6, rng);
    const double want = testing::ref::concat_fusion(x, p);
    CHECK(std::abs(predict(Variant::kAblationConcatFusion, p, x) - want) < 1e-12);
    CHECK(std::abs(ablation_concat_forward(x, p) - want) < 1e-12);
  }
}

TEST_CASE("GraphConv swap ablation replaces only the message passing") {
  Rng rng = make_rng(25, "gc-xatt");
  const PatientInput x = random_input(5, 5, 3, rng);
  const auto p = testing::jittered_params(Variant::kAblationGraphConvCrossAtt, 5, 3, 6, rng);
  Matrix h = x.features;
  for (std::string b : {"1", "2"}) {
    const Matrix act = testing::ref::relu(testing::ref::graphconv(h, x.edge_weights, p, "gc" + b));
    h = testing::ref::cross_attention(act, x.clinical, p, "xatt" + b).out;
  }
  CHECK(std::abs(predict(Variant::kAblationGraphConvCrossAtt, p, x) - testing::ref::head(h, p)) <
        1e-12);
}

TEST_CASE("MLP input width is checked") {
  Rng rng = make_rng(26, "mlp-dims");
  const auto p = init_mlp(4, 8, rng);
  const std::vector<double> wrong(3, 1.0);
  CHECK_THROWS_AS(mlp_forward(wrong, p), DimensionError);
}

TEST_CASE("every variant initializes finite parameters of the declared widths") {
  Rng rng = make_rng(27, "init");
  for (Variant v : kAllVariants) {
    const auto p = init_params(v, {7, 4}, 16, rng);
    CHECK_FALSE(p.empty());
    for (const auto& [name, m] : p) CHECK(m.all_finite());
  }
  const auto xatt = init_params(Variant::kCrossAttention, {7, 4}, 16, rng);
  CHECK(xatt.at("gat1.theta_src").rows() == 16);
  CHECK(xatt.at("gat1.theta_src").cols() == 7);
  CHECK(xatt.at("xatt1.wk").cols() == 4);
}
