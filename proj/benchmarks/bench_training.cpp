// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "lesiongraph/gradcheck.hpp"
#include "lesiongraph/variants.hpp"

using namespace lesiongraph;

namespace {

// Mid-range synthetic patient: 10 lesions, 40 features, 8 clinical values.
PatientInput bench_patient(std::size_t lesions) {
  Rng rng = make_rng(1, "bench");
  return random_patient({lesions, 40, 8, 32}, rng);
}

// One training step: forward, weighted BCE, backward, Adam.
void BM_TrainStep(benchmark::State& state) {
  const auto variant = static_cast<Variant>(state.range(0));
  const auto hidden = static_cast<std::size_t>(state.range(1));
  const PatientInput x = bench_patient(10);
  Rng rng = make_rng(1, "init");
  ModelParams params = init_params(variant, {40, 8}, hidden, rng);
  diff::AdamState adam(1e-3);
  diff::Graph g;
  diff::BoundParams bound = diff::bind_params(g, params, true);
  Rng step_rng = make_rng(1, "steps");
  const ForwardContext ctx{Mode::kTrain, 0.2, &step_rng};
  for (auto _ : state) {
    g.clear();
    diff::rebind_params(g, params, bound, true);
    const auto trace = build_forward(g, variant, bound, x, ctx);
    const auto loss = g.weighted_bce(trace.prob, 1, 4.0);
    benchmark::DoNotOptimize(g.forward(loss)[0]);
    g.backward(loss);
    diff::adam_step(adam, params, g, bound);
  }
  state.SetLabel(std::string(variant_tag(variant)));
}

void TrainStepArgs(benchmark::internal::Benchmark* b) {
  for (int v = 0; v < static_cast<int>(kAllVariants.size()); ++v) b->Args({v, 32});
  b->Args({0, 16})->Args({0, 64});
}

BENCHMARK(BM_TrainStep)->Apply(TrainStepArgs);

void BM_PredictCrossAttention(benchmark::State& state) {
  const PatientInput x = bench_patient(static_cast<std::size_t>(state.range(0)));
  Rng rng = make_rng(1, "init");
  const ModelParams params = init_params(Variant::kCrossAttention, {40, 8}, 32, rng);
  const std::vector<PatientInput> xs(16, x);
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict_all(Variant::kCrossAttention, params, xs));
  }
  state.SetItemsProcessed(state.iterations() * 16);
}

BENCHMARK(BM_PredictCrossAttention)->Arg(1)->Arg(10)->Arg(20);

}  // namespace
