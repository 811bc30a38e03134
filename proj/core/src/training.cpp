// SPDX-License-Identifier: Apache-2.0
#include "lesiongraph/training.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lesiongraph/errors.hpp"
#include "lesiongraph/metrics.hpp"

namespace lesiongraph {

double positive_class_weight(std::span<const PatientInput> patients) {
  std::size_t pos = 0;
  for (const auto& p : patients) pos += static_cast<std::size_t>(p.label);
  if (pos == 0 || pos == patients.size()) {
    throw ProtocolError("training split needs both classes");
  }
  return static_cast<double>(patients.size() - pos) / static_cast<double>(pos);
}

TrainResult train(Variant variant, std::span<const PatientInput> train,
                  std::span<const PatientInput> validation, const HyperParams& hyper,
                  const TrainOptions& options) {
  if (train.empty() || validation.empty()) throw ContractError("train: empty split");
  const Dims dims{train.front().features.cols(), train.front().clinical.rows()};
  Rng init_rng = make_rng(options.seed, "init", {options.repeat, options.grid_index});
  Rng step_rng = make_rng(options.seed, "steps", {options.repeat, options.grid_index});
  Rng val_rng = make_rng(options.seed, "val-subsets", {options.repeat});

  ModelParams params = init_params(variant, dims, hyper.hidden, init_rng);
  const double pos_weight = positive_class_weight(train);

  std::vector<int> val_labels;
  for (const auto& v : validation) val_labels.push_back(v.label);

  TrainResult result;
  result.best_params = params;
  if (options.epochs == 0) {
    auto subsets = balanced_subsets(val_labels, options.subsets, val_rng);
    result.best_val_auc =
        balanced_auc(predict_all(variant, params, validation), val_labels, subsets);
    return result;
  }

  diff::AdamState adam(hyper.lr);
  diff::Graph graph;
  diff::BoundParams bound;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const ForwardContext ctx{Mode::kTrain, hyper.dropout, &step_rng};
  bool best_set = false;

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), step_rng);
    double loss_total = 0.0;
    for (std::size_t idx : order) {
      const PatientInput& x = train[idx];
      graph.clear();
      if (bound.empty()) {
        bound = diff::bind_params(graph, params, true);
      } else {
        diff::rebind_params(graph, params, bound, true);
      }
      try {
        const ForwardTrace trace = build_forward(graph, variant, bound, x, ctx);
        const diff::NodeId loss = graph.weighted_bce(trace.prob, x.label, pos_weight);
        const double value = graph.forward(loss)[0];
        graph.backward(loss);
        loss_total += value;
      } catch (const NumericError& e) {
        throw NumericError(fmt::format("{} (variant {}, epoch {}, patient '{}', lr {}, hidden {})",
                                       e.what(), variant_tag(variant), epoch, x.patient_id,
                                       hyper.lr, hyper.hidden));
      }
      diff::adam_step(adam, params, graph, bound);
    }

    const auto subsets = balanced_subsets(val_labels, options.subsets, val_rng);
    const double val_auc =
        balanced_auc(predict_all(variant, params, validation), val_labels, subsets);
    const double mean_loss = loss_total / static_cast<double>(train.size());
    if (!std::isfinite(mean_loss)) {
      throw NumericError(fmt::format("non-finite training loss (variant {}, epoch {})",
                                     variant_tag(variant), epoch));
    }
    result.history.push_back({epoch, mean_loss, val_auc});
    if (!best_set || val_auc > result.best_val_auc) {
      best_set = true;
      result.best_val_auc = val_auc;
      result.best_epoch = epoch;
      result.best_params = params;
    }
  }
  return result;
}

}  // namespace lesiongraph
