// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lesiongraph/variants.hpp"

namespace lesiongraph {

struct HyperParams {
  double lr = 1e-3;
  std::size_t hidden = 32;
  double gamma = 1.0;
  double dropout = 0.2;
};

struct TrainOptions {
  std::size_t epochs = 100;
  std::size_t subsets = 5;  // balanced validation subsets per epoch
  std::uint64_t seed = 0;
  std::uint64_t repeat = 0;
  std::uint64_t grid_index = 0;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean weighted BCE over the epoch
  double val_auc = 0.0;
};

struct TrainResult {
  ModelParams best_params;
  double best_val_auc = 0.0;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  std::vector<EpochMetrics> history;
};

// N_neg / N_pos of the given patients.
double positive_class_weight(std::span<const PatientInput> patients);

/// Per-patient Adam steps over a seeded shuffle of `train` each epoch; after
/// every epoch the balanced validation AUC is computed and the best snapshot
/// (earliest on ties) is kept.
///
/// Random streams: init and shuffle/dropout are keyed by (seed, repeat,
/// grid_index); validation subsets by (seed, repeat) only, so every grid point
/// of a repeat is scored on the same subsets.
TrainResult train(Variant variant, std::span<const PatientInput> train,
                  std::span<const PatientInput> validation, const HyperParams& hyper,
                  const TrainOptions& options);

}  // namespace lesiongraph
