// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "lesiongraph/cohort.hpp"
#include "lesiongraph/graph_build.hpp"
#include "lesiongraph/training.hpp"

namespace lesiongraph {

/// A trained model plus everything needed to score new patients with it:
/// the training-set scalers and distance spreads, and the run identity.
struct Checkpoint {
  Variant variant = Variant::kCrossAttention;
  HyperParams hyper;
  std::uint64_t seed = 0;
  std::string config;  // the run's config string, hashed into artifact tags
  RobustScaler clinical_scaler;
  RobustScaler imaging_scaler;
  PopulationStats stats;
  ModelParams params;
};

std::string checkpoint_json(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& text);  // throws SchemaError

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lesiongraph
