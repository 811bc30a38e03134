// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lesiongraph/cohort.hpp"

namespace lesiongraph {

/// Synthetic cohort with a planted signal in both modalities.
///
/// Each patient gets a Gaussian clinical vector c and an aggressiveness
/// latent u; every lesion draws its own latent a = u + jitter, and the first
/// `informative_features` lesion features are noisy copies of a. The label is
///
///   1[ clinical * z(mean(c)) + imaging * z(max a)
///      + interaction * z(max c) * relu(z(max a)) + noise * logistic  >  tau ]
///
/// with z() standardizing over the generated cohort and tau searched so the
/// positive count matches positive_ratio. Only patients with an above-average
/// worst lesion carry interaction signal, and its sign follows the clinical
/// vector.
struct SynthConfig {
  std::size_t n_patients = 583;
  double positive_ratio = 0.194;
  std::size_t min_lesions = 1;
  std::size_t max_lesions = 20;
  std::size_t feature_dim = 40;
  std::size_t clinical_dim = 8;
  std::size_t informative_features = 8;
  double clinical_strength = 1.0;
  double imaging_strength = 0.0;
  double interaction_strength = 2.0;
  double noise = 0.5;
  double lesion_jitter = 0.7;    // sd of a - u
  double feature_noise = 0.5;    // sd of informative feature - a
  double cube_mm = 400.0;        // centroids uniform in [0, cube_mm]^3
  std::uint64_t seed = 42;

  void validate() const;  // throws ContractError
  std::string to_json() const;
  static SynthConfig from_json(const std::string& text);
  static SynthConfig load(const std::filesystem::path& path);
};

/// Noise-free signal components per patient, for oracle checks.
struct SynthTruth {
  std::vector<double> clinical_score;
  std::vector<double> imaging_score;
  std::vector<double> gate;
  std::vector<double> logit;  // without the logistic noise
  double threshold = 0.0;
};

struct SynthResult {
  Cohort cohort;
  SynthTruth truth;
};

SynthResult generate_with_truth(const SynthConfig& config);
Cohort generate(const SynthConfig& config);

}  // namespace lesiongraph
