// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <string>

#include "helpers.hpp"
#include "lesiongraph/model.hpp"
#include "lesiongraph/variants.hpp"

namespace testing {

// Random patient with a symmetric positive edge matrix and unit diagonal.
inline lesiongraph::PatientInput random_input(std::size_t lesions, std::size_t features,
                                              std::size_t clinical, lesiongraph::Rng& rng) {
  using lesiongraph::Matrix;
  lesiongraph::PatientInput x;
  x.patient_id = "R";
  x.features = random_matrix(lesions, features, rng);
  x.clinical = random_matrix(clinical, 1, rng);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  x.edge_weights = Matrix(lesions, lesions, 1.0);
  for (std::size_t i = 0; i < lesions; ++i)
    for (std::size_t j = i + 1; j < lesions; ++j) x.edge_weights(i, j) = x.edge_weights(j, i) = u(rng);
  x.image_mean = Matrix(1, features);
  for (std::size_t r = 0; r < lesions; ++r)
    for (std::size_t c = 0; c < features; ++c)
      x.image_mean[c] += x.features(r, c) / static_cast<double>(lesions);
  return x;
}

// Initialized parameters plus noise, so outputs leave the near-0.5 regime.
inline lesiongraph::ModelParams jittered_params(lesiongraph::Variant v, std::size_t features,
                                                std::size_t clinical, std::size_t hidden,
                                                lesiongraph::Rng& rng, double sd = 0.4) {
  auto params = lesiongraph::init_params(v, {features, clinical}, hidden, rng);
  std::normal_distribution<double> n(0.0, sd);
  for (auto& [name, m] : params)
    for (auto& value : m.data()) value += n(rng);
  return params;
}

}  // namespace testing
