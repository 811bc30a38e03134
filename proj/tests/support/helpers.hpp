// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "lesiongraph/cohort.hpp"
#include "lesiongraph/matrix.hpp"
#include "lesiongraph/rng.hpp"

namespace testing {

inline lesiongraph::Matrix random_matrix(std::size_t rows, std::size_t cols,
                                         lesiongraph::Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> gauss(0.0, sd);
  lesiongraph::Matrix m(rows, cols);
  for (double& v : m.data()) v = gauss(rng);
  return m;
}

// Values at least 0.1 away from zero, for ops with a kink there.
inline lesiongraph::Matrix off_kink(std::size_t rows, std::size_t cols, lesiongraph::Rng& rng) {
  lesiongraph::Matrix m = random_matrix(rows, cols, rng);
  for (double& v : m.data()) v = v < 0.0 ? v - 0.1 : v + 0.1;
  return m;
}

// Fresh directory under the system temp dir, emptied if it exists.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("lesiongraph-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Small cohort with varied lesion counts; both labels present.
inline lesiongraph::Cohort toy_cohort(std::size_t n, std::size_t features, std::size_t clinical,
                                      std::uint64_t seed, std::size_t max_lesions = 5) {
  lesiongraph::Rng rng = lesiongraph::make_rng(seed, "toy-cohort");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> pos(0.0, 100.0);
  std::vector<lesiongraph::PatientRecord> ps;
  for (std::size_t i = 0; i < n; ++i) {
    lesiongraph::PatientRecord p;
    p.id = "T" + std::to_string(i);
    p.label = i % 3 == 0 ? 1 : 0;
    for (std::size_t c = 0; c < clinical; ++c) p.clinical.push_back(gauss(rng) + p.label);
    const std::size_t count = 1 + (i * 7) % max_lesions;
    for (std::size_t l = 0; l < count; ++l) {
      lesiongraph::Lesion les;
      les.id = "L" + std::to_string(l);
      for (double& x : les.centroid) x = pos(rng);
      for (std::size_t f = 0; f < features; ++f) les.features.push_back(gauss(rng) + 0.5 * p.label);
      p.lesions.push_back(std::move(les));
    }
    ps.push_back(std::move(p));
  }
  return lesiongraph::Cohort(std::move(ps));
}

}  // namespace testing
