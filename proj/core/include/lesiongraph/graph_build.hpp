// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "lesiongraph/cohort.hpp"
#include "lesiongraph/matrix.hpp"

namespace lesiongraph {

/// Population-level spreads used by the edge-weight kernel.
///
/// sigma_centroid and sigma_feature are population standard deviations of
/// intra-patient pairwise L2 distances (i < j) over the training patients.
/// A zero spread is kept as reported; the kernel substitutes 1 for it.
struct PopulationStats {
  double sigma_centroid = 1.0;
  double sigma_feature = 1.0;
  double gamma = 1.0;
  std::size_t pair_count = 0;

  double effective_sigma_centroid() const { return sigma_centroid > 0.0 ? sigma_centroid : 1.0; }
  double effective_sigma_feature() const { return sigma_feature > 0.0 ? sigma_feature : 1.0; }
  PopulationStats with_gamma(double g) const {
    PopulationStats s = *this;
    s.gamma = g;
    return s;
  }
};

/// Fully connected lesion graph of one patient, self-loops included.
struct LesionGraph {
  std::string patient_id;
  Matrix node_features;  // L x D_features
  Matrix edge_weights;   // L x L, symmetric, unit diagonal

  std::size_t size() const { return node_features.rows(); }
};

// Throws DegeneratePopulationError when no training patient has two lesions.
PopulationStats population_stats(std::span<const PatientRecord> training, double gamma = 1.0);

// w_ij = exp(-|p_i - p_j| / (gamma s1^2)) * exp(-|z_i - z_j| / (gamma s2^2)),
// with unsquared L2 distances.
LesionGraph build_graph(const PatientRecord& patient, const PopulationStats& stats);

// Inspection dump: "patient_id,i,j,w" rows for every ordered pair.
void write_graph_csv(std::span<const LesionGraph> graphs, const std::filesystem::path& path,
                     const std::string& comment = {});

}  // namespace lesiongraph
