// SPDX-License-Identifier: Apache-2.0
#include "lesiongraph/graph_build.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cmath>

#include "lesiongraph/errors.hpp"
#include "lesiongraph/io.hpp"

namespace lesiongraph {

namespace {

double centroid_distance(const Lesion& a, const Lesion& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double d = a.centroid[k] - b.centroid[k];
    s += d * d;
  }
  return std::sqrt(s);
}

double feature_distance(const Lesion& a, const Lesion& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.features.size(); ++k) {
    const double d = a.features[k] - b.features[k];
    s += d * d;
  }
  return std::sqrt(s);
}

double population_std(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

}  // namespace

PopulationStats population_stats(std::span<const PatientRecord> training, double gamma) {
  if (!(gamma > 0.0)) throw ContractError("population_stats: gamma must be positive");
  std::vector<double> centroid_d;
  std::vector<double> feature_d;
  for (const auto& p : training) {
    const auto& ls = p.lesions;
    for (std::size_t i = 0; i < ls.size(); ++i) {
      for (std::size_t j = i + 1; j < ls.size(); ++j) {
        centroid_d.push_back(centroid_distance(ls[i], ls[j]));
        feature_d.push_back(feature_distance(ls[i], ls[j]));
      }
    }
  }
  if (centroid_d.empty()) {
    throw DegeneratePopulationError(
        "population_stats: no training patient has two or more lesions");
  }
  PopulationStats stats;
  stats.gamma = gamma;
  stats.pair_count = centroid_d.size();
  stats.sigma_centroid = population_std(centroid_d);
  stats.sigma_feature = population_std(feature_d);
  if (stats.sigma_centroid == 0.0 || stats.sigma_feature == 0.0) {
    spdlog::warn("degenerate lesion-distance spread (centroid {}, feature {}); using 1 instead",
                 stats.sigma_centroid, stats.sigma_feature);
  }
  return stats;
}

LesionGraph build_graph(const PatientRecord& patient, const PopulationStats& stats) {
  if (!(stats.gamma > 0.0)) throw ContractError("build_graph: gamma must be positive");
  const std::size_t n = patient.lesions.size();
  if (n == 0) throw ContractError("build_graph: patient '" + patient.id + "' has no lesions");
  const std::size_t dim = patient.lesions.front().features.size();

  LesionGraph g;
  g.patient_id = patient.id;
  g.node_features = Matrix(n, dim);
  g.edge_weights = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = patient.lesions[i].features;
    if (f.size() != dim) throw DimensionError("build_graph: ragged lesion features");
    std::copy(f.begin(), f.end(), g.node_features.row_span(i).begin());
  }

  const double s1 = stats.effective_sigma_centroid();
  const double s2 = stats.effective_sigma_feature();
  const double scale_p = stats.gamma * s1 * s1;
  const double scale_z = stats.gamma * s2 * s2;
  for (std::size_t i = 0; i < n; ++i) {
    g.edge_weights(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dp = centroid_distance(patient.lesions[i], patient.lesions[j]);
      const double dz = feature_distance(patient.lesions[i], patient.lesions[j]);
      const double w = std::exp(-dp / scale_p) * std::exp(-dz / scale_z);
      if (!std::isfinite(w)) {
        throw NumericError(fmt::format("build_graph: non-finite weight for patient '{}' ({}, {})",
                                       patient.id, i, j));
      }
      g.edge_weights(i, j) = w;
      g.edge_weights(j, i) = w;
    }
  }
  return g;
}

void write_graph_csv(std::span<const LesionGraph> graphs, const std::filesystem::path& path,
                     const std::string& comment) {
  fmt::memory_buffer out;
  if (!comment.empty()) fmt::format_to(std::back_inserter(out), "# {}\n", comment);
  fmt::format_to(std::back_inserter(out), "patient_id,i,j,w\n");
  for (const auto& g : graphs) {
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < g.size(); ++j)
        fmt::format_to(std::back_inserter(out), "{},{},{},{}\n", g.patient_id, i, j,
                       g.edge_weights(i, j));
  }
  write_text_file(path, std::string_view(out.data(), out.size()));
}

}  // namespace lesiongraph
