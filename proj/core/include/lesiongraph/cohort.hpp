// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lesiongraph {

struct Lesion {
  std::string id;
  std::array<double, 3> centroid{};  // mm
  std::vector<double> features;
};

struct PatientRecord {
  std::string id;
  int label = 0;  // 1 = progression, relapse or death within two years
  std::vector<double> clinical;
  std::vector<Lesion> lesions;

  std::size_t lesion_count() const { return lesions.size(); }
};

/// Immutable set of patients sharing clinical and lesion feature dimensions.
///
/// Construction checks that ids are unique, every patient has at least one
/// lesion, labels are binary and all vectors agree in length.
class Cohort {
 public:
  Cohort() = default;
  explicit Cohort(std::vector<PatientRecord> patients);

  std::span<const PatientRecord> patients() const { return patients_; }
  const PatientRecord& operator[](std::size_t i) const { return patients_[i]; }
  std::size_t size() const { return patients_.size(); }
  bool empty() const { return patients_.empty(); }

  std::size_t clinical_dim() const { return clinical_dim_; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t positives() const { return positives_; }
  double positive_ratio() const;
  std::vector<int> labels() const;
  std::vector<std::size_t> lesion_counts() const;

  Cohort subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<PatientRecord> patients_;
  std::size_t clinical_dim_ = 0;
  std::size_t feature_dim_ = 0;
  std::size_t positives_ = 0;
};

enum class FeatureKind { kClinical, kImaging };

/// Per-column median / interquartile-range statistics of a training set.
struct RobustScaler {
  FeatureKind kind = FeatureKind::kClinical;
  std::vector<double> median;
  std::vector<double> iqr;
  bool fitted = false;

  // (v - median) / iqr per column; columns with zero IQR map to 0.
  std::vector<double> apply(std::span<const double> values) const;
};

// Linear-interpolation (type 7) quantile of an unsorted sample, q in [0, 1].
double quantile(std::vector<double> values, double q);

// Imaging statistics pool every lesion of every training patient.
RobustScaler fit_scaler(std::span<const PatientRecord> training, FeatureKind kind);
Cohort transform(const RobustScaler& scaler, const Cohort& cohort);

// Centroids relative to the patient's own lesions: (p - mean) / IQR per axis.
PatientRecord scale_centroids(const PatientRecord& patient);

/// Both scalers plus per-patient centroid scaling, as applied before graph
/// construction. Scalers must have been fitted on training patients only.
Cohort standardize(const Cohort& cohort, const RobustScaler& clinical,
                   const RobustScaler& imaging);

Cohort load_cohort(const std::filesystem::path& clinical_csv,
                   const std::filesystem::path& lesion_csv);

// `comment` becomes a leading "# ..." line when non-empty.
void write_cohort(const Cohort& cohort, const std::filesystem::path& clinical_csv,
                  const std::filesystem::path& lesion_csv, const std::string& comment = {});

}  // namespace lesiongraph
