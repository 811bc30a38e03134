// SPDX-License-Identifier: Apache-2.0
#include "lesiongraph/cohort.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "lesiongraph/errors.hpp"
#include "lesiongraph/io.hpp"

namespace lesiongraph {

Cohort::Cohort(std::vector<PatientRecord> patients) : patients_(std::move(patients)) {
  std::set<std::string, std::less<>> ids;
  for (const auto& p : patients_) {
    if (!ids.insert(p.id).second) throw IngestionError("duplicate patient id '" + p.id + "'");
    if (p.label != 0 && p.label != 1) {
      throw IngestionError(fmt::format("patient '{}': label {} is not 0/1", p.id, p.label));
    }
    if (p.lesions.empty()) throw IngestionError("patient '" + p.id + "' has no lesions");
  }
  if (patients_.empty()) return;
  clinical_dim_ = patients_.front().clinical.size();
  feature_dim_ = patients_.front().lesions.front().features.size();
  for (const auto& p : patients_) {
    if (p.clinical.size() != clinical_dim_) {
      throw SchemaError(fmt::format("patient '{}': {} clinical values, expected {}", p.id,
                                    p.clinical.size(), clinical_dim_));
    }
    for (const auto& l : p.lesions) {
      if (l.features.size() != feature_dim_) {
        throw SchemaError(fmt::format("patient '{}' lesion '{}': {} features, expected {}", p.id,
                                      l.id, l.features.size(), feature_dim_));
      }
    }
    positives_ += static_cast<std::size_t>(p.label);
  }
}

double Cohort::positive_ratio() const {
  return patients_.empty() ? 0.0
                           : static_cast<double>(positives_) / static_cast<double>(size());
}

std::vector<int> Cohort::labels() const {
  std::vector<int> out;
  out.reserve(size());
  for (const auto& p : patients_) out.push_back(p.label);
  return out;
}

std::vector<std::size_t> Cohort::lesion_counts() const {
  std::vector<std::size_t> out;
  out.reserve(size());
  for (const auto& p : patients_) out.push_back(p.lesion_count());
  return out;
}

Cohort Cohort::subset(std::span<const std::size_t> indices) const {
  std::vector<PatientRecord> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(patients_.at(i));
  return Cohort(std::move(out));
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ContractError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<double> RobustScaler::apply(std::span<const double> values) const {
  if (!fitted) throw ContractError("scaler used before fit");
  if (values.size() != median.size()) {
    throw SchemaError(fmt::format("scaler fitted on {} columns, got {}", median.size(),
                                  values.size()));
  }
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = iqr[i] > 0.0 ? (values[i] - median[i]) / iqr[i] : 0.0;
  }
  return out;
}

RobustScaler fit_scaler(std::span<const PatientRecord> training, FeatureKind kind) {
  if (training.empty()) throw ContractError("fit_scaler: empty training set");
  const std::size_t dim = kind == FeatureKind::kClinical
                              ? training.front().clinical.size()
                              : training.front().lesions.front().features.size();
  std::vector<std::vector<double>> columns(dim);
  for (const auto& p : training) {
    if (kind == FeatureKind::kClinical) {
      for (std::size_t c = 0; c < dim; ++c) columns[c].push_back(p.clinical.at(c));
    } else {
      for (const auto& l : p.lesions)
        for (std::size_t c = 0; c < dim; ++c) columns[c].push_back(l.features.at(c));
    }
  }
  RobustScaler scaler;
  scaler.kind = kind;
  scaler.median.resize(dim);
  scaler.iqr.resize(dim);
  for (std::size_t c = 0; c < dim; ++c) {
    scaler.median[c] = quantile(columns[c], 0.5);
    scaler.iqr[c] = quantile(columns[c], 0.75) - quantile(columns[c], 0.25);
  }
  scaler.fitted = true;
  return scaler;
}

Cohort transform(const RobustScaler& scaler, const Cohort& cohort) {
  std::vector<PatientRecord> out(cohort.patients().begin(), cohort.patients().end());
  for (auto& p : out) {
    if (scaler.kind == FeatureKind::kClinical) {
      p.clinical = scaler.apply(p.clinical);
    } else {
      for (auto& l : p.lesions) l.features = scaler.apply(l.features);
    }
  }
  return Cohort(std::move(out));
}

PatientRecord scale_centroids(const PatientRecord& patient) {
  if (patient.lesions.empty()) throw ContractError("scale_centroids: patient has no lesions");
  PatientRecord out = patient;
  const double n = static_cast<double>(patient.lesions.size());
  for (std::size_t axis = 0; axis < 3; ++axis) {
    std::vector<double> coords;
    coords.reserve(patient.lesions.size());
    double total = 0.0;
    for (const auto& l : patient.lesions) {
      coords.push_back(l.centroid[axis]);
      total += l.centroid[axis];
    }
    const double mean = total / n;
    const double spread = quantile(coords, 0.75) - quantile(coords, 0.25);
    for (auto& l : out.lesions) {
      l.centroid[axis] = spread > 0.0 ? (l.centroid[axis] - mean) / spread : 0.0;
    }
  }
  return out;
}

Cohort standardize(const Cohort& cohort, const RobustScaler& clinical,
                   const RobustScaler& imaging) {
  std::vector<PatientRecord> out;
  out.reserve(cohort.size());
  for (const auto& p : cohort.patients()) {
    PatientRecord s = scale_centroids(p);
    s.clinical = clinical.apply(s.clinical);
    for (auto& l : s.lesions) l.features = imaging.apply(l.features);
    out.push_back(std::move(s));
  }
  return Cohort(std::move(out));
}

namespace {

void expect_header(const CsvTable& table, const std::vector<std::string>& fixed,
                   char series, const std::string& file) {
  if (table.header.size() < fixed.size()) {
    throw SchemaError(file + ": header too short");
  }
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    if (table.header[i] != fixed[i]) {
      throw SchemaError(fmt::format("{}: column {} must be '{}', found '{}'", file, i, fixed[i],
                                    table.header[i]));
    }
  }
  for (std::size_t i = fixed.size(); i < table.header.size(); ++i) {
    const std::string want = fmt::format("{}{}", series, i - fixed.size());
    if (table.header[i] != want) {
      throw SchemaError(fmt::format("{}: column {} must be '{}', found '{}'", file, i, want,
                                    table.header[i]));
    }
  }
}

}  // namespace

Cohort load_cohort(const std::filesystem::path& clinical_csv,
                   const std::filesystem::path& lesion_csv) {
  const CsvTable clin = read_csv(clinical_csv);
  const CsvTable les = read_csv(lesion_csv);
  const std::string clin_name = clinical_csv.string();
  const std::string les_name = lesion_csv.string();
  expect_header(clin, {"patient_id", "label"}, 'c', clin_name);
  expect_header(les, {"patient_id", "lesion_id", "px", "py", "pz"}, 'f', les_name);

  std::vector<PatientRecord> patients;
  std::map<std::string, std::size_t, std::less<>> by_id;
  for (std::size_t r = 0; r < clin.rows.size(); ++r) {
    const auto& row = clin.rows[r];
    const std::string where = fmt::format("{}:{}", clin_name, clin.line_numbers[r]);
    PatientRecord p;
    p.id = row[0];
    if (p.id.empty()) throw SchemaError(where + ": empty patient_id");
    const long long label = parse_int(row[1], where);
    if (label != 0 && label != 1) throw SchemaError(where + ": label must be 0 or 1");
    p.label = static_cast<int>(label);
    for (std::size_t c = 2; c < row.size(); ++c) p.clinical.push_back(parse_double(row[c], where));
    if (!by_id.emplace(p.id, patients.size()).second) {
      throw IngestionError(where + ": duplicate patient_id '" + p.id + "'");
    }
    patients.push_back(std::move(p));
  }

  if (les.rows.empty()) throw IngestionError(les_name + ": no lesion rows");
  std::set<std::string> orphans;
  for (std::size_t r = 0; r < les.rows.size(); ++r) {
    const auto& row = les.rows[r];
    const std::string where = fmt::format("{}:{}", les_name, les.line_numbers[r]);
    auto it = by_id.find(row[0]);
    if (it == by_id.end()) {
      orphans.insert(row[0]);
      continue;
    }
    Lesion l;
    l.id = row[1];
    for (std::size_t a = 0; a < 3; ++a) l.centroid[a] = parse_double(row[2 + a], where);
    for (std::size_t c = 5; c < row.size(); ++c) l.features.push_back(parse_double(row[c], where));
    patients[it->second].lesions.push_back(std::move(l));
  }
  if (!orphans.empty()) {
    throw IngestionError(fmt::format("{}: lesions reference unknown patient_id(s): {}", les_name,
                                     fmt::join(orphans, ", ")));
  }
  std::vector<std::string> lesionless;
  for (const auto& p : patients)
    if (p.lesions.empty()) lesionless.push_back(p.id);
  if (!lesionless.empty()) {
    throw IngestionError(fmt::format("patients without lesions: {}", fmt::join(lesionless, ", ")));
  }

  Cohort cohort(std::move(patients));
  if (cohort.positives() == 0 || cohort.positives() == cohort.size()) {
    throw IngestionError("cohort must contain both positive and negative patients");
  }
  return cohort;
}

void write_cohort(const Cohort& cohort, const std::filesystem::path& clinical_csv,
                  const std::filesystem::path& lesion_csv, const std::string& comment) {
  fmt::memory_buffer clin;
  fmt::memory_buffer les;
  if (!comment.empty()) {
    fmt::format_to(std::back_inserter(clin), "# {}\n", comment);
    fmt::format_to(std::back_inserter(les), "# {}\n", comment);
  }
  fmt::format_to(std::back_inserter(clin), "patient_id,label");
  for (std::size_t c = 0; c < cohort.clinical_dim(); ++c)
    fmt::format_to(std::back_inserter(clin), ",c{}", c);
  clin.push_back('\n');
  fmt::format_to(std::back_inserter(les), "patient_id,lesion_id,px,py,pz");
  for (std::size_t c = 0; c < cohort.feature_dim(); ++c)
    fmt::format_to(std::back_inserter(les), ",f{}", c);
  les.push_back('\n');

  for (const auto& p : cohort.patients()) {
    fmt::format_to(std::back_inserter(clin), "{},{}", p.id, p.label);
    for (double v : p.clinical) fmt::format_to(std::back_inserter(clin), ",{}", v);
    clin.push_back('\n');
    for (const auto& l : p.lesions) {
      fmt::format_to(std::back_inserter(les), "{},{},{},{},{}", p.id, l.id, l.centroid[0],
                     l.centroid[1], l.centroid[2]);
      for (double v : l.features) fmt::format_to(std::back_inserter(les), ",{}", v);
      les.push_back('\n');
    }
  }
  write_text_file(clinical_csv, std::string_view(clin.data(), clin.size()));
  write_text_file(lesion_csv, std::string_view(les.data(), les.size()));
}

}  // namespace lesiongraph
