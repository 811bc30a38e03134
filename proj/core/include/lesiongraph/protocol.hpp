// SPDX-License-Identifier: Apache-2.0
//
// Evaluation protocol: a fixed stratified test set, repeated stratified
// train/validation reshuffles, balanced k-subset scoring, grid search with
// validation-only model selection, and Welch comparisons across variants.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lesiongraph/cohort.hpp"
#include "lesiongraph/training.hpp"

namespace lesiongraph {

struct SplitPlan {
  struct Repeat {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
  };
  std::uint64_t seed = 0;
  std::vector<std::size_t> test;  // shared by every repeat
  std::vector<Repeat> repeats;
};

// Stratified 80/10/10 with one fixed test set and `repeats` train/validation reshuffles.
SplitPlan make_splits(std::span<const int> labels, std::uint64_t seed, std::size_t repeats = 10);

struct GridPoint {
  double lr = 1e-3;
  std::size_t hidden = 32;
  double gamma = 1.0;
  double dropout = 0.2;

  HyperParams hyper() const { return {lr, hidden, gamma, dropout}; }
};

struct GridSpec {
  std::vector<double> lr{1e-2, 1e-3, 1e-4};
  std::vector<std::size_t> hidden{16, 32, 64};
  std::vector<double> gamma{0.1, 1.0, 10.0};
  std::vector<double> dropout{0.0, 0.2};

  // Cartesian product in (lr, hidden, gamma, dropout) order. Variants that
  // ignore edge weights only use the first gamma.
  std::vector<GridPoint> points(Variant v) const;
  std::string describe() const;
};

struct ProtocolOptions {
  std::uint64_t seed = 42;
  std::size_t repeats = 10;
  std::size_t epochs = 100;
  std::size_t subsets = 5;
  std::size_t workers = 1;
};

struct GridResult {
  Variant variant = Variant::kCrossAttention;
  std::size_t repeat = 0;
  std::size_t grid_index = 0;
  GridPoint point;
  double val_auc = 0.0;
  double test_auc = 0.0;
  std::size_t best_epoch = 0;
};

/// Selected configuration per (variant, repeat), plus every grid evaluation.
struct EvalReport {
  std::vector<GridResult> selected;  // one row per variant x repeat
  std::vector<GridResult> all;

  std::vector<double> test_aucs(Variant v) const;
};

/// Standardization, population stats and model inputs of one repeat. Scalers
/// and distance spreads are fitted on the repeat's training patients only.
struct PreparedRepeat {
  RobustScaler clinical_scaler;
  RobustScaler imaging_scaler;
  PopulationStats stats;
  Cohort standardized;
};

PreparedRepeat prepare_repeat(const Cohort& cohort, std::span<const std::size_t> train);

EvalReport grid_search(std::span<const Variant> variants, const Cohort& cohort,
                       const SplitPlan& plan, const GridSpec& grid,
                       const ProtocolOptions& options);

struct SummaryRow {
  std::string variant;
  std::size_t repeats = 0;
  double mean_test_auc = 0.0;
  double std_test_auc = 0.0;
  double mean_val_auc = 0.0;
  std::optional<double> p_value;  // Welch vs cross-attention test AUCs
};

std::vector<SummaryRow> summarize(const EvalReport& report);

// "variant,repeat,lr,hidden,gamma,dropout,val_auc,test_auc"
std::string report_csv(std::span<const GridResult> rows, const std::string& tag);
EvalReport read_report_csv(const std::filesystem::path& path);
std::string summary_csv(std::span<const SummaryRow> rows, const std::string& tag);

}  // namespace lesiongraph
