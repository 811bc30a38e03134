// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.hpp"
#include "lesiongraph/errors.hpp"
#include "lesiongraph/io.hpp"
#include "lesiongraph/metrics.hpp"
#include "lesiongraph/protocol.hpp"
#include "lesiongraph/training.hpp"
#include "oracles.hpp"

using namespace lesiongraph;

TEST_CASE("AUC equals pair counting on random sets with ties") {
  Rng rng = make_rng(31, "auc");
  std::uniform_int_distribution<int> level(0, 6);
  std::uniform_int_distribution<std::size_t> size(2, 60);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = size(rng);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = 0.25 * level(rng);
      y[i] = static_cast<int>(i % 2 == 0 || rng() % 3 == 0);
    }
    y[1] = 0;
    CHECK(roc_auc(s, y) == testing::oracle::pair_auc(s, y));
  }
}

TEST_CASE("AUC is invariant to monotone transforms and flips under negation") {
  Rng rng = make_rng(32, "auc-mono");
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> s(80), t(80), neg(80);
  std::vector<int> y(80);
  for (std::size_t i = 0; i < 80; ++i) {
    s[i] = n(rng);
    y[i] = n(rng) + s[i] > 0.0;
    t[i] = std::exp(3.0 * s[i]) + 1.0;
    neg[i] = -s[i];
  }
  CHECK(roc_auc(t, y) == roc_auc(s, y));
  CHECK(roc_auc(neg, y) == doctest::Approx(1.0 - roc_auc(s, y)).epsilon(1e-14));
  const std::vector<int> one_class(80, 1);
  CHECK_THROWS_AS(roc_auc(s, one_class), ProtocolError);
}

TEST_CASE("balanced subsets: all positives plus a disjoint share of the negatives") {
  std::vector<int> y(100, 0);
  for (std::size_t i = 0; i < 100; i += 5) y[i] = 1;
  Rng rng = make_rng(33, "subsets");
  const auto subsets = balanced_subsets(y, 5, rng);
  REQUIRE(subsets.size() == 5);
  std::set<std::size_t> negatives_seen;
  for (const auto& s : subsets) {
    for (std::size_t i : s)
      if (y[i] == 0) CHECK(negatives_seen.insert(i).second);
    std::size_t pos = 0;
    for (std::size_t i : s) pos += static_cast<std::size_t>(y[i]);
    CHECK(pos == 20);
    CHECK(s.size() == 36);
    CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == s.size());
  }
  std::vector<double> scores(100);
  for (std::size_t i = 0; i < 100; ++i) scores[i] = y[i] ? 1.0 : 0.0;
  CHECK(negatives_seen.size() == 80);
  CHECK(balanced_auc(scores, y, subsets) == 1.0);
}

TEST_CASE("Welch p-values match a numerically integrated t tail") {
  Rng rng = make_rng(34, "welch");
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> size(3, 15);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(size(rng)), b(size(rng));
    const double shift = 0.3 * trial / 4.0;
    for (double& v : a) v = n(rng);
    for (double& v : b) v = shift + 2.0 * n(rng);
    const WelchResult got = welch_ttest(a, b);
    const auto want = testing::oracle::welch_statistic(a, b);
    CHECK(got.t == doctest::Approx(want.t).epsilon(1e-12));
    CHECK(got.df == doctest::Approx(want.df).epsilon(1e-12));
    CHECK(std::abs(got.p_value - testing::oracle::t_two_sided(want.t, want.df)) < 1e-6);
  }
}

TEST_CASE("Welch on identical samples gives p = 1") {
  const std::vector<double> a{0.7, 0.72, 0.69, 0.71};
  CHECK(welch_ttest(a, a).p_value == 1.0);
  const std::vector<double> flat{0.5, 0.5, 0.5};
  CHECK_THROWS_AS(welch_ttest(flat, flat), ProtocolError);
  CHECK(sample_std(a) == doctest::Approx(std::sqrt(((0.7 - 0.705) * (0.7 - 0.705) +
                                                    0.015 * 0.015 + 0.015 * 0.015 +
                                                    0.005 * 0.005) / 3.0)));
}

TEST_CASE("splits: shared stratified test set, disjoint partitions, seeded") {
  std::vector<int> y(583, 0);
  for (std::size_t i = 0; i < 113; ++i) y[i * 5] = 1;
  const SplitPlan plan = make_splits(y, 42);
  REQUIRE(plan.repeats.size() == 10);
  CHECK(plan.test.size() == 58);
  std::size_t test_pos = 0;
  for (std::size_t i : plan.test) test_pos += static_cast<std::size_t>(y[i]);
  CHECK(test_pos == 11);
  std::set<std::vector<std::size_t>> distinct_val;
  for (const auto& r : plan.repeats) {
    std::vector<std::size_t> all = plan.test;
    all.insert(all.end(), r.train.begin(), r.train.end());
    all.insert(all.end(), r.validation.begin(), r.validation.end());
    std::sort(all.begin(), all.end());
    REQUIRE(all.size() == y.size());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
    std::size_t val_pos = 0;
    for (std::size_t i : r.validation) val_pos += static_cast<std::size_t>(y[i]);
    CHECK(r.validation.size() == 58);
    CHECK(val_pos == 11);
    distinct_val.insert(r.validation);
  }
  CHECK(distinct_val.size() == 10);
  const SplitPlan again = make_splits(y, 42);
  CHECK(again.test == plan.test);
  CHECK(again.repeats.back().train == plan.repeats.back().train);
  CHECK(make_splits(y, 43).test != plan.test);
  const std::vector<int> tiny{1, 0, 0, 1};
  CHECK_THROWS_AS(make_splits(tiny, 1), ProtocolError);
}

TEST_CASE("scalers and spreads see only training patients") {
  Cohort cohort = testing::toy_cohort(40, 3, 2, 35);
  std::vector<std::size_t> train(20);
  for (std::size_t i = 0; i < 20; ++i) train[i] = i;
  const PreparedRepeat a = prepare_repeat(cohort, train);
  std::vector<PatientRecord> patients(cohort.patients().begin(), cohort.patients().end());
  for (std::size_t i = 20; i < 40; ++i) {
    for (auto& v : patients[i].clinical) v *= 1e3;
    for (auto& l : patients[i].lesions) l.features[0] += 50.0;
  }
  const PreparedRepeat b = prepare_repeat(Cohort(patients), train);
  CHECK(a.clinical_scaler.median == b.clinical_scaler.median);
  CHECK(a.imaging_scaler.iqr == b.imaging_scaler.iqr);
  CHECK(a.stats.sigma_feature == b.stats.sigma_feature);
}

namespace {

struct Tiny {
  Cohort cohort = testing::toy_cohort(120, 4, 3, 36, 4);
  GridSpec grid{{1e-2, 1e-3}, {4}, {1.0}, {0.0}};
  ProtocolOptions options{7, 2, 3, 3, 1};
};

}  // namespace

TEST_CASE("training reduces the loss on a separable toy cohort") {
  Tiny t;
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < t.cohort.size(); ++i) (i % 4 == 0 ? val_idx : train_idx).push_back(i);
  const PreparedRepeat prep = prepare_repeat(t.cohort, train_idx);
  const auto inputs = make_inputs(prep.standardized, prep.stats);
  std::vector<PatientInput> train, val;
  for (std::size_t i : train_idx) train.push_back(inputs[i]);
  for (std::size_t i : val_idx) val.push_back(inputs[i]);
  TrainOptions opts;
  opts.epochs = 5;
  opts.seed = 3;
  for (Variant v : {Variant::kCrossAttention, Variant::kMlpClinical, Variant::kGraphConvImage}) {
    const TrainResult r = lesiongraph::train(v, train, val, {1e-2, 8, 1.0, 0.0}, opts);
    REQUIRE(r.history.size() == 5);
    CHECK(r.history.back().train_loss < r.history.front().train_loss);
    CHECK(r.best_epoch >= 1);
    CHECK(r.best_val_auc == r.history[r.best_epoch - 1].val_auc);
  }
  CHECK(positive_class_weight(train) ==
        doctest::Approx(static_cast<double>(train.size() - 30) / 30.0));
}

TEST_CASE("grid search selects on validation only") {
  Tiny t;
  const auto labels = t.cohort.labels();
  const SplitPlan plan = make_splits(labels, t.options.seed, t.options.repeats);
  const std::array variants{Variant::kMlpClinical, Variant::kMilImage};
  const EvalReport report = grid_search(variants, t.cohort, plan, t.grid, t.options);
  CHECK(report.selected.size() == 4);
  CHECK(report.all.size() == 8);

  std::vector<PatientRecord> patients(t.cohort.patients().begin(), t.cohort.patients().end());
  for (std::size_t i : plan.test) patients[i].label = 1 - patients[i].label;
  const Cohort flipped(patients);
  const EvalReport other = grid_search(variants, flipped, plan, t.grid, t.options);
  for (std::size_t k = 0; k < report.selected.size(); ++k) {
    CHECK(other.selected[k].grid_index == report.selected[k].grid_index);
    CHECK(other.selected[k].val_auc == report.selected[k].val_auc);
  }

  const auto dir = testing::scratch_dir("report");
  write_text_file(dir / "report.csv", report_csv(report.selected, "tag"));
  const EvalReport back = read_report_csv(dir / "report.csv");
  REQUIRE(back.selected.size() == report.selected.size());
  CHECK(back.selected[3].test_auc == report.selected[3].test_auc);
  const auto summary = summarize(report);
  REQUIRE(summary.size() == 2);
  CHECK(summary[0].repeats == 2);
}
