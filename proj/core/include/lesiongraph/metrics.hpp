// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lesiongraph/rng.hpp"

namespace lesiongraph {

// Mann-Whitney ROC AUC: fraction of (positive, negative) pairs where the
// positive scores higher, ties counted 1/2. Throws ProtocolError if a class is absent.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// k subsets of positions into `labels`, each holding every positive and one
// part of a random k-way partition of the negatives (sizes differ by at most 1).
std::vector<std::vector<std::size_t>> balanced_subsets(std::span<const int> labels, std::size_t k,
                                                       Rng& rng);

// Mean roc_auc over the given subsets.
double balanced_auc(std::span<const double> scores, std::span<const int> labels,
                    const std::vector<std::vector<std::size_t>>& subsets);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;  // two-sided
};

// Welch's unequal-variance t-test; throws ProtocolError when either sample has
// fewer than two values or both have zero variance.
WelchResult welch_ttest(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> xs);
double sample_std(std::span<const double> xs);  // n - 1 denominator

}  // namespace lesiongraph
