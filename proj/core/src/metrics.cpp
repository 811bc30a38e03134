// SPDX-License-Identifier: Apache-2.0
#include "lesiongraph/metrics.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lesiongraph/errors.hpp"

namespace lesiongraph {

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("roc_auc: scores/labels length differ");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the Mann-Whitney count stays integral with ties.
  std::uint64_t twice_count = 0;
  std::uint64_t negatives_below = 0;
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? pos : neg) += 1;
      ++j;
    }
    twice_count += 2 * pos * negatives_below + pos * neg;
    negatives_below += neg;
    positives += pos;
    negatives += neg;
    i = j;
  }
  if (positives == 0 || negatives == 0) {
    throw ProtocolError("roc_auc: undefined without both classes");
  }
  return static_cast<double>(twice_count) / (2.0 * static_cast<double>(positives * negatives));
}

std::vector<std::vector<std::size_t>> balanced_subsets(std::span<const int> labels, std::size_t k,
                                                       Rng& rng) {
  if (k == 0) throw ContractError("balanced_subsets: k must be positive");
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
  if (pos.empty()) throw ProtocolError("balanced_subsets: evaluation set has no positives");
  if (neg.size() < k) {
    throw ProtocolError("balanced_subsets: " + std::to_string(neg.size()) +
                        " negatives cannot fill " + std::to_string(k) + " subsets");
  }
  std::shuffle(neg.begin(), neg.end(), rng);
  std::vector<std::vector<std::size_t>> subsets(k);
  const std::size_t base = neg.size() / k;
  const std::size_t extra = neg.size() % k;
  std::size_t cursor = 0;
  for (std::size_t s = 0; s < k; ++s) {
    const std::size_t take = base + (s < extra ? 1 : 0);
    auto& subset = subsets[s];
    subset = pos;
    subset.insert(subset.end(), neg.begin() + static_cast<std::ptrdiff_t>(cursor),
                  neg.begin() + static_cast<std::ptrdiff_t>(cursor + take));
    std::sort(subset.begin(), subset.end());
    cursor += take;
  }
  return subsets;
}

double balanced_auc(std::span<const double> scores, std::span<const int> labels,
                    const std::vector<std::vector<std::size_t>>& subsets) {
  if (subsets.empty()) throw ContractError("balanced_auc: no subsets");
  std::vector<double> s;
  std::vector<int> l;
  double total = 0.0;
  for (const auto& subset : subsets) {
    s.clear();
    l.clear();
    for (auto i : subset) {
      s.push_back(scores[i]);
      l.push_back(labels[i]);
    }
    total += roc_auc(s, l);
  }
  return total / static_cast<double>(subsets.size());
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

namespace {

double sample_var(std::span<const double> xs) {
  const double s = sample_std(xs);
  return s * s;
}

}  // namespace

WelchResult welch_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw ProtocolError("welch_ttest: each sample needs at least two values");
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = sample_var(a) / na;
  const double vb = sample_var(b) / nb;
  if (va == 0.0 && vb == 0.0) throw ProtocolError("welch_ttest: both samples have zero variance");

  WelchResult r;
  r.t = (mean(a) - mean(b)) / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  // P(|T| >= |t|) = I_{df / (df + t^2)}(df / 2, 1 / 2)
  const double x = r.df / (r.df + r.t * r.t);
  r.p_value = x >= 1.0 ? 1.0 : boost::math::ibeta(r.df / 2.0, 0.5, x);
  return r;
}

}  // namespace lesiongraph
