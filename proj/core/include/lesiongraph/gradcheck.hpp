// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lesiongraph/diff.hpp"
#include "lesiongraph/model.hpp"

namespace lesiongraph {

struct GradCheckDims {
  std::size_t lesions = 3;
  std::size_t features = 5;
  std::size_t clinical = 4;
  std::size_t hidden = 6;
};

struct GradCheckCase {
  std::string name;  // "layer:<kind>" or "model:<variant tag>"
  diff::GradCheckReport report;
};

// Random standardized-looking patient: symmetric edge weights in (0, 1] with a unit diagonal.
PatientInput random_patient(const GradCheckDims& dims, Rng& rng);

/// Finite-difference checks of every layer (on a random projection of its
/// output) and every model variant (on its weighted BCE loss), eval mode.
std::vector<GradCheckCase> run_gradient_checks(const GradCheckDims& dims, std::uint64_t seed,
                                               double h = 1e-5, double tol = 1e-4);

// "case,parameter,entries,rel_error,analytic,numeric,failing,failing_abs_diff,
// norm_rel_error,passed" rows; analytic / numeric are the worst entry's values.
std::string gradcheck_csv(const std::vector<GradCheckCase>& cases, const std::string& tag);

}  // namespace lesiongraph
