// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>

#include "lesiongraph/variants.hpp"

namespace lesiongraph {

/// Eval-mode attention maps of every patient as
/// "patient_id,block,kind,row,col,attention" rows. kind is "gat" (row and col
/// are lesion indices) or "cross" (row is a lesion, col a clinical entry).
/// Variants without attention layers produce a header only.
std::string attention_csv(Variant v, const ModelParams& params,
                          std::span<const PatientInput> patients, const std::string& tag);

}  // namespace lesiongraph
