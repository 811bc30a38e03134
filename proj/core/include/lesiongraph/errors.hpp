// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace lesiongraph {

// Operand shapes do not conform for an operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A forward value became NaN or infinite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller violated a precondition (e.g. backward from a non-scalar root).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Input files do not match the expected CSV layout.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input files parse but cannot be joined into a consistent cohort.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Split or resampling request cannot be satisfied by the cohort.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No patient in the training population contributes a lesion pair.
class DegeneratePopulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Synthetic cohort could not be calibrated to the requested label balance.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lesiongraph
