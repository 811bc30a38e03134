// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace lesiongraph {

using Rng = std::mt19937_64;

// Seed for a named sub-stream of a run, e.g. derive_seed(seed, "init", {repeat, grid}).
// Every random draw in the library comes from a stream derived this way.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream,
                          std::initializer_list<std::uint64_t> keys = {});

inline Rng make_rng(std::uint64_t base, std::string_view stream,
                    std::initializer_list<std::uint64_t> keys = {}) {
  return Rng(derive_seed(base, stream, keys));
}

// FNV-1a over bytes; stable across platforms, used for config fingerprints.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace lesiongraph
