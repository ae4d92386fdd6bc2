#pragma once

#include <cstdint>

#include "cfld/model.hpp"

namespace cfld {

inline constexpr std::uint64_t kDefaultEnumerationCap = 20'000'000;

struct OracleResult {
  Solution solution;
  double profit = 0.0;
  std::uint64_t evaluated = 0;
};

/// (|R| + 1)^|J|, saturating at UINT64_MAX.
std::uint64_t configuration_count(std::size_t num_candidates, std::size_t num_levels);

/// Exhaustive maximizer of profit over every closed/open-at-level choice.
///
/// Configurations are visited in mixed-radix order with one digit per
/// facility (0 = closed, r = open at level r-1). Ties go to the
/// lexicographically smallest y. Throws EnumerationCapExceeded.
OracleResult enumerate_optimal(const Instance& instance, const DerivedCoefficients& coeffs,
                               std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace cfld
