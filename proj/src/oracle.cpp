#include "cfld/oracle.hpp"

#include <limits>

namespace cfld {

std::uint64_t configuration_count(std::size_t num_candidates, std::size_t num_levels) {
  const std::uint64_t radix = num_levels + 1;
  std::uint64_t n = 1;
  for (std::size_t j = 0; j < num_candidates; ++j) {
    if (n > std::numeric_limits<std::uint64_t>::max() / radix) return std::numeric_limits<std::uint64_t>::max();
    n *= radix;
  }
  return n;
}

OracleResult enumerate_optimal(const Instance& instance, const DerivedCoefficients& coeffs, std::uint64_t cap) {
  const auto nj = instance.num_candidates(), nr = instance.num_levels();
  const auto total = configuration_count(nj, nr);
  if (total > cap)
    throw EnumerationCapExceeded("instance too large for oracle: " + std::to_string(nr + 1) + "^" + std::to_string(nj) +
                                 " configurations exceed the cap of " + std::to_string(cap));

  std::vector<int> digits(nj, 0);
  OracleResult best{Solution::all_closed(nj), -std::numeric_limits<double>::infinity(), 0};
  for (std::uint64_t n = 0; n < total; ++n) {
    std::vector<int> levels(nj);
    for (std::size_t j = 0; j < nj; ++j) levels[j] = digits[j] - 1;
    Solution s(std::move(levels));
    const double phi = profit(instance, coeffs, s);
    ++best.evaluated;
    if (phi > best.profit || (phi == best.profit && lex_less_y(s, best.solution))) {
      best.profit = phi;
      best.solution = std::move(s);
    }
    // Odometer increment, last facility fastest.
    for (std::size_t j = nj; j-- > 0;) {
      if (++digits[j] <= static_cast<int>(nr)) break;
      digits[j] = 0;
    }
  }
  return best;
}

}  // namespace cfld
