#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "cfld/model.hpp"

namespace cfld {

/// Level subsets are bitmasks over sorted level positions, so at most 64 levels.
using LevelMask = std::uint64_t;
inline constexpr std::size_t kMaxLevels = 64;

inline LevelMask all_levels(std::size_t num_levels) {
  return num_levels >= 64 ? ~LevelMask{0} : ((LevelMask{1} << num_levels) - 1);
}
inline bool has_level(LevelMask m, std::size_t r) { return (m >> r) & 1U; }

enum class FacilityStatus : std::uint8_t { Free, Closed, Open };

struct FacilityFixing {
  FacilityStatus status = FacilityStatus::Free;
  /// Levels still allowed. For Open this is the non-empty subset S_j the
  /// facility must pick from; for Free it is every level.
  LevelMask levels = 0;
  friend bool operator==(const FacilityFixing&, const FacilityFixing&) = default;
};

/// Branch-and-bound state: what each candidate is still allowed to do.
class NodeFixings {
 public:
  NodeFixings() = default;
  NodeFixings(std::size_t num_candidates, std::size_t num_levels);

  std::size_t num_candidates() const noexcept { return fixings_.size(); }
  std::size_t num_levels() const noexcept { return num_levels_; }
  const FacilityFixing& operator[](std::size_t j) const { return fixings_[j]; }

  void close(std::size_t j);
  /// Throws std::invalid_argument on an empty or out-of-range mask.
  void open(std::size_t j, LevelMask levels);

  bool allows_closed(std::size_t j) const { return fixings_[j].status != FacilityStatus::Open; }
  bool allows_level(std::size_t j, std::size_t r) const {
    return fixings_[j].status != FacilityStatus::Closed && has_level(fixings_[j].levels, r);
  }
  /// True when exactly one option remains for every facility.
  bool is_leaf() const;
  /// Whether `s` is a completion of these fixings.
  bool admits(const Solution& s) const;

  friend bool operator==(const NodeFixings&, const NodeFixings&) = default;

 private:
  std::vector<FacilityFixing> fixings_;
  std::size_t num_levels_ = 0;
};

/// Per-facility vertex choice of the linear minimization oracle:
/// Solution::kClosed or the chosen level.
std::vector<int> lmo_choices(const Matrix& gradient, const NodeFixings& fixings);

/// Vertex of the relaxed region minimizing <gradient, y>. `gradient` is the
/// derivative of the full min-form objective, |J| x |R|. Free facilities
/// open at the argmin level (ties to the smallest r) only when that entry is
/// strictly negative.
FractionalPoint lmo(const Matrix& gradient, const NodeFixings& fixings);

/// Gradient of the min-form objective with x eliminated:
/// f_j + c_jr + sum_i a_i d(1 - F_i)/dy_jr.
Matrix objective_gradient(const Instance& instance, const DerivedCoefficients& coeffs, const Matrix& y);

struct RelaxationOptions {
  /// Stop once the Frank-Wolfe gap is <= tol_gap * (1 + |objective|).
  double tol_gap = 1e-6;
  std::size_t max_iterations = 10'000;
  /// Stop as soon as the certified lower bound reaches this value.
  double cutoff = std::numeric_limits<double>::infinity();
  /// Block pairwise sweeps after each Frank-Wolfe step. Bound validity never
  /// depends on them; they only speed up convergence on faces.
  bool pairwise_sweeps = true;
  /// Initial iterate; projected onto the fixings before use.
  std::optional<Matrix> warm_start;
};

struct RelaxationResult {
  /// Best certified value objective(y_t) - gap_t over the iterates.
  double lower_bound = 0.0;
  FractionalPoint point = FractionalPoint::zeros(0, 0);
  /// Objective at `point`.
  double objective = 0.0;
  /// Frank-Wolfe gap at `point`.
  double gap = 0.0;
  std::size_t iterations = 0;
  /// False when the iteration cap stopped the solve before the gap was met.
  bool gap_met = false;
  /// True when the solve stopped early because lower_bound >= cutoff.
  bool cut_off = false;
};

/// Projects an arbitrary matrix onto the region allowed by `fixings`.
Matrix project_onto_fixings(const Matrix& y, const NodeFixings& fixings);

/// Convex continuous relaxation of the min-form problem over the fixings.
RelaxationResult solve_relaxation(const Instance& instance, const DerivedCoefficients& coeffs,
                                  const NodeFixings& fixings, const RelaxationOptions& options);

inline RelaxationResult solve_relaxation(const Instance& instance, const DerivedCoefficients& coeffs,
                                         const NodeFixings& fixings, double tol_gap) {
  RelaxationOptions opt;
  opt.tol_gap = tol_gap;
  return solve_relaxation(instance, coeffs, fixings, opt);
}

}  // namespace cfld
