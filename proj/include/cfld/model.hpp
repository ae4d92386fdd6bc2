#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfld/error.hpp"

namespace cfld {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Distances below this floor are rejected when an instance is built.
inline constexpr double kMinDistance = 1e-3;

/// Tolerance used when checking coordinates against explicit distances.
inline constexpr double kDistanceConsistencyTol = 1e-9;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

double euclidean(const Point2& a, const Point2& b);

struct Zone {
  std::string id;
  double buying_power = 0.0;
  std::optional<Point2> location;
  friend bool operator==(const Zone&, const Zone&) = default;
};

struct CandidateSite {
  std::string id;
  double fixed_cost = 0.0;
  std::optional<Point2> location;
  friend bool operator==(const CandidateSite&, const CandidateSite&) = default;
};

struct Competitor {
  std::string id;
  double attractiveness = 0.0;
  std::optional<Point2> location;
  friend bool operator==(const Competitor&, const Competitor&) = default;
};

/// Immutable problem data for one market.
///
/// Levels are kept sorted ascending; if the constructor receives them in a
/// different order, the columns of `level_costs` are permuted to match.
/// Level indices everywhere else in the library refer to this sorted order.
class Instance {
 public:
  /// `level_costs` is |J| x |R|, `dist_candidates` is |I| x |J| and
  /// `dist_competitors` is |I| x |K|. Throws InvalidInstance.
  Instance(std::vector<Zone> zones, std::vector<CandidateSite> candidates,
           std::vector<Competitor> competitors, std::vector<double> levels, Matrix level_costs,
           Matrix dist_candidates, Matrix dist_competitors);

  /// Builds the distance matrices from the locations, which must all be set.
  static Instance from_locations(std::vector<Zone> zones, std::vector<CandidateSite> candidates,
                                 std::vector<Competitor> competitors, std::vector<double> levels,
                                 Matrix level_costs);

  std::size_t num_zones() const noexcept { return zones_.size(); }
  std::size_t num_candidates() const noexcept { return candidates_.size(); }
  std::size_t num_competitors() const noexcept { return competitors_.size(); }
  std::size_t num_levels() const noexcept { return levels_.size(); }

  const std::vector<Zone>& zones() const noexcept { return zones_; }
  const std::vector<CandidateSite>& candidates() const noexcept { return candidates_; }
  const std::vector<Competitor>& competitors() const noexcept { return competitors_; }
  const std::vector<double>& levels() const noexcept { return levels_; }
  const Matrix& level_costs() const noexcept { return level_costs_; }
  const Matrix& dist_candidates() const noexcept { return dist_candidates_; }
  const Matrix& dist_competitors() const noexcept { return dist_competitors_; }

  double buying_power(std::size_t i) const { return zones_[i].buying_power; }
  double fixed_cost(std::size_t j) const { return candidates_[j].fixed_cost; }
  double level_cost(std::size_t j, std::size_t r) const { return level_costs_(j, r); }
  double total_buying_power() const noexcept;

  /// True when every zone, candidate and competitor carries a location.
  bool has_locations() const noexcept;

  friend bool operator==(const Instance& a, const Instance& b);

 private:
  void validate() const;

  std::vector<Zone> zones_;
  std::vector<CandidateSite> candidates_;
  std::vector<Competitor> competitors_;
  std::vector<double> levels_;
  Matrix level_costs_;
  Matrix dist_candidates_;
  Matrix dist_competitors_;
};

/// Gravity-model quantities derived once per instance.
///
/// `b` is stored flattened as |I| x (|J|*|R|), column j*|R| + r, so that the
/// per-zone utility sums of a point are a single matrix-vector product.
struct DerivedCoefficients {
  Vector v;
  Matrix b;
  Matrix b_star;
  Vector beta_lower;
  double beta_upper = 1.0;
  std::size_t num_candidates = 0;
  std::size_t num_levels = 0;

  std::size_t num_zones() const noexcept { return static_cast<std::size_t>(v.size()); }
  std::size_t column(std::size_t j, std::size_t r) const noexcept { return j * num_levels + r; }
  double b_at(std::size_t i, std::size_t j, std::size_t r) const { return b(i, column(j, r)); }
};

/// Total competitor utility per zone: sum over k of q_k / d_ik^2.
Vector compute_competitor_utility(const Instance& instance);

DerivedCoefficients compute_coefficients(const Instance& instance, const Vector& v);
inline DerivedCoefficients compute_coefficients(const Instance& instance) {
  return compute_coefficients(instance, compute_competitor_utility(instance));
}

/// Binary location/level decision. Each facility is either closed or open at
/// exactly one level, so membership in the feasible set holds by construction.
class Solution {
 public:
  static constexpr int kClosed = -1;

  Solution() = default;
  explicit Solution(std::vector<int> levels) : levels_(std::move(levels)) {}

  static Solution all_closed(std::size_t num_candidates);
  static Solution all_open(std::size_t num_candidates, int level);

  /// Builds from indicator form; throws InfeasibleSolution when sum_r y_jr != x_j
  /// or when any entry is not exactly 0 or 1.
  static Solution from_indicators(const std::vector<double>& x, const Matrix& y);

  std::size_t num_candidates() const noexcept { return levels_.size(); }
  bool is_open(std::size_t j) const { return levels_[j] != kClosed; }
  int level(std::size_t j) const { return levels_[j]; }
  const std::vector<int>& levels() const noexcept { return levels_; }

  int x(std::size_t j) const { return is_open(j) ? 1 : 0; }
  int y(std::size_t j, std::size_t r) const { return levels_[j] == static_cast<int>(r) ? 1 : 0; }
  Matrix y_matrix(std::size_t num_levels) const;
  std::size_t open_count() const noexcept;

  /// Throws InfeasibleSolution unless sized for the instance with valid levels.
  void check_against(const Instance& instance) const;

  friend bool operator==(const Solution&, const Solution&) = default;

 private:
  std::vector<int> levels_;
};

/// Lexicographic order on the flattened y matrix (j-major, then r).
bool lex_less_y(const Solution& a, const Solution& b);

/// Point in the continuous relaxation: y >= 0 and sum_r y_jr <= 1 per facility.
class FractionalPoint {
 public:
  /// Validates with tolerance `tol`; throws InfeasibleSolution.
  explicit FractionalPoint(Matrix y, double tol = 1e-9);

  static FractionalPoint zeros(std::size_t num_candidates, std::size_t num_levels);
  static FractionalPoint from_solution(const Solution& s, std::size_t num_levels);

  const Matrix& y() const noexcept { return y_; }
  double mass(std::size_t j) const { return y_.row(static_cast<Eigen::Index>(j)).sum(); }

 private:
  struct Unchecked {};
  FractionalPoint(Matrix y, Unchecked) : y_(std::move(y)) {}
  Matrix y_;
};

/// z_i = sum_jr b_ijr y_jr + 1 for each zone.
Vector utility_totals(const DerivedCoefficients& coeffs, const Matrix& y);

/// p_ij, |I| x |J|.
Matrix patronage_probabilities(const DerivedCoefficients& coeffs, const FractionalPoint& point);

/// F_i = (z_i - 1) / z_i, the share of zone i captured by the new facilities.
Vector capture_fraction(const DerivedCoefficients& coeffs, const FractionalPoint& point);

/// 1 - F_i = 1 / z_i.
Vector capture_complement(const DerivedCoefficients& coeffs, const FractionalPoint& point);

/// sum_i a_i F_i - sum_j f_j x_j - sum_jr c_jr y_jr.
double profit(const Instance& instance, const DerivedCoefficients& coeffs, const Solution& s);

/// sum_j f_j x_j + sum_jr c_jr y_jr + sum_i a_i / z_i with x_j = sum_r y_jr.
double min_objective(const Instance& instance, const DerivedCoefficients& coeffs,
                     const FractionalPoint& point);
double min_objective(const Instance& instance, const DerivedCoefficients& coeffs,
                     const Solution& s);

/// Unchecked matrix variant used by inner loops.
double min_objective(const Instance& instance, const DerivedCoefficients& coeffs,
                     const Matrix& y);

/// d(1 - F_i)/dy_jr = -b_ijr / z_i^2, laid out like DerivedCoefficients::b.
Matrix complement_gradient(const DerivedCoefficients& coeffs, const FractionalPoint& point);

/// Per-variable cost f_j + c_jr, |J| x |R|. This is the linear part of the
/// min-form objective after eliminating x.
Matrix linear_costs(const Instance& instance);

}  // namespace cfld
