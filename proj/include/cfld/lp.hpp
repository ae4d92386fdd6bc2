#pragma once

#include <cstddef>
#include <vector>

#include "cfld/model.hpp"

namespace cfld {

/// Dense bounded-variable dual simplex for
///   min c^T x  s.t.  A x = b,  lower <= x <= upper.
///
/// The caller names one unit column (+e_i or -e_i) per row as the starting
/// basis. Solves stay dual feasible as long as every nonbasic variable whose
/// reduced cost is negative has a finite upper bound, so bound changes (the
/// branch-and-bound use case) warm-start from the previous basis.
class DualSimplex {
 public:
  enum class Status { Optimal, Infeasible, IterationLimit, DualInfeasible };

  /// `A` is m x n row-major; `slack_columns[i]` is the unit column of row i.
  /// Throws std::invalid_argument on inconsistent sizes, a slack column that
  /// is not +-e_i, or an infinite lower bound.
  DualSimplex(Matrix A, Vector b, Vector c, Vector lower, Vector upper, std::vector<std::size_t> slack_columns);

  std::size_t num_rows() const noexcept { return m_; }
  std::size_t num_cols() const noexcept { return n_; }

  void set_bounds(std::size_t j, double lower, double upper);
  double lower(std::size_t j) const { return lower_[static_cast<Eigen::Index>(j)]; }
  double upper(std::size_t j) const { return upper_[static_cast<Eigen::Index>(j)]; }

  Status solve(std::size_t max_iterations);

  /// Primal values of every column at the current basis.
  const Vector& x() const noexcept { return x_; }
  double objective() const;
  const Vector& reduced_costs() const noexcept { return d_; }
  /// y with c^T - y^T A = d^T.
  Vector row_duals() const;

  std::size_t total_iterations() const noexcept { return total_iterations_; }

  /// Rebuilds the tableau from the original data; called automatically
  /// every `kRefactorEvery` pivots.
  void refactor();

  static constexpr std::size_t kRefactorEvery = 400;

 private:
  enum class VarState : unsigned char { Basic, AtLower, AtUpper };

  void place_nonbasic(std::size_t j);
  void recompute_basic_values();
  void pivot(std::size_t r, std::size_t q, double target);

  std::size_t m_, n_;
  Matrix A_;
  Vector b_, c_, lower_, upper_;
  std::vector<std::size_t> slack_;
  std::vector<double> slack_sign_;

  Matrix T_;  // B^-1 A, m x n
  Vector bbar_;
  Vector d_;
  Vector x_;
  std::vector<std::size_t> basis_;
  std::vector<VarState> state_;
  bool dirty_ = false;
  std::size_t since_refactor_ = 0;
  std::size_t total_iterations_ = 0;
};

}  // namespace cfld
