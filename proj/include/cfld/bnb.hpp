#pragma once

#include <cstdint>
#include <functional>

#include "cfld/model.hpp"
#include "cfld/relaxation.hpp"

namespace cfld {

struct BnBOptions {
  double rel_tol = 1e-6;
  std::uint64_t node_cap = 1'000'000;
  /// Frank-Wolfe tolerance at each node, relative to 1 + |objective|.
  double node_gap_tol = 1e-7;
  std::size_t node_max_iterations = 10'000;
  /// Called after each explored node with its fixings and certified bound.
  /// Used by tests to audit bounds; leave empty in production.
  std::function<void(const NodeFixings&, double lower_bound)> on_node;
};

struct BnBReport {
  Solution best_solution;
  double best_profit = 0.0;
  /// (incumbent - best open bound) / (1 + |incumbent|) in min form.
  double proven_gap = 0.0;
  std::uint64_t nodes_explored = 0;
  double wall_time = 0.0;
  bool proven = false;
  /// Min-form values: incumbent and global lower bound.
  double upper_bound = 0.0;
  double lower_bound = 0.0;
};

/// Open facility j at argmax_r y_jr when sum_r y_jr >= 0.5, else close it.
Solution round_incumbent(const FractionalPoint& point);

/// Best-first branch-and-bound over facility status and level subsets, with
/// bounds from the convex relaxation. Throws std::invalid_argument when
/// rel_tol <= 0.
BnBReport solve_bnb(const Instance& instance, const DerivedCoefficients& coeffs, const BnBOptions& options = {});

}  // namespace cfld
