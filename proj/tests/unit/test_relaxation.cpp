#include <gtest/gtest.h>

#include <random>

#include "cfld/relaxation.hpp"
#include "support/oracles.hpp"

using namespace cfld;
namespace ts = cfld::testsupport;

namespace {

/// Cyclic coordinate search on a 101-point grid per coordinate, each move
/// kept inside the facility's simplex.
double coordinate_descent(const Instance& inst, const DerivedCoefficients& c) {
  const auto nj = inst.num_candidates(), nr = inst.num_levels();
  Matrix y = Matrix::Zero(static_cast<Eigen::Index>(nj), static_cast<Eigen::Index>(nr));
  double best = min_objective(inst, c, y);
  for (int sweep = 0; sweep < 30; ++sweep) {
    for (std::size_t j = 0; j < nj; ++j)
      for (std::size_t r = 0; r < nr; ++r) {
        const auto jj = static_cast<Eigen::Index>(j), rr = static_cast<Eigen::Index>(r);
        const double room = 1.0 - (y.row(jj).sum() - y(jj, rr));
        double arg = y(jj, rr);
        for (int k = 0; k <= 100; ++k) {
          y(jj, rr) = room * k / 100.0;
          const double v = min_objective(inst, c, y);
          if (v < best) {
            best = v;
            arg = y(jj, rr);
          }
        }
        y(jj, rr) = arg;
      }
  }
  return best;
}

}  // namespace

TEST(Lmo, PositiveGradientGivesZeroVertex) {
  NodeFixings fx(3, 2);
  Matrix g = Matrix::Constant(3, 2, 1.0);
  const auto v = lmo(g, fx);
  EXPECT_EQ(v.y().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Lmo, PicksMostNegativeLevel) {
  NodeFixings fx(1, 2);
  Matrix g(1, 2);
  g << -3.0, -1.0;
  const auto v = lmo(g, fx);
  EXPECT_EQ(v.y()(0, 0), 1.0);
  EXPECT_EQ(v.y()(0, 1), 0.0);
}

TEST(Lmo, MatchesPerFacilityBruteForce) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 3);
  for (int trial = 0; trial < 500; ++trial) {
    NodeFixings fx(5, 3);
    for (std::size_t j = 0; j < 5; ++j) {
      switch (pick(rng)) {
        case 0: fx.close(j); break;
        case 1: fx.open(j, 0b101); break;
        case 2: fx.open(j, 0b010); break;
        default: break;
      }
    }
    Matrix g(5, 3);
    for (Eigen::Index k = 0; k < g.size(); ++k) g.data()[k] = n(rng);
    EXPECT_EQ(lmo_choices(g, fx), ts::brute_force_lmo(g, fx));
    const auto v = lmo(g, fx);
    for (std::size_t j = 0; j < 5; ++j) {
      const int ch = ts::brute_force_lmo(g, fx)[j];
      for (std::size_t r = 0; r < 3; ++r)
        EXPECT_EQ(v.y()(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r)), ch == static_cast<int>(r) ? 1.0 : 0.0);
    }
  }
}

TEST(Fixings, LeafAndAdmits) {
  NodeFixings fx(2, 3);
  EXPECT_FALSE(fx.is_leaf());
  fx.close(0);
  fx.open(1, 0b100);
  EXPECT_TRUE(fx.is_leaf());
  EXPECT_TRUE(fx.admits(Solution({-1, 2})));
  EXPECT_FALSE(fx.admits(Solution({-1, 1})));
  EXPECT_FALSE(fx.admits(Solution({0, 2})));
  EXPECT_THROW(fx.open(0, 0), std::invalid_argument);
  EXPECT_THROW(fx.open(0, 0b1000), std::invalid_argument);
}

TEST(Fixings, ProjectionRespectsFixings) {
  NodeFixings fx(3, 2);
  fx.close(0);
  fx.open(1, 0b10);
  Matrix y(3, 2);
  y << 0.5, 0.5, 0.2, 0.1, 0.9, 0.9;
  const Matrix p = project_onto_fixings(y, fx);
  EXPECT_EQ(p.row(0).cwiseAbs().sum(), 0.0);
  EXPECT_EQ(p(1, 0), 0.0);
  EXPECT_NEAR(p(1, 1), 1.0, 1e-12);
  EXPECT_LE(p.row(2).sum(), 1.0 + 1e-12);
  EXPECT_GE(p.minCoeff(), 0.0);
}

TEST(Relaxation, AllClosedIsTrivial) {
  const auto inst = ts::small_instance(1, 5, 3, 2, 2, 100.0);
  const auto c = compute_coefficients(inst);
  NodeFixings fx(3, 2);
  for (std::size_t j = 0; j < 3; ++j) fx.close(j);
  const auto res = solve_relaxation(inst, c, fx, 1e-6);
  EXPECT_DOUBLE_EQ(res.lower_bound, inst.total_buying_power());
  EXPECT_EQ(res.gap, 0.0);
  EXPECT_EQ(res.iterations, 0u);
}

TEST(Relaxation, OneDimensionalCase) {
  // min a / (b t + 1) over t in [0, 1] with b = 2.25 and no costs.
  const auto inst = ts::single_market(1000, 0, 0, 225, 10, 100, 10);
  const auto c = compute_coefficients(inst);
  ASSERT_DOUBLE_EQ(c.b_at(0, 0, 0), 2.25);
  const auto res = solve_relaxation(inst, c, NodeFixings(1, 1), 1e-9);
  const double exact = 1000.0 / 3.25;
  EXPECT_LE(res.lower_bound, exact + 1e-9);
  EXPECT_NEAR(res.lower_bound, exact, 1e-6 * exact);
  EXPECT_NEAR(res.point.y()(0, 0), 1.0, 1e-9);
}

TEST(Relaxation, BoundBelowCoordinateSearch) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inst = ts::small_instance(seed, 8, 4, 2, 2, seed % 2 ? 0.0 : 400.0);
    const auto c = compute_coefficients(inst);
    const auto res = solve_relaxation(inst, c, NodeFixings(4, 2), 1e-8);
    const double cd = coordinate_descent(inst, c);
    EXPECT_LE(res.lower_bound, cd + 1e-9 * (1.0 + std::abs(cd)));
    EXPECT_LE(res.lower_bound, res.objective);
    EXPECT_GE(res.gap, 0.0);
  }
}

TEST(Relaxation, TwoVariableGridOptimum) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inst = ts::small_instance(seed, 6, 2, 1, 1, 50.0);
    const auto c = compute_coefficients(inst);
    const auto res = solve_relaxation(inst, c, NodeFixings(2, 1), 1e-10);
    double grid = std::numeric_limits<double>::infinity();
    Matrix y(2, 1);
    for (int a = 0; a <= 1000; ++a)
      for (int b = 0; b <= 1000; ++b) {
        y << a / 1000.0, b / 1000.0;
        grid = std::min(grid, min_objective(inst, c, y));
      }
    EXPECT_LE(res.lower_bound, grid + 1e-9 * grid);
    EXPECT_NEAR(res.objective, grid, 1e-4 * (1.0 + grid));
  }
}

TEST(Relaxation, ValidForEveryCompletion) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> pick(0, 3);
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto inst = ts::small_instance(seed, 7, 5, 2, 2, 150.0);
    const auto c = compute_coefficients(inst);
    for (int trial = 0; trial < 10; ++trial) {
      NodeFixings fx(5, 2);
      for (std::size_t j = 0; j < 5; ++j) {
        const int p = pick(rng);
        if (p == 0) fx.close(j);
        if (p == 1) fx.open(j, 0b01 << (trial % 2));
        if (p == 2) fx.open(j, 0b11);
      }
      const auto res = solve_relaxation(inst, c, fx, 1e-6);
      ts::for_each_solution(5, 2, [&](const std::vector<int>& lv) {
        const Solution s(lv);
        if (!fx.admits(s)) return;
        EXPECT_GE(min_objective(inst, c, s), res.lower_bound - 1e-9 * (1.0 + std::abs(res.lower_bound)));
      });
    }
  }
}

TEST(Relaxation, ChildBoundsDoNotDrop) {
  const auto inst = ts::small_instance(3, 10, 6, 3, 3, 200.0);
  const auto c = compute_coefficients(inst);
  RelaxationOptions opt;
  opt.tol_gap = 1e-9;
  NodeFixings parent(6, 3);
  const double root = solve_relaxation(inst, c, parent, opt).lower_bound;
  // Relative tolerances are applied to bounds of order the objective.
  const double slack = 2e-9 * (1.0 + std::abs(root));
  for (std::size_t j = 0; j < 6; ++j) {
    NodeFixings closed = parent, open = parent, level = parent;
    closed.close(j);
    open.open(j, all_levels(3));
    level.open(j, 0b100);
    EXPECT_GE(solve_relaxation(inst, c, closed, opt).lower_bound, root - slack);
    const double ob = solve_relaxation(inst, c, open, opt).lower_bound;
    EXPECT_GE(ob, root - slack);
    EXPECT_GE(solve_relaxation(inst, c, level, opt).lower_bound, ob - slack);
  }
}

TEST(Relaxation, ConvergesOnLargerInstances) {
  for (std::size_t n : {20u, 50u, 100u}) {
    const auto inst = ts::small_instance(n, n, n, 5, 5, 2500.0);
    const auto c = compute_coefficients(inst);
    const auto res = solve_relaxation(inst, c, NodeFixings(n, 5), 1e-6);
    EXPECT_TRUE(res.gap_met) << n;
    EXPECT_LE(res.gap, 1e-6 * (1.0 + std::abs(res.objective)));
  }
}

TEST(Relaxation, IterationCapKeepsBoundValid) {
  const auto inst = ts::small_instance(9, 12, 8, 3, 2, 0.0);
  const auto c = compute_coefficients(inst);
  RelaxationOptions opt;
  opt.tol_gap = 1e-14;
  opt.max_iterations = 3;
  opt.pairwise_sweeps = false;
  const auto capped = solve_relaxation(inst, c, NodeFixings(8, 3), opt);
  const auto full = solve_relaxation(inst, c, NodeFixings(8, 3), 1e-9);
  EXPECT_FALSE(capped.gap_met);
  EXPECT_LE(capped.lower_bound, full.objective + 1e-9);
}

TEST(Relaxation, GradientMatchesFiniteDifferences) {
  const auto inst = ts::small_instance(2, 5, 3, 2, 2, 100.0);
  const auto c = compute_coefficients(inst);
  std::mt19937_64 rng(2);
  const Matrix y = ts::random_fractional(rng, 3, 2, true);
  const Matrix g = objective_gradient(inst, c, y);
  for (Eigen::Index j = 0; j < 3; ++j)
    for (Eigen::Index r = 0; r < 2; ++r) {
      Matrix p = y, m = y;
      p(j, r) += 1e-6;
      m(j, r) -= 1e-6;
      const double fd = (min_objective(inst, c, p) - min_objective(inst, c, m)) / 2e-6;
      EXPECT_NEAR(g(j, r), fd, 1e-5 * (1.0 + std::abs(fd)));
    }
}
