#include <gtest/gtest.h>

#include <random>

#include "cfld/model.hpp"
#include "cfld/oracle.hpp"
#include "support/oracles.hpp"

using namespace cfld;
namespace ts = cfld::testsupport;

namespace {

Instance two_competitors() {
  Matrix lc(1, 1);
  lc(0, 0) = 0.0;
  Matrix dc(1, 1);
  dc(0, 0) = 10.0;
  Matrix dk(1, 2);
  dk << 10.0, 10.0;
  return Instance({{"Z1", 1000.0, std::nullopt}}, {{"S1", 0.0, std::nullopt}},
                  {{"C1", 100.0, std::nullopt}, {"C2", 100.0, std::nullopt}}, {100.0}, lc, dc, dk);
}

Instance two_candidates_unit_b() {
  Matrix lc = Matrix::Zero(2, 1);
  Matrix dc(1, 2);
  dc << 10.0, 10.0;
  Matrix dk(1, 1);
  dk(0, 0) = 10.0;
  return Instance({{"Z1", 1000.0, std::nullopt}}, {{"S1", 0.0, std::nullopt}, {"S2", 0.0, std::nullopt}},
                  {{"C1", 100.0, std::nullopt}}, {100.0}, lc, dc, dk);
}

}  // namespace

TEST(CompetitorUtility, SingleCompetitor) {
  const auto inst = ts::single_market(1000, 0, 0, 100, 10, 100, 10);
  EXPECT_DOUBLE_EQ(compute_competitor_utility(inst)[0], 1.0);
}

TEST(CompetitorUtility, AddsAcrossCompetitors) {
  EXPECT_DOUBLE_EQ(compute_competitor_utility(two_competitors())[0], 2.0);
}

TEST(CompetitorUtility, MatchesResummation) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> q(100, 1000), d(5, 50);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix lc = Matrix::Zero(1, 1);
    Matrix dc(2, 1);
    dc << d(rng), d(rng);
    Matrix dk(2, 3);
    std::vector<Competitor> comps;
    for (int k = 0; k < 3; ++k) {
      comps.push_back({"C" + std::to_string(k), q(rng), std::nullopt});
      dk(0, k) = d(rng);
      dk(1, k) = d(rng);
    }
    Instance inst({{"Z1", 1.0, std::nullopt}, {"Z2", 1.0, std::nullopt}}, {{"S1", 0.0, std::nullopt}}, comps, {100.0},
                  lc, dc, dk);
    const Vector v = compute_competitor_utility(inst);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(v[static_cast<Eigen::Index>(i)], ts::direct_v(inst, i), 1e-12 * ts::direct_v(inst, i));
  }
}

TEST(Coefficients, UnitExample) {
  const auto inst = ts::single_market(1000, 0, 0, 100, 10, 100, 10);
  const auto c = compute_coefficients(inst);
  EXPECT_DOUBLE_EQ(c.b_at(0, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(c.beta_lower[0], 0.5);
  EXPECT_DOUBLE_EQ(c.beta_upper, 1.0);
}

TEST(Coefficients, TwoUnitCandidatesGiveOneThird) {
  const auto c = compute_coefficients(two_candidates_unit_b());
  EXPECT_DOUBLE_EQ(c.beta_lower[0], 1.0 / 3.0);
}

TEST(Coefficients, MatchElementwiseRecomputation) {
  const auto inst = ts::small_instance(5, 5, 5, 5, 3, 0.0);
  const auto c = compute_coefficients(inst);
  for (std::size_t i = 0; i < 5; ++i) {
    double sum_star = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      double star = 0.0;
      for (std::size_t r = 0; r < 5; ++r) {
        const double ref = ts::direct_b(inst, i, j, r);
        EXPECT_NEAR(c.b_at(i, j, r), ref, 1e-12 * ref);
        star = std::max(star, ref);
        if (r > 0) EXPECT_LE(c.b_at(i, j, r - 1), c.b_at(i, j, r));
      }
      EXPECT_NEAR(c.b_star(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), star, 1e-12 * star);
      sum_star += star;
    }
    EXPECT_NEAR(c.beta_lower[static_cast<Eigen::Index>(i)], 1.0 / (sum_star + 1.0), 1e-12);
    EXPECT_GT(c.beta_lower[static_cast<Eigen::Index>(i)], 0.0);
    EXPECT_LT(c.beta_lower[static_cast<Eigen::Index>(i)], 1.0);
  }
}

TEST(Patronage, ZeroPointGivesZero) {
  const auto inst = ts::small_instance(2, 4, 3, 2, 2, 0.0);
  const auto c = compute_coefficients(inst);
  const Matrix p = patronage_probabilities(c, FractionalPoint::zeros(3, 2));
  EXPECT_EQ(p.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Patronage, EvenSplitWithCompetitor) {
  const auto inst = ts::single_market(1000, 0, 0, 100, 10, 100, 10);
  const auto c = compute_coefficients(inst);
  const Matrix p = patronage_probabilities(c, FractionalPoint::from_solution(Solution({0}), 1));
  EXPECT_DOUBLE_EQ(p(0, 0), 0.5);
}

TEST(Patronage, NormalizationWithComplement) {
  const auto inst = ts::small_instance(3, 6, 4, 3, 2, 0.0);
  const auto c = compute_coefficients(inst);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const FractionalPoint pt(ts::random_fractional(rng, 4, 3));
    const Matrix p = patronage_probabilities(c, pt);
    const Vector fh = capture_complement(c, pt);
    const Vector F = capture_fraction(c, pt);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      EXPECT_NEAR(p.row(i).sum() + fh[i], 1.0, 1e-12);
      EXPECT_NEAR(F[i] + fh[i], 1.0, 1e-12);
      EXPECT_NEAR(F[i], p.row(i).sum(), 1e-12);
      EXPECT_GE(p.row(i).minCoeff(), 0.0);
      EXPECT_LT(p.row(i).sum(), 1.0);
    }
  }
}

TEST(Capture, ZeroAndSymmetricCases) {
  const auto inst = ts::single_market(1000, 0, 0, 100, 10, 100, 10);
  const auto c = compute_coefficients(inst);
  EXPECT_EQ(capture_fraction(c, FractionalPoint::zeros(1, 1))[0], 0.0);
  EXPECT_EQ(capture_complement(c, FractionalPoint::zeros(1, 1))[0], 1.0);
  EXPECT_DOUBLE_EQ(capture_fraction(c, FractionalPoint::from_solution(Solution({0}), 1))[0], 0.5);
}

TEST(Profit, AllClosedIsZero) {
  const auto inst = ts::small_instance(1, 5, 4, 3, 2, 100.0);
  EXPECT_EQ(profit(inst, compute_coefficients(inst), Solution::all_closed(4)), 0.0);
}

TEST(Profit, EvenSplitExample) {
  const auto inst = ts::single_market(1000, 0, 0, 100, 10, 100, 10);
  const auto c = compute_coefficients(inst);
  EXPECT_DOUBLE_EQ(profit(inst, c, Solution({0})), 500.0);
  EXPECT_DOUBLE_EQ(min_objective(inst, c, Solution({0})), 500.0);
  EXPECT_DOUBLE_EQ(min_objective(inst, c, Solution::all_closed(1)), 1000.0);
}

TEST(Profit, RejectsSolutionOfWrongShape) {
  const auto inst = ts::small_instance(1, 3, 4, 2, 1, 0.0);
  const auto c = compute_coefficients(inst);
  EXPECT_THROW(profit(inst, c, Solution({0, 1})), InfeasibleSolution);
  EXPECT_THROW(profit(inst, c, Solution({0, 1, 2, -1})), InfeasibleSolution);
}

TEST(Profit, MatchesDirectGravitySumAndDuality) {
  const auto inst = ts::small_instance(9, 7, 4, 3, 3, 250.0);
  const auto c = compute_coefficients(inst);
  std::mt19937_64 rng(9);
  for (int t = 0; t < 200; ++t) {
    const Solution s = ts::random_solution(rng, 4, 3);
    const double p = profit(inst, c, s);
    EXPECT_NEAR(p, ts::direct_profit(inst, s), 1e-9 * (1.0 + std::abs(p)));
    EXPECT_NEAR(p + min_objective(inst, c, s), inst.total_buying_power(), 1e-9 * inst.total_buying_power());
    EXPECT_NEAR(min_objective(inst, c, s), min_objective(inst, c, FractionalPoint::from_solution(s, 3)), 1e-9);
  }
}

TEST(Solution, FromIndicatorsChecksMembership) {
  Matrix y(2, 2);
  y << 1, 0, 0, 0;
  EXPECT_EQ(Solution::from_indicators({1, 0}, y), Solution({0, -1}));
  EXPECT_THROW(Solution::from_indicators({0, 0}, y), InfeasibleSolution);
  Matrix half(2, 2);
  half << 0.5, 0.5, 0, 0;
  EXPECT_THROW(Solution::from_indicators({1, 0}, half), InfeasibleSolution);
}

TEST(FractionalPointTest, RejectsInvalid) {
  Matrix neg(1, 2);
  neg << -0.1, 0.2;
  EXPECT_THROW(FractionalPoint{neg}, InfeasibleSolution);
  Matrix over(1, 2);
  over << 0.6, 0.6;
  EXPECT_THROW(FractionalPoint{over}, InfeasibleSolution);
}

TEST(Gradient, AtZeroIsMinusB) {
  const auto inst = ts::small_instance(4, 3, 3, 2, 2, 0.0);
  const auto c = compute_coefficients(inst);
  const Matrix g = complement_gradient(c, FractionalPoint::zeros(3, 2));
  EXPECT_NEAR((g + c.b).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(Gradient, UnitExample) {
  const auto inst = ts::single_market(1000, 0, 0, 100, 10, 100, 10);
  const auto c = compute_coefficients(inst);
  EXPECT_DOUBLE_EQ(complement_gradient(c, FractionalPoint::from_solution(Solution({0}), 1))(0, 0), -0.25);
}

TEST(Gradient, MatchesFiniteDifferences) {
  const auto inst = ts::small_instance(6, 6, 5, 3, 2, 0.0);
  const auto c = compute_coefficients(inst);
  std::mt19937_64 rng(6);
  for (int t = 0; t < 20; ++t) {
    const Matrix y = ts::random_fractional(rng, 5, 3, true);
    const Matrix g = complement_gradient(c, FractionalPoint(y));
    const Matrix fd = ts::fd_gradient_fhat(inst, y, 1e-6);
    EXPECT_LT(g.maxCoeff(), 0.0);
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index k = 0; k < g.cols(); ++k) EXPECT_NEAR(g(i, k), fd(i, k), 1e-5 * std::abs(fd(i, k)));
  }
}

TEST(Capture, MidpointConcavityAndMonotonicity) {
  const auto inst = ts::small_instance(8, 6, 5, 3, 3, 0.0);
  const auto c = compute_coefficients(inst);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 200; ++t) {
    const Matrix y1 = ts::random_fractional(rng, 5, 3), y2 = ts::random_fractional(rng, 5, 3);
    const Vector f1 = capture_fraction(c, FractionalPoint(y1)), f2 = capture_fraction(c, FractionalPoint(y2));
    const Vector fm = capture_fraction(c, FractionalPoint((y1 + y2) / 2.0));
    for (Eigen::Index i = 0; i < fm.size(); ++i) EXPECT_GE(fm[i], (f1[i] + f2[i]) / 2.0 - 1e-12);
    // Raising one entry within the region never lowers any zone's capture.
    Matrix y3 = y1;
    const Eigen::Index j = t % 5;
    const double room = 1.0 - y3.row(j).sum();
    y3(j, t % 3) += room;
    const Vector f3 = capture_fraction(c, FractionalPoint(y3));
    for (Eigen::Index i = 0; i < f3.size(); ++i) EXPECT_GE(f3[i], f1[i] - 1e-15);
  }
}

TEST(InstanceValidation, RejectsBadData) {
  Matrix lc = Matrix::Zero(1, 1), dc(1, 1), dk(1, 1);
  dc(0, 0) = 10;
  dk(0, 0) = 10;
  auto make = [&](double a, double f, double q, double Q, double d) {
    Matrix dcc = dc;
    dcc(0, 0) = d;
    return Instance({{"Z", a, std::nullopt}}, {{"S", f, std::nullopt}}, {{"C", q, std::nullopt}}, {Q}, lc, dcc, dk);
  };
  EXPECT_NO_THROW(make(1, 0, 1, 1, 10));
  EXPECT_THROW(make(-1, 0, 1, 1, 10), InvalidInstance);
  EXPECT_THROW(make(1, -1, 1, 1, 10), InvalidInstance);
  EXPECT_THROW(make(1, 0, 0, 1, 10), InvalidInstance);
  EXPECT_THROW(make(1, 0, 1, 0, 10), InvalidInstance);
  EXPECT_THROW(make(1, 0, 1, 1, 1e-4), InvalidInstance);
  EXPECT_THROW(Instance({{"Z", 1, std::nullopt}}, {{"S", 0, std::nullopt}}, {}, {1.0}, lc, dc, Matrix(1, 0)),
               InvalidInstance);
}

TEST(InstanceValidation, CoordinatesMustMatchDistances) {
  Matrix lc = Matrix::Zero(1, 1), dc(1, 1), dk(1, 1);
  dc(0, 0) = 5.0;
  dk(0, 0) = 10.0;
  std::vector<Zone> z{{"Z", 1, Point2{0, 0}}};
  std::vector<CandidateSite> s{{"S", 0, Point2{3, 4}}};
  std::vector<Competitor> k{{"C", 1, Point2{10, 0}}};
  EXPECT_NO_THROW(Instance(z, s, k, {1.0}, lc, dc, dk));
  dc(0, 0) = 5.1;
  EXPECT_THROW(Instance(z, s, k, {1.0}, lc, dc, dk), InvalidInstance);
}

TEST(InstanceValidation, LevelsAreSortedWithCosts) {
  Matrix lc(1, 2);
  lc << 9.0, 1.0;
  Matrix dc(1, 1), dk(1, 1);
  dc(0, 0) = 10;
  dk(0, 0) = 10;
  Instance inst({{"Z", 1, std::nullopt}}, {{"S", 0, std::nullopt}}, {{"C", 1, std::nullopt}}, {900.0, 100.0}, lc, dc, dk);
  EXPECT_EQ(inst.levels(), (std::vector<double>{100.0, 900.0}));
  EXPECT_EQ(inst.level_cost(0, 0), 1.0);
  EXPECT_EQ(inst.level_cost(0, 1), 9.0);
}

TEST(Monotonicity, MoreCompetitorsOrHigherCostsNeverRaiseOptimum) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= 4; ++k) {
      const auto inst = ts::small_instance(seed, 6, 5, 2, k, 100.0);
      const double opt = enumerate_optimal(inst, compute_coefficients(inst)).profit;
      EXPECT_LE(opt, prev + 1e-9 * (1.0 + std::abs(prev)));
      prev = opt;
    }
    prev = std::numeric_limits<double>::infinity();
    for (double f : {0.0, 200.0, 800.0, 3000.0}) {
      const auto inst = ts::small_instance(seed, 6, 5, 2, 2, f);
      const double opt = enumerate_optimal(inst, compute_coefficients(inst)).profit;
      EXPECT_LE(opt, prev + 1e-9 * (1.0 + std::abs(prev)));
      prev = opt;
    }
  }
}
