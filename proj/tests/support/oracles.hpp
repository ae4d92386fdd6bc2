#pragma once

// Independent reference computations used by the tests. Nothing here calls
// the library's evaluation code: values are recomputed from raw instance
// data so that agreement is meaningful.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "cfld/instancegen.hpp"
#include "cfld/model.hpp"
#include "cfld/relaxation.hpp"

namespace cfld::testsupport {

/// One zone, one candidate, one competitor and one level.
inline Instance single_market(double a, double f, double c, double Q, double d_cand, double q, double d_comp) {
  Matrix lc(1, 1);
  lc(0, 0) = c;
  Matrix dc(1, 1);
  dc(0, 0) = d_cand;
  Matrix dk(1, 1);
  dk(0, 0) = d_comp;
  return Instance({{"Z1", a, std::nullopt}}, {{"S1", f, std::nullopt}}, {{"C1", q, std::nullopt}}, {Q}, lc, dc, dk);
}

/// Generated instance with |R| levels taken from {100, 500, 900, 300, 700}.
inline Instance small_instance(std::uint64_t seed, std::size_t zones, std::size_t cands, std::size_t levels,
                               std::size_t competitors, double fixed_cost) {
  static const std::vector<double> pool{100.0, 500.0, 900.0, 300.0, 700.0};
  GenConfig g;
  g.n_zones = zones;
  g.n_candidates = cands;
  g.n_competitors = competitors;
  g.fixed_cost = fixed_cost;
  g.seed = seed;
  g.level_values.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(levels));
  std::sort(g.level_values.begin(), g.level_values.end());
  return generate(g);
}

inline double direct_v(const Instance& inst, std::size_t i) {
  double v = 0.0;
  for (std::size_t k = 0; k < inst.num_competitors(); ++k) {
    const double d = inst.dist_competitors()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    v += inst.competitors()[k].attractiveness / (d * d);
  }
  return v;
}

inline double direct_b(const Instance& inst, std::size_t i, std::size_t j, std::size_t r) {
  const double d = inst.dist_candidates()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return inst.levels()[r] / (d * d * direct_v(inst, i));
}

/// Profit from the gravity rule: each zone splits its buying power in
/// proportion to Q/d^2 over new and competitor facilities.
inline double direct_profit(const Instance& inst, const std::vector<int>& levels) {
  double total = 0.0;
  for (std::size_t i = 0; i < inst.num_zones(); ++i) {
    double mine = 0.0;
    for (std::size_t j = 0; j < inst.num_candidates(); ++j) {
      if (levels[j] < 0) continue;
      const double d = inst.dist_candidates()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      mine += inst.levels()[static_cast<std::size_t>(levels[j])] / (d * d);
    }
    const double theirs = direct_v(inst, i);
    total += inst.zones()[i].buying_power * mine / (mine + theirs);
  }
  for (std::size_t j = 0; j < inst.num_candidates(); ++j)
    if (levels[j] >= 0)
      total -= inst.candidates()[j].fixed_cost +
               inst.level_costs()(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(levels[j]));
  return total;
}

inline double direct_profit(const Instance& inst, const Solution& s) { return direct_profit(inst, s.levels()); }

/// 1 / z_i at a fractional point, from raw data.
inline double direct_fhat(const Instance& inst, const Matrix& y, std::size_t i) {
  double u = 0.0;
  for (std::size_t j = 0; j < inst.num_candidates(); ++j)
    for (std::size_t r = 0; r < inst.num_levels(); ++r)
      u += direct_b(inst, i, j, r) * y(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r));
  return 1.0 / (u + 1.0);
}

/// Visits every closed/open-at-level assignment by recursion on the facility index.
inline void for_each_solution(std::size_t nj, std::size_t nr, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> cur(nj, -1);
  std::function<void(std::size_t)> rec = [&](std::size_t j) {
    if (j == nj) {
      fn(cur);
      return;
    }
    for (int o = -1; o < static_cast<int>(nr); ++o) {
      cur[j] = o;
      rec(j + 1);
    }
  };
  rec(0);
}

struct RecursiveOptimum {
  std::vector<int> levels;
  double profit = -std::numeric_limits<double>::infinity();
  std::size_t visited = 0;
};

inline RecursiveOptimum recursive_optimum(const Instance& inst) {
  RecursiveOptimum best;
  for_each_solution(inst.num_candidates(), inst.num_levels(), [&](const std::vector<int>& lv) {
    ++best.visited;
    const double p = direct_profit(inst, lv);
    if (p > best.profit) {
      best.profit = p;
      best.levels = lv;
    }
  });
  return best;
}

/// Central differences of 1/z_i with respect to y_jr, laid out |I| x (|J|*|R|).
inline Matrix fd_gradient_fhat(const Instance& inst, const Matrix& y, double h) {
  const auto nj = inst.num_candidates(), nr = inst.num_levels();
  Matrix g(static_cast<Eigen::Index>(inst.num_zones()), static_cast<Eigen::Index>(nj * nr));
  for (std::size_t j = 0; j < nj; ++j)
    for (std::size_t r = 0; r < nr; ++r) {
      Matrix yp = y, ym = y;
      yp(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r)) += h;
      ym(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r)) -= h;
      for (std::size_t i = 0; i < inst.num_zones(); ++i)
        g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j * nr + r)) =
            (direct_fhat(inst, yp, i) - direct_fhat(inst, ym, i)) / (2.0 * h);
    }
  return g;
}

/// Best vertex per facility by trying each allowed option; ties to the
/// earliest option in the order closed, level 0, level 1, ...
inline std::vector<int> brute_force_lmo(const Matrix& gradient, const NodeFixings& fx) {
  std::vector<int> out(fx.num_candidates(), Solution::kClosed);
  for (std::size_t j = 0; j < fx.num_candidates(); ++j) {
    double best = std::numeric_limits<double>::infinity();
    if (fx.allows_closed(j)) best = 0.0;
    for (std::size_t r = 0; r < fx.num_levels(); ++r) {
      if (!fx.allows_level(j, r)) continue;
      const double v = gradient(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r));
      if (v < best) {
        best = v;
        out[j] = static_cast<int>(r);
      }
    }
  }
  return out;
}

/// Uniform point of the relaxed region: per facility a random mass in
/// [0, 1] split randomly across levels.
inline Matrix random_fractional(std::mt19937_64& rng, std::size_t nj, std::size_t nr, bool interior = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix y(static_cast<Eigen::Index>(nj), static_cast<Eigen::Index>(nr));
  for (std::size_t j = 0; j < nj; ++j) {
    const double mass = interior ? 0.05 + 0.9 * u(rng) : u(rng);
    double sum = 0.0;
    for (std::size_t r = 0; r < nr; ++r) {
      y(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r)) = 0.05 + u(rng);
      sum += y(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r));
    }
    y.row(static_cast<Eigen::Index>(j)) *= mass / sum;
  }
  return y;
}

inline Solution random_solution(std::mt19937_64& rng, std::size_t nj, std::size_t nr) {
  std::uniform_int_distribution<int> d(-1, static_cast<int>(nr) - 1);
  std::vector<int> lv(nj);
  for (auto& l : lv) l = d(rng);
  return Solution(lv);
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

}  // namespace cfld::testsupport
