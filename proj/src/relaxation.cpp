#include "cfld/relaxation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace cfld {

NodeFixings::NodeFixings(std::size_t num_candidates, std::size_t num_levels)
    : fixings_(num_candidates, FacilityFixing{FacilityStatus::Free, all_levels(num_levels)}), num_levels_(num_levels) {
  if (num_levels > kMaxLevels) throw std::invalid_argument("at most 64 attractiveness levels are supported");
}

void NodeFixings::close(std::size_t j) { fixings_.at(j) = FacilityFixing{FacilityStatus::Closed, 0}; }

void NodeFixings::open(std::size_t j, LevelMask levels) {
  if (levels == 0 || (levels & ~all_levels(num_levels_)) != 0)
    throw std::invalid_argument("open fixing needs a non-empty subset of the instance levels");
  fixings_.at(j) = FacilityFixing{FacilityStatus::Open, levels};
}

bool NodeFixings::is_leaf() const {
  return std::all_of(fixings_.begin(), fixings_.end(), [](const FacilityFixing& f) {
    return f.status == FacilityStatus::Closed || (f.status == FacilityStatus::Open && std::popcount(f.levels) == 1);
  });
}

bool NodeFixings::admits(const Solution& s) const {
  if (s.num_candidates() != fixings_.size()) return false;
  for (std::size_t j = 0; j < fixings_.size(); ++j) {
    if (s.is_open(j) ? !allows_level(j, static_cast<std::size_t>(s.level(j))) : !allows_closed(j)) return false;
  }
  return true;
}

std::vector<int> lmo_choices(const Matrix& gradient, const NodeFixings& fixings) {
  std::vector<int> choice(static_cast<std::size_t>(gradient.rows()), Solution::kClosed);
  for (Eigen::Index j = 0; j < gradient.rows(); ++j) {
    const auto& fx = fixings[static_cast<std::size_t>(j)];
    if (fx.status == FacilityStatus::Closed) continue;
    int best = -1;
    double best_val = 0.0;
    for (Eigen::Index r = 0; r < gradient.cols(); ++r) {
      if (!has_level(fx.levels, static_cast<std::size_t>(r))) continue;
      if (best < 0 || gradient(j, r) < best_val) {
        best = static_cast<int>(r);
        best_val = gradient(j, r);
      }
    }
    if (fx.status == FacilityStatus::Open || best_val < 0.0) choice[static_cast<std::size_t>(j)] = best;
  }
  return choice;
}

FractionalPoint lmo(const Matrix& gradient, const NodeFixings& fixings) {
  return FractionalPoint::from_solution(Solution(lmo_choices(gradient, fixings)),
                                        static_cast<std::size_t>(gradient.cols()));
}

Matrix objective_gradient(const Instance& instance, const DerivedCoefficients& coeffs, const Matrix& y) {
  const Vector z = utility_totals(coeffs, y);
  Vector w(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) w[i] = instance.buying_power(static_cast<std::size_t>(i)) / (z[i] * z[i]);
  Matrix g = linear_costs(instance);
  Eigen::Map<Vector> flat(g.data(), g.size());
  flat.noalias() -= coeffs.b.transpose() * w;
  return g;
}

Matrix project_onto_fixings(const Matrix& y, const NodeFixings& fixings) {
  Matrix p = y.cwiseMax(0.0);
  for (Eigen::Index j = 0; j < p.rows(); ++j) {
    const auto& fx = fixings[static_cast<std::size_t>(j)];
    if (fx.status == FacilityStatus::Closed) {
      p.row(j).setZero();
      continue;
    }
    double mass = 0.0, weighted = 0.0;
    for (Eigen::Index r = 0; r < p.cols(); ++r) {
      weighted += static_cast<double>(r) * p(j, r);
      if (!has_level(fx.levels, static_cast<std::size_t>(r))) {
        p(j, r) = 0.0;
      }
      mass += p(j, r);
    }
    if (fx.status == FacilityStatus::Free) {
      if (mass > 1.0) p.row(j) /= mass;
      continue;
    }
    if (mass > 0.0) {
      p.row(j) /= mass;
      continue;
    }
    // No surviving mass: put the facility on the allowed level nearest the
    // original mass centre.
    const double rowmass = y.row(j).cwiseMax(0.0).sum();
    const double centre = rowmass > 0.0 ? weighted / rowmass : 0.0;
    Eigen::Index pick = -1;
    for (Eigen::Index r = 0; r < p.cols(); ++r) {
      if (!has_level(fx.levels, static_cast<std::size_t>(r))) continue;
      if (pick < 0 || std::abs(static_cast<double>(r) - centre) < std::abs(static_cast<double>(pick) - centre)) pick = r;
    }
    p(j, pick) = 1.0;
  }
  return p;
}

namespace {

class FrankWolfe {
 public:
  FrankWolfe(const Instance& inst, const DerivedCoefficients& c, const NodeFixings& fx)
      : inst_(inst), c_(c), fx_(fx), cost_(linear_costs(inst)), a_(inst.num_zones()) {
    for (std::size_t i = 0; i < inst.num_zones(); ++i) a_[static_cast<Eigen::Index>(i)] = inst.buying_power(i);
    nj_ = static_cast<Eigen::Index>(inst.num_candidates());
    nr_ = static_cast<Eigen::Index>(inst.num_levels());
  }

  RelaxationResult run(const RelaxationOptions& opt) {
    Matrix y;
    if (opt.warm_start && opt.warm_start->rows() == nj_ && opt.warm_start->cols() == nr_) {
      y = project_onto_fixings(*opt.warm_start, fx_);
    } else {
      y = project_onto_fixings(Matrix::Zero(nj_, nr_), fx_);
    }

    RelaxationResult res;
    res.lower_bound = -std::numeric_limits<double>::infinity();
    Matrix grad(nj_, nr_);
    Vector z, w;
    std::vector<int> choice;
    for (;;) {
      z = utility_totals(c_, y);
      w = a_.cwiseQuotient(z.cwiseProduct(z));
      grad = cost_;
      Eigen::Map<Vector>(grad.data(), grad.size()).noalias() -= c_.b.transpose() * w;
      double f = (cost_.cwiseProduct(y)).sum() + a_.cwiseQuotient(z).sum();

      choice = lmo_choices(grad, fx_);
      double gap = 0.0;
      for (Eigen::Index j = 0; j < nj_; ++j) {
        gap += grad.row(j).dot(y.row(j));
        if (choice[static_cast<std::size_t>(j)] != Solution::kClosed) gap -= grad(j, choice[static_cast<std::size_t>(j)]);
      }
      gap = std::max(gap, 0.0);
      res.lower_bound = std::max(res.lower_bound, f - gap);
      res.objective = f;
      res.gap = gap;

      if (gap <= opt.tol_gap * (1.0 + std::abs(f))) {
        res.gap_met = true;
        break;
      }
      if (res.lower_bound >= opt.cutoff) {
        res.cut_off = true;
        break;
      }
      if (res.iterations >= opt.max_iterations) break;
      ++res.iterations;

      // Frank-Wolfe step towards the LMO vertex with exact line search.
      Matrix d = -y;
      for (Eigen::Index j = 0; j < nj_; ++j)
        if (choice[static_cast<std::size_t>(j)] != Solution::kClosed) d(j, choice[static_cast<std::size_t>(j)]) += 1.0;
      const Vector dz = c_.b * Eigen::Map<const Vector>(d.data(), d.size());
      const double step = line_search(z, dz, cost_.cwiseProduct(d).sum(), 1.0);
      y += step * d;
      z += step * dz;

      if (opt.pairwise_sweeps)
        for (Eigen::Index j = 0; j < nj_; ++j) pairwise_block(j, y, z);
    }

    res.point = FractionalPoint(y.cwiseMax(0.0), 1e-9);
    return res;
  }

 private:
  /// Minimizes phi(t) = lin*t + sum_i a_i / (z_i + t dz_i) over [0, tmax].
  double line_search(const Vector& z, const Vector& dz, double lin, double tmax) const {
    auto deriv = [&](double t, double* second) {
      double d1 = lin, d2 = 0.0;
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        if (dz[i] == 0.0) continue;
        const double zi = z[i] + t * dz[i];
        const double q = a_[i] * dz[i] / (zi * zi);
        d1 -= q;
        d2 += 2.0 * q * dz[i] / zi;
      }
      if (second) *second = d2;
      return d1;
    };
    if (deriv(0.0, nullptr) >= 0.0) return 0.0;
    if (deriv(tmax, nullptr) <= 0.0) return tmax;
    double lo = 0.0, hi = tmax, t = 0.5 * tmax;
    for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
      double d2 = 0.0;
      const double d1 = deriv(t, &d2);
      if (d1 == 0.0) return t;
      (d1 > 0.0 ? hi : lo) = t;
      const double newton = d2 > 0.0 ? t - d1 / d2 : lo - 1.0;
      t = (newton > lo && newton < hi) ? newton : 0.5 * (lo + hi);
    }
    return std::clamp(t, lo, hi);
  }

  /// Moves weight inside facility j from its worst supported vertex to its
  /// best vertex. The closed vertex has weight 1 - sum_r y_jr.
  void pairwise_block(Eigen::Index j, Matrix& y, Vector& z) const {
    const auto& fx = fx_[static_cast<std::size_t>(j)];
    if (fx.status == FacilityStatus::Closed) return;
    const auto ni = z.size();

    double g[kMaxLevels];
    for (Eigen::Index r = 0; r < nr_; ++r) {
      if (!has_level(fx.levels, static_cast<std::size_t>(r))) continue;
      const auto col = j * nr_ + r;
      double acc = cost_(j, r);
      for (Eigen::Index i = 0; i < ni; ++i) acc -= a_[i] * c_.b(i, col) / (z[i] * z[i]);
      g[r] = acc;
    }

    const bool closed_ok = fx.status == FacilityStatus::Free;
    const double closed_weight = closed_ok ? 1.0 - y.row(j).sum() : 0.0;

    int toward = Solution::kClosed, away = Solution::kClosed;
    double g_toward = closed_ok ? 0.0 : std::numeric_limits<double>::infinity();
    double g_away = -std::numeric_limits<double>::infinity();
    if (closed_ok && closed_weight > 0.0) g_away = 0.0;
    for (Eigen::Index r = 0; r < nr_; ++r) {
      if (!has_level(fx.levels, static_cast<std::size_t>(r))) continue;
      if (g[r] < g_toward) {
        g_toward = g[r];
        toward = static_cast<int>(r);
      }
      if (y(j, r) > 0.0 && g[r] > g_away) {
        g_away = g[r];
        away = static_cast<int>(r);
      }
    }
    if (toward == away || !(g_away - g_toward > 0.0)) return;
    if (!closed_ok && toward == Solution::kClosed) return;

    const double tmax = away == Solution::kClosed ? closed_weight : y(j, away);
    if (!(tmax > 0.0)) return;
    Vector dz = Vector::Zero(ni);
    double lin = 0.0;
    if (toward != Solution::kClosed) {
      dz += c_.b.col(j * nr_ + toward);
      lin += cost_(j, toward);
    }
    if (away != Solution::kClosed) {
      dz -= c_.b.col(j * nr_ + away);
      lin -= cost_(j, away);
    }
    const double t = line_search(z, dz, lin, tmax);
    if (t <= 0.0) return;
    if (toward != Solution::kClosed) y(j, toward) += t;
    if (away != Solution::kClosed) y(j, away) = (t >= tmax) ? 0.0 : y(j, away) - t;
    z += t * dz;
  }

  const Instance& inst_;
  const DerivedCoefficients& c_;
  const NodeFixings& fx_;
  Matrix cost_;
  Vector a_;
  Eigen::Index nj_ = 0, nr_ = 0;
};

}  // namespace

RelaxationResult solve_relaxation(const Instance& instance, const DerivedCoefficients& coeffs,
                                  const NodeFixings& fixings, const RelaxationOptions& options) {
  if (!(options.tol_gap > 0.0)) throw std::invalid_argument("tol_gap must be > 0");
  if (fixings.num_candidates() != instance.num_candidates() || fixings.num_levels() != instance.num_levels())
    throw std::invalid_argument("fixings do not match the instance dimensions");
  return FrankWolfe(instance, coeffs, fixings).run(options);
}

}  // namespace cfld
