#include "cfld/oa.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <stdexcept>
#include <tuple>

#include "cfld/extsolver.hpp"
#include "cfld/formulations.hpp"
#include "cfld/lp.hpp"

namespace cfld {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// CutPool
// ---------------------------------------------------------------------------

bool CutPool::add(const Instance& instance, const DerivedCoefficients& coeffs, const Solution& point) {
  point.check_against(instance);
  if (contains(point)) return false;
  const auto ni = static_cast<Eigen::Index>(coeffs.num_zones());
  const Matrix y = point.y_matrix(instance.num_levels());
  CutPoint cp;
  cp.point = point;
  cp.z = utility_totals(coeffs, y);
  cp.intercept = cp.z.cwiseInverse();
  cp.gradient = Matrix(ni, coeffs.b.cols());
  cp.offset = Vector(ni);
  const Eigen::Map<const Eigen::RowVectorXd> yflat(y.data(), y.size());
  for (Eigen::Index i = 0; i < ni; ++i) {
    const double zi = cp.z[i];
    cp.gradient.row(i) = -coeffs.b.row(i) / (zi * zi);
    cp.offset[i] = cp.intercept[i] - cp.gradient.row(i).dot(yflat);
  }
  points_.push_back(std::move(cp));
  return true;
}

bool CutPool::contains(const Solution& point) const {
  return std::any_of(points_.begin(), points_.end(), [&](const CutPoint& c) { return c.point == point; });
}

double CutPool::value(std::size_t k, std::size_t i, const Solution& s) const {
  const auto& cp = points_[k];
  const auto nr = static_cast<std::size_t>(cp.gradient.cols()) / s.num_candidates();
  double v = cp.offset[static_cast<Eigen::Index>(i)];
  for (std::size_t j = 0; j < s.num_candidates(); ++j)
    if (s.is_open(j))
      v += cp.gradient(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j * nr + static_cast<std::size_t>(s.level(j))));
  return v;
}

Vector CutPool::min_beta(const DerivedCoefficients& coeffs, const Solution& s) const {
  Vector beta = coeffs.beta_lower;
  for (std::size_t k = 0; k < points_.size(); ++k)
    for (std::size_t i = 0; i < coeffs.num_zones(); ++i)
      beta[static_cast<Eigen::Index>(i)] = std::max(beta[static_cast<Eigen::Index>(i)], value(k, i, s));
  return beta;
}

namespace {

double cost_part(const Instance& inst, const Solution& s) {
  double v = 0.0;
  for (std::size_t j = 0; j < s.num_candidates(); ++j)
    if (s.is_open(j)) v += inst.fixed_cost(j) + inst.level_cost(j, static_cast<std::size_t>(s.level(j)));
  return v;
}

}  // namespace

double master_value(const Instance& instance, const DerivedCoefficients& coeffs, const CutPool& cuts, const Solution& s) {
  s.check_against(instance);
  const Vector beta = cuts.min_beta(coeffs, s);
  double v = cost_part(instance, s);
  for (std::size_t i = 0; i < instance.num_zones(); ++i) v += instance.buying_power(i) * beta[static_cast<Eigen::Index>(i)];
  return v;
}

// ---------------------------------------------------------------------------
// Exhaustive master
// ---------------------------------------------------------------------------

MasterResult master_exhaustive(const Instance& instance, const DerivedCoefficients& coeffs, const CutPool& cuts,
                               std::uint64_t cap) {
  const auto nj = instance.num_candidates();
  const auto nr = instance.num_levels();
  const auto total = configuration_count(nj, nr);
  if (total > cap)
    throw EnumerationCapExceeded("master enumeration needs " + std::to_string(total) + " configurations, cap is " +
                                 std::to_string(cap));
  MasterResult best;
  best.objective = kInf;
  std::vector<int> digits(nj, 0);
  for (std::uint64_t n = 0; n < total; ++n) {
    std::vector<int> levels(nj);
    for (std::size_t j = 0; j < nj; ++j) levels[j] = digits[j] - 1;
    Solution s(std::move(levels));
    const double v = master_value(instance, coeffs, cuts, s);
    if (v < best.objective || (v == best.objective && lex_less_y(s, best.solution))) {
      best.objective = v;
      best.solution = std::move(s);
    }
    for (std::size_t j = nj; j-- > 0;) {
      if (++digits[j] <= static_cast<int>(nr)) break;
      digits[j] = 0;
    }
  }
  best.lower_bound = best.objective;
  best.proven = true;
  best.nodes = total;
  return best;
}

// ---------------------------------------------------------------------------
// Master branch-and-bound
//
// Every cut for zone i has the form beta_i >= o_ik - s_ik * u_i(y) with
// u_i = sum_jr b_ijr y_jr and s_ik = 1 / zbar_ik^2. Since beta_i >= beta^L_i
// as well, a single open facility can push a cut no lower than beta^L_i, so
// each coefficient s_ik b_ijr may be capped at o_ik - beta^L_i without
// changing the master value at any binary point:
//   beta_i >= o_ik - sum_jr t_ikjr y_jr,  t_ikjr = min(s_ik b_ijr, o_ik - beta^L_i).
// Node bounds come from the LP relaxation of this capped system, solved by a
// warm-started dual simplex. The LP duals are turned into multipliers
// lambda_i in {lambda >= 0, sum_k lambda_ik <= 1}, and the Lagrangian at
// lambda, which separates over facilities, is what certifies the bound.
// ---------------------------------------------------------------------------

namespace {

using OptionMask = std::uint64_t;  // bit 0 = closed, bit r+1 = level r

struct MNode {
  std::vector<OptionMask> allowed;
  Vector lambda;
  double bound = 0.0;
  std::uint32_t depth = 0;
  std::uint64_t seq = 0;
};

struct MNodeOrder {
  bool operator()(const MNode& a, const MNode& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.seq > b.seq;
  }
};

/// Euclidean projection onto {x >= 0, sum x <= 1}.
void project_capped_simplex(double* x, std::size_t n) {
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = std::max(0.0, x[k]);
    sum += x[k];
  }
  if (sum <= 1.0) return;
  std::vector<double> v(x, x + n);
  std::sort(v.begin(), v.end(), std::greater<>());
  double cum = 0.0, tau = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    cum += v[k];
    const double t = (cum - 1.0) / static_cast<double>(k + 1);
    if (k + 1 == n || v[k + 1] <= t) {
      tau = t;
      break;
    }
  }
  for (std::size_t k = 0; k < n; ++k) x[k] = std::max(0.0, x[k] - tau);
}

class MasterBnB {
 public:
  MasterBnB(const Instance& inst, const DerivedCoefficients& c, const CutPool& cuts, const MasterBnBOptions& opt)
      : inst_(inst), c_(c), cuts_(cuts), opt_(opt), ni_(inst.num_zones()), nj_(inst.num_candidates()),
        nr_(inst.num_levels()), nk_(cuts.size()), a_(static_cast<Eigen::Index>(ni_)) {
    for (std::size_t i = 0; i < ni_; ++i) a_[static_cast<Eigen::Index>(i)] = inst.buying_power(i);
    const auto rows = static_cast<Eigen::Index>(ni_ * nk_);
    o_ = Vector(rows);
    s_ = Vector(rows);
    excess_ = Vector(rows);
    t_ = Matrix(rows, c.b.cols());
    for (std::size_t i = 0; i < ni_; ++i)
      for (std::size_t k = 0; k < nk_; ++k) {
        const auto row = static_cast<Eigen::Index>(i * nk_ + k);
        const auto ii = static_cast<Eigen::Index>(i);
        const double z = cuts[k].z[ii];
        o_[row] = cuts[k].offset[ii];
        s_[row] = 1.0 / (z * z);
        excess_[row] = std::max(0.0, o_[row] - c.beta_lower[ii]);
        t_.row(row) = (s_[row] * c.b.row(ii)).cwiseMin(excess_[row]);
      }
    cost_.resize(nj_ * (nr_ + 1));
    for (std::size_t j = 0; j < nj_; ++j) {
      cost_[j * (nr_ + 1)] = 0.0;
      for (std::size_t r = 0; r < nr_; ++r) cost_[j * (nr_ + 1) + r + 1] = inst.fixed_cost(j) + inst.level_cost(j, r);
    }
    full_ = (OptionMask{1} << (nr_ + 1)) - 1;
    if (nk_ > 0) build_lp();
  }

  MasterResult run() {
    offer(Solution::all_closed(nj_));
    for (const auto& cp : cuts_) offer(cp.point);

    MNode root;
    root.allowed.assign(nj_, full_);
    root.lambda = Vector::Zero(static_cast<Eigen::Index>(ni_ * nk_));
    // Seed with the cut that is active at the incumbent in each zone.
    std::vector<int> choice(nj_);
    for (std::size_t j = 0; j < nj_; ++j) choice[j] = best_.level(j) + 1;
    const Vector ty = capped_activity(choice);
    for (std::size_t i = 0; i < ni_; ++i) {
      double top = 0.0;
      std::size_t arg = nk_;
      for (std::size_t k = 0; k < nk_; ++k) {
        const auto row = static_cast<Eigen::Index>(i * nk_ + k);
        const double v = excess_[row] - ty[row];
        if (v > top) {
          top = v;
          arg = k;
        }
      }
      if (arg < nk_) root.lambda[static_cast<Eigen::Index>(i * nk_ + arg)] = 1.0;
    }
    root.bound = -kInf;
    open_.push(std::move(root));

    bool capped = false;
    bool first = true;
    while (!open_.empty()) {
      if (nodes_ >= opt_.node_cap) {
        capped = true;
        break;
      }
      MNode node = open_.top();
      open_.pop();
      if (node.bound >= prune_level()) {
        pruned_min_ = std::min(pruned_min_, node.bound);
        continue;
      }
      ++nodes_;
      process(node, first ? opt_.root_dual_iterations : opt_.node_dual_iterations);
      first = false;
    }

    MasterResult res;
    res.solution = best_;
    res.objective = master_value(inst_, c_, cuts_, best_);
    double lb = std::min(ub_, pruned_min_);
    if (!open_.empty()) lb = std::min(lb, open_.top().bound);
    res.lower_bound = std::min(lb, res.objective);
    res.proven = !capped && open_.empty();
    res.nodes = nodes_;
    return res;
  }

 private:
  double prune_level() const { return ub_ - opt_.rel_tol * (1.0 + std::abs(ub_)); }

  double phi(std::size_t i, double u) const {
    double v = c_.beta_lower[static_cast<Eigen::Index>(i)];
    for (std::size_t k = 0; k < nk_; ++k) {
      const auto row = static_cast<Eigen::Index>(i * nk_ + k);
      v = std::max(v, o_[row] - s_[row] * u);
    }
    return v;
  }

  Eigen::Index col(std::size_t j, int option) const {
    return static_cast<Eigen::Index>(c_.column(j, static_cast<std::size_t>(option - 1)));
  }

  /// Master value of a choice vector (option 0 = closed).
  double value_of(const std::vector<int>& choice) const {
    Vector u = Vector::Zero(static_cast<Eigen::Index>(ni_));
    double v = 0.0;
    for (std::size_t j = 0; j < nj_; ++j) {
      v += cost_[j * (nr_ + 1) + static_cast<std::size_t>(choice[j])];
      if (choice[j] > 0) u += c_.b.col(col(j, choice[j]));
    }
    for (std::size_t i = 0; i < ni_; ++i) v += a_[static_cast<Eigen::Index>(i)] * phi(i, u[static_cast<Eigen::Index>(i)]);
    return v;
  }

  /// sum_jr t_ikjr y_jr for every (i, k).
  Vector capped_activity(const std::vector<int>& choice) const {
    Vector ty = Vector::Zero(static_cast<Eigen::Index>(ni_ * nk_));
    for (std::size_t j = 0; j < nj_; ++j)
      if (choice[j] > 0) ty += t_.col(col(j, choice[j]));
    return ty;
  }

  void offer_choice(const std::vector<int>& choice) {
    const double v = value_of(choice);
    if (v > ub_) return;
    std::vector<int> lv(nj_);
    for (std::size_t j = 0; j < nj_; ++j) lv[j] = choice[j] - 1;
    Solution s(std::move(lv));
    if (v < ub_ || lex_less_y(s, best_)) {
      ub_ = v;
      best_ = std::move(s);
    }
  }

  void offer(const Solution& s) {
    std::vector<int> choice(nj_);
    for (std::size_t j = 0; j < nj_; ++j) choice[j] = s.level(j) + 1;
    offer_choice(choice);
  }

  /// Cheapest allowed choice per facility plus each zone at the largest
  /// utility any completion can reach.
  double combinatorial_bound(const std::vector<OptionMask>& allowed) const {
    double v = 0.0;
    Vector umax = Vector::Zero(static_cast<Eigen::Index>(ni_));
    for (std::size_t j = 0; j < nj_; ++j) {
      double cmin = kInf;
      for (std::size_t o = 0; o <= nr_; ++o)
        if ((allowed[j] >> o) & 1U) cmin = std::min(cmin, cost_[j * (nr_ + 1) + o]);
      v += cmin;
      // b is nondecreasing in the level, so the highest allowed level dominates.
      for (std::size_t o = nr_; o >= 1; --o)
        if ((allowed[j] >> o) & 1U) {
          umax += c_.b.col(col(j, static_cast<int>(o)));
          break;
        }
    }
    for (std::size_t i = 0; i < ni_; ++i) v += a_[static_cast<Eigen::Index>(i)] * phi(i, umax[static_cast<Eigen::Index>(i)]);
    return v;
  }

  struct DualEval {
    double value = 0.0;
    std::vector<int> choice;
  };

  /// Lagrangian value at lambda over the node; fills per-option reduced
  /// values when `reduced` is given.
  DualEval dual(const std::vector<OptionMask>& allowed, const Vector& lambda, std::vector<double>* reduced) const {
    DualEval e;
    e.choice.assign(nj_, 0);
    double v = 0.0;
    Vector w(static_cast<Eigen::Index>(ni_ * nk_));
    for (std::size_t i = 0; i < ni_; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      v += a_[ii] * c_.beta_lower[ii];
      for (std::size_t k = 0; k < nk_; ++k) {
        const auto row = static_cast<Eigen::Index>(i * nk_ + k);
        w[row] = a_[ii] * lambda[row];
        v += w[row] * excess_[row];
      }
    }
    const Vector price = t_.transpose() * w;
    if (reduced) reduced->assign(nj_ * (nr_ + 1), kInf);
    for (std::size_t j = 0; j < nj_; ++j) {
      double best = kInf;
      int arg = 0;
      for (std::size_t o = 0; o <= nr_; ++o) {
        if (!((allowed[j] >> o) & 1U)) continue;
        const double val = o == 0 ? 0.0 : cost_[j * (nr_ + 1) + o] - price[col(j, static_cast<int>(o))];
        if (reduced) (*reduced)[j * (nr_ + 1) + o] = val;
        if (val < best) {
          best = val;
          arg = static_cast<int>(o);
        }
      }
      v += best;
      e.choice[j] = arg;
    }
    e.value = v;
    return e;
  }

  /// Projected subgradient ascent on lambda; returns the best multipliers.
  std::pair<Vector, double> ascend(const std::vector<OptionMask>& allowed, Vector lambda, std::size_t iterations) {
    DualEval cur = dual(allowed, lambda, nullptr);
    offer_choice(cur.choice);
    Vector best_lambda = lambda;
    double best = cur.value;
    double theta = 1.0;
    int stall = 0;
    Vector g(lambda.size());
    for (std::size_t it = 0; it < iterations && nk_ > 0; ++it) {
      if (best >= prune_level()) break;
      const Vector ty = capped_activity(cur.choice);
      for (std::size_t i = 0; i < ni_; ++i)
        for (std::size_t k = 0; k < nk_; ++k) {
          const auto row = static_cast<Eigen::Index>(i * nk_ + k);
          g[row] = a_[static_cast<Eigen::Index>(i)] * (excess_[row] - ty[row]);
        }
      const double gg = g.squaredNorm();
      if (gg <= 0.0) break;
      const double step = theta * std::max(ub_ - cur.value, 1e-12 * (1.0 + std::abs(best))) / gg;
      lambda += step * g;
      for (std::size_t i = 0; i < ni_; ++i) project_capped_simplex(lambda.data() + i * nk_, nk_);
      cur = dual(allowed, lambda, nullptr);
      offer_choice(cur.choice);
      if (cur.value > best + 1e-12 * (1.0 + std::abs(best))) {
        best = cur.value;
        best_lambda = lambda;
        stall = 0;
      } else if (++stall >= 3) {
        theta *= 0.5;
        stall = 0;
        lambda = best_lambda;
        cur = dual(allowed, lambda, nullptr);
        if (theta < 1e-6) break;
      }
    }
    return {best_lambda, best};
  }

  // Columns: y (J*R), beta (I), cut surplus (I*K), facility slack (J).
  // Rows: beta_i + sum t_ikjr y_jr - surplus_ik = o_ik, then sum_r y_jr + slack_j = 1.
  void build_lp() {
    const std::size_t jr = nj_ * nr_;
    const std::size_t ncut = ni_ * nk_;
    const std::size_t m = ncut + nj_;
    const std::size_t n = jr + ni_ + ncut + nj_;
    beta0_ = jr;
    surplus0_ = jr + ni_;
    slack0_ = surplus0_ + ncut;
    Matrix A = Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    Vector b(static_cast<Eigen::Index>(m)), c = Vector::Zero(static_cast<Eigen::Index>(n));
    Vector lo = Vector::Zero(static_cast<Eigen::Index>(n)), up = Vector::Ones(static_cast<Eigen::Index>(n));
    std::vector<std::size_t> slacks(m);
    for (std::size_t row = 0; row < ncut; ++row) {
      const auto r = static_cast<Eigen::Index>(row);
      const std::size_t i = row / nk_;
      A.row(r).head(static_cast<Eigen::Index>(jr)) = t_.row(r);
      A(r, static_cast<Eigen::Index>(beta0_ + i)) = 1.0;
      A(r, static_cast<Eigen::Index>(surplus0_ + row)) = -1.0;
      b[r] = o_[r];
      slacks[row] = surplus0_ + row;
      up[static_cast<Eigen::Index>(surplus0_ + row)] = kInf;
    }
    for (std::size_t j = 0; j < nj_; ++j) {
      const auto r = static_cast<Eigen::Index>(ncut + j);
      for (std::size_t l = 0; l < nr_; ++l) {
        A(r, col(j, static_cast<int>(l + 1))) = 1.0;
        c[col(j, static_cast<int>(l + 1))] = cost_[j * (nr_ + 1) + l + 1];
      }
      A(r, static_cast<Eigen::Index>(slack0_ + j)) = 1.0;
      b[r] = 1.0;
      slacks[ncut + j] = slack0_ + j;
    }
    for (std::size_t i = 0; i < ni_; ++i) {
      const auto v = static_cast<Eigen::Index>(beta0_ + i);
      c[v] = a_[static_cast<Eigen::Index>(i)];
      lo[v] = c_.beta_lower[static_cast<Eigen::Index>(i)];
    }
    lp_.emplace(std::move(A), std::move(b), std::move(c), std::move(lo), std::move(up), std::move(slacks));
  }

  /// Solves the node LP and converts its duals to multipliers. Returns false
  /// when no LP is available or the simplex did not finish.
  bool solve_lp(const std::vector<OptionMask>& allowed, Vector& lambda) {
    if (!lp_) return false;
    for (std::size_t j = 0; j < nj_; ++j) {
      lp_->set_bounds(slack0_ + j, 0.0, (allowed[j] & 1U) ? 1.0 : 0.0);
      for (std::size_t l = 0; l < nr_; ++l)
        lp_->set_bounds(static_cast<std::size_t>(col(j, static_cast<int>(l + 1))), 0.0,
                        ((allowed[j] >> (l + 1)) & 1U) ? 1.0 : 0.0);
    }
    if (lp_->solve(kLpIterationCap) != DualSimplex::Status::Optimal) {
      lp_->refactor();
      return false;
    }
    const Vector y = lp_->row_duals();
    lambda = Vector::Zero(static_cast<Eigen::Index>(ni_ * nk_));
    for (std::size_t i = 0; i < ni_; ++i) {
      const double ai = a_[static_cast<Eigen::Index>(i)];
      if (!(ai > 0.0)) continue;
      for (std::size_t k = 0; k < nk_; ++k) {
        const auto row = static_cast<Eigen::Index>(i * nk_ + k);
        lambda[row] = std::max(0.0, y[row]) / ai;
      }
      project_capped_simplex(lambda.data() + i * nk_, nk_);
    }
    return true;
  }

  std::vector<int> rounded_lp_point(const std::vector<OptionMask>& allowed) const {
    std::vector<int> choice(nj_, 0);
    for (std::size_t j = 0; j < nj_; ++j) {
      double mass = 0.0;
      for (std::size_t l = 0; l < nr_; ++l) mass += lp_->x()[col(j, static_cast<int>(l + 1))];
      double top = (allowed[j] & 1U) ? 1.0 - mass : -kInf;
      for (std::size_t l = 0; l < nr_; ++l) {
        if (!((allowed[j] >> (l + 1)) & 1U)) continue;
        const double v = lp_->x()[col(j, static_cast<int>(l + 1))];
        if (v > top) {
          top = v;
          choice[j] = static_cast<int>(l + 1);
        }
      }
    }
    return choice;
  }

  static constexpr std::size_t kLpIterationCap = 20000;

  bool finish_leaf(const std::vector<OptionMask>& allowed) {
    if (!std::all_of(allowed.begin(), allowed.end(), [](OptionMask m) { return std::popcount(m) == 1; })) return false;
    std::vector<int> choice(nj_);
    for (std::size_t j = 0; j < nj_; ++j) choice[j] = std::countr_zero(allowed[j]);
    pruned_min_ = std::min(pruned_min_, value_of(choice));
    offer_choice(choice);
    return true;
  }

  void process(MNode& node, std::size_t iterations) {
    auto& allowed = node.allowed;
    if (finish_leaf(allowed)) return;
    double bound = std::max(node.bound, combinatorial_bound(allowed));
    if (bound >= prune_level()) {
      pruned_min_ = std::min(pruned_min_, bound);
      return;
    }

    Vector lambda;
    double lval = -kInf;
    const bool lp_ok = solve_lp(allowed, lambda);
    if (!lp_ok) std::tie(lambda, lval) = ascend(allowed, node.lambda, iterations);
    std::vector<double> reduced;
    const DualEval at = dual(allowed, lambda, &reduced);
    offer_choice(at.choice);
    if (lp_ok) offer_choice(rounded_lp_point(allowed));
    bound = std::max({bound, lval, at.value});
    if (bound >= prune_level()) {
      pruned_min_ = std::min(pruned_min_, bound);
      return;
    }

    // Reduced-cost fixing against the Lagrangian at lambda.
    std::vector<double> minval(nj_, kInf);
    for (std::size_t j = 0; j < nj_; ++j)
      for (std::size_t o = 0; o <= nr_; ++o)
        if ((allowed[j] >> o) & 1U) minval[j] = std::min(minval[j], reduced[j * (nr_ + 1) + o]);
    const double level = prune_level();
    for (std::size_t j = 0; j < nj_; ++j)
      for (std::size_t o = 0; o <= nr_; ++o) {
        if (!((allowed[j] >> o) & 1U)) continue;
        const double b = at.value + (reduced[j * (nr_ + 1) + o] - minval[j]);
        if (b >= level) {
          allowed[j] &= ~(OptionMask{1} << o);
          pruned_min_ = std::min(pruned_min_, b);
        }
      }
    if (finish_leaf(allowed)) return;

    // Branch on the most fractional facility of the LP point, or else on the
    // facility whose two best reduced values are closest.
    std::size_t pick = nj_;
    if (lp_ok) {
      double top = 1e-6;
      for (std::size_t j = 0; j < nj_; ++j) {
        if (std::popcount(allowed[j]) < 2) continue;
        double mass = 0.0, peak = 0.0;
        for (std::size_t r = 0; r < nr_; ++r) {
          const double v = lp_->x()[col(j, static_cast<int>(r + 1))];
          mass += v;
          peak = std::max(peak, v);
        }
        const double score = std::max(std::min(mass, 1.0 - mass), mass - peak);
        if (score > top) {
          top = score;
          pick = j;
        }
      }
    }
    if (pick == nj_) {
      double pick_gap = kInf;
      for (std::size_t j = 0; j < nj_; ++j) {
        if (std::popcount(allowed[j]) < 2) continue;
        double m1 = kInf, m2 = kInf;
        for (std::size_t o = 0; o <= nr_; ++o) {
          if (!((allowed[j] >> o) & 1U)) continue;
          const double v = reduced[j * (nr_ + 1) + o];
          if (v < m1) {
            m2 = m1;
            m1 = v;
          } else if (v < m2) {
            m2 = v;
          }
        }
        if (m2 - m1 < pick_gap) {
          pick_gap = m2 - m1;
          pick = j;
        }
      }
    }
    for (std::size_t o = 0; o <= nr_; ++o) {
      if (!((allowed[pick] >> o) & 1U)) continue;
      MNode child;
      child.allowed = allowed;
      child.allowed[pick] = OptionMask{1} << o;
      child.lambda = lambda;
      child.bound = std::max(bound, at.value + (reduced[pick * (nr_ + 1) + o] - minval[pick]));
      child.depth = node.depth + 1;
      child.seq = ++seq_;
      if (child.bound >= prune_level()) {
        pruned_min_ = std::min(pruned_min_, child.bound);
        continue;
      }
      open_.push(std::move(child));
    }
  }

  const Instance& inst_;
  const DerivedCoefficients& c_;
  const CutPool& cuts_;
  const MasterBnBOptions& opt_;
  std::size_t ni_, nj_, nr_, nk_;
  Vector a_;
  Vector o_, s_, excess_;
  Matrix t_;
  std::vector<double> cost_;
  OptionMask full_ = 0;
  std::optional<DualSimplex> lp_;
  std::size_t beta0_ = 0, surplus0_ = 0, slack0_ = 0;
  std::priority_queue<MNode, std::vector<MNode>, MNodeOrder> open_;
  Solution best_;
  double ub_ = kInf;
  double pruned_min_ = kInf;
  std::uint64_t nodes_ = 0;
  std::uint64_t seq_ = 0;
};

}  // namespace

MasterResult master_bnb(const Instance& instance, const DerivedCoefficients& coeffs, const CutPool& cuts,
                        const MasterBnBOptions& options) {
  if (!(options.rel_tol > 0.0)) throw std::invalid_argument("rel_tol must be > 0");
  if (instance.num_levels() + 1 > 64) throw std::invalid_argument("at most 63 attractiveness levels are supported");
  return MasterBnB(instance, coeffs, cuts, options).run();
}

// ---------------------------------------------------------------------------
// External master
// ---------------------------------------------------------------------------

MasterResult master_external(const Instance& instance, const DerivedCoefficients& coeffs, const CutPool& cuts,
                             const AdapterConfig& adapter, double time_limit_seconds) {
  const FormulationModel model = build_oa_master(instance, coeffs, cuts);
  const auto text = invoke_on_text(adapter, export_mps(model), ".mps", time_limit_seconds);
  const auto parsed = parse_solution(text, model);
  const auto report = check_feasibility(model, parsed.assignment);
  if (!report.feasible(1e-6))
    throw MasterRejected("external master solution violates the model by " + std::to_string(report.max_violation()));
  Solution s;
  try {
    s = solution_from_assignment(parsed.assignment, instance.num_candidates(), instance.num_levels());
  } catch (const InfeasibleSolution& e) {
    throw MasterRejected(std::string("external master solution is not in the feasible set: ") + e.what());
  }
  MasterResult res;
  res.solution = s;
  res.objective = master_value(instance, coeffs, cuts, s);
  // Optimality is as claimed by the external solver.
  res.lower_bound = res.objective;
  res.proven = true;
  res.nodes = 0;
  return res;
}

// ---------------------------------------------------------------------------
// Outer approximation loop
// ---------------------------------------------------------------------------

std::string to_string(OATermination t) {
  switch (t) {
    case OATermination::RepeatInT: return "repeat-in-T";
    case OATermination::ObjectiveGap: return "objective-gap";
    case OATermination::IterationCap: return "iteration-cap";
  }
  return "unknown";
}

Solution default_oa_start(const Instance& instance) {
  return Solution::all_open(instance.num_candidates(), static_cast<int>(instance.num_levels()) - 1);
}

OAReport run_oa(const Instance& instance, const DerivedCoefficients& coeffs, const MasterOracle& master,
                const Solution& init, const OAOptions& options) {
  init.check_against(instance);
  CutPool pool;
  pool.add(instance, coeffs, init);
  if (options.add_closed_point) pool.add(instance, coeffs, Solution::all_closed(instance.num_candidates()));

  OAReport rep;
  double best = kInf;
  auto consider = [&](const Solution& s) {
    const double v = min_objective(instance, coeffs, s);
    if (v < best || (v == best && lex_less_y(s, rep.solution))) {
      best = v;
      rep.solution = s;
    }
  };
  for (const auto& cp : pool) consider(cp.point);

  bool stopped = false;
  for (std::size_t n = 1; n <= options.max_iterations; ++n) {
    MasterResult mr;
    try {
      mr = master(instance, coeffs, pool);
    } catch (const std::exception& e) {
      throw OAError(n, e.what());
    }
    rep.iterations = n;
    rep.master_objectives.push_back(mr.objective);
    rep.master_lower_bounds.push_back(mr.lower_bound);
    consider(mr.solution);
    if (pool.contains(mr.solution)) {
      rep.termination = OATermination::RepeatInT;
      rep.proven = mr.proven;
      stopped = true;
      break;
    }
    if (mr.lower_bound >= best - options.gap_tol * (1.0 + std::abs(best))) {
      rep.termination = OATermination::ObjectiveGap;
      rep.proven = mr.proven;
      stopped = true;
      break;
    }
    pool.add(instance, coeffs, mr.solution);
  }
  if (!stopped) {
    rep.termination = OATermination::IterationCap;
    rep.proven = false;
  }
  rep.objective = best;
  rep.profit = profit(instance, coeffs, rep.solution);
  rep.cuts = pool.size();
  return rep;
}

}  // namespace cfld
