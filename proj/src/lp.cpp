#include "cfld/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/LU>

namespace cfld {

namespace {
constexpr double kPrimalTol = 1e-9;
constexpr double kPivotTol = 1e-9;
}  // namespace

DualSimplex::DualSimplex(Matrix A, Vector b, Vector c, Vector lower, Vector upper,
                         std::vector<std::size_t> slack_columns)
    : m_(static_cast<std::size_t>(A.rows())),
      n_(static_cast<std::size_t>(A.cols())),
      A_(std::move(A)),
      b_(std::move(b)),
      c_(std::move(c)),
      lower_(std::move(lower)),
      upper_(std::move(upper)),
      slack_(std::move(slack_columns)) {
  const auto n = static_cast<Eigen::Index>(n_);
  if (static_cast<std::size_t>(b_.size()) != m_ || c_.size() != n || lower_.size() != n || upper_.size() != n ||
      slack_.size() != m_)
    throw std::invalid_argument("DualSimplex: inconsistent dimensions");
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!std::isfinite(lower_[j])) throw std::invalid_argument("DualSimplex: lower bounds must be finite");
    if (upper_[j] < lower_[j]) throw std::invalid_argument("DualSimplex: empty bound interval");
  }
  slack_sign_.resize(m_);
  for (std::size_t i = 0; i < m_; ++i) {
    const auto col = static_cast<Eigen::Index>(slack_[i]);
    if (slack_[i] >= n_) throw std::invalid_argument("DualSimplex: slack column out of range");
    for (std::size_t k = 0; k < m_; ++k) {
      const double v = A_(static_cast<Eigen::Index>(k), col);
      if (k == i ? std::abs(v) != 1.0 : v != 0.0) throw std::invalid_argument("DualSimplex: slack is not a unit column");
    }
    slack_sign_[i] = A_(static_cast<Eigen::Index>(i), col);
  }
  basis_ = slack_;
  state_.assign(n_, VarState::AtLower);
  for (auto j : basis_) state_[j] = VarState::Basic;
  x_ = Vector::Zero(n);
  refactor();
}

void DualSimplex::refactor() {
  const auto m = static_cast<Eigen::Index>(m_);
  Eigen::MatrixXd B(m, m);
  Vector cb(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    B.col(i) = A_.col(static_cast<Eigen::Index>(basis_[static_cast<std::size_t>(i)]));
    cb[i] = c_[static_cast<Eigen::Index>(basis_[static_cast<std::size_t>(i)])];
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
  T_ = lu.solve(Eigen::MatrixXd(A_));
  const Vector y = lu.transpose().solve(cb);
  d_ = c_ - A_.transpose() * y;
  for (auto j : basis_) d_[static_cast<Eigen::Index>(j)] = 0.0;
  for (std::size_t j = 0; j < n_; ++j)
    if (state_[j] != VarState::Basic) place_nonbasic(j);
  bbar_ = lu.solve(b_);
  recompute_basic_values();
  since_refactor_ = 0;
}

void DualSimplex::place_nonbasic(std::size_t j) {
  const auto jj = static_cast<Eigen::Index>(j);
  if (d_[jj] < 0.0 && std::isfinite(upper_[jj]) && upper_[jj] > lower_[jj]) {
    state_[j] = VarState::AtUpper;
    x_[jj] = upper_[jj];
  } else {
    state_[j] = VarState::AtLower;
    x_[jj] = lower_[jj];
  }
}

void DualSimplex::recompute_basic_values() {
  Vector xb = bbar_;
  for (std::size_t j = 0; j < n_; ++j) {
    if (state_[j] == VarState::Basic) continue;
    const double v = x_[static_cast<Eigen::Index>(j)];
    if (v != 0.0) xb -= v * T_.col(static_cast<Eigen::Index>(j));
  }
  for (std::size_t i = 0; i < m_; ++i) x_[static_cast<Eigen::Index>(basis_[i])] = xb[static_cast<Eigen::Index>(i)];
  dirty_ = false;
}

void DualSimplex::set_bounds(std::size_t j, double lower, double upper) {
  if (j >= n_) throw std::out_of_range("DualSimplex::set_bounds");
  if (!std::isfinite(lower) || upper < lower) throw std::invalid_argument("DualSimplex::set_bounds: bad interval");
  const auto jj = static_cast<Eigen::Index>(j);
  if (lower_[jj] == lower && upper_[jj] == upper) return;
  lower_[jj] = lower;
  upper_[jj] = upper;
  if (state_[j] != VarState::Basic) {
    place_nonbasic(j);
    dirty_ = true;
  }
}

double DualSimplex::objective() const { return c_.dot(x_); }

Vector DualSimplex::row_duals() const {
  Vector y(static_cast<Eigen::Index>(m_));
  for (std::size_t i = 0; i < m_; ++i) {
    const auto s = static_cast<Eigen::Index>(slack_[i]);
    y[static_cast<Eigen::Index>(i)] = (c_[s] - d_[s]) / slack_sign_[i];
  }
  return y;
}

void DualSimplex::pivot(std::size_t r, std::size_t q, double target) {
  const auto ri = static_cast<Eigen::Index>(r);
  const auto qi = static_cast<Eigen::Index>(q);
  const std::size_t leaving = basis_[r];
  const double alpha = T_(ri, qi);

  // Primal step: move x_q until the leaving variable reaches its bound.
  const double delta = (x_[static_cast<Eigen::Index>(leaving)] - target) / alpha;
  for (std::size_t i = 0; i < m_; ++i)
    x_[static_cast<Eigen::Index>(basis_[i])] -= delta * T_(static_cast<Eigen::Index>(i), qi);
  x_[qi] += delta;
  x_[static_cast<Eigen::Index>(leaving)] = target;

  // Tableau, right-hand side and reduced costs.
  T_.row(ri) /= alpha;
  bbar_[ri] /= alpha;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(m_); ++i) {
    if (i == ri) continue;
    const double f = T_(i, qi);
    if (f == 0.0) continue;
    T_.row(i) -= f * T_.row(ri);
    bbar_[i] -= f * bbar_[ri];
  }
  const double dq = d_[qi];
  if (dq != 0.0) d_ -= dq * T_.row(ri).transpose();
  d_[qi] = 0.0;

  state_[leaving] = target == lower_[static_cast<Eigen::Index>(leaving)] ? VarState::AtLower : VarState::AtUpper;
  state_[q] = VarState::Basic;
  basis_[r] = q;
  ++since_refactor_;
  ++total_iterations_;
}

DualSimplex::Status DualSimplex::solve(std::size_t max_iterations) {
  if (dirty_) recompute_basic_values();
  const double dual_tol = 1e-9 * std::max(1.0, c_.cwiseAbs().maxCoeff());
  for (std::size_t j = 0; j < n_; ++j) {
    if (state_[j] == VarState::Basic) continue;
    const auto jj = static_cast<Eigen::Index>(j);
    if (lower_[jj] == upper_[jj]) continue;
    if (state_[j] == VarState::AtLower && d_[jj] < -dual_tol) return Status::DualInfeasible;
  }

  for (std::size_t it = 0; it < max_iterations; ++it) {
    if (since_refactor_ >= kRefactorEvery) refactor();

    std::size_t r = m_;
    double worst = kPrimalTol;
    bool below = false;
    for (std::size_t i = 0; i < m_; ++i) {
      const auto j = static_cast<Eigen::Index>(basis_[i]);
      const double v = x_[j];
      const double scale = 1.0 + std::abs(v);
      if (lower_[j] - v > worst * scale) {
        worst = (lower_[j] - v) / scale;
        r = i;
        below = true;
      } else if (v - upper_[j] > worst * scale) {
        worst = (v - upper_[j]) / scale;
        r = i;
        below = false;
      }
    }
    if (r == m_) return Status::Optimal;

    // Harris two-pass ratio test on row r.
    const auto ri = static_cast<Eigen::Index>(r);
    auto eligible = [&](std::size_t j, double alpha) {
      if (state_[j] == VarState::Basic) return false;
      const auto jj = static_cast<Eigen::Index>(j);
      if (lower_[jj] == upper_[jj] || std::abs(alpha) <= kPivotTol) return false;
      const bool at_lower = state_[j] == VarState::AtLower;
      return below ? (at_lower ? alpha < 0.0 : alpha > 0.0) : (at_lower ? alpha > 0.0 : alpha < 0.0);
    };
    double bound = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n_; ++j) {
      const double alpha = T_(ri, static_cast<Eigen::Index>(j));
      if (!eligible(j, alpha)) continue;
      bound = std::min(bound, (std::abs(d_[static_cast<Eigen::Index>(j)]) + dual_tol) / std::abs(alpha));
    }
    if (!std::isfinite(bound)) return Status::Infeasible;
    std::size_t q = n_;
    double best_alpha = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
      const double alpha = T_(ri, static_cast<Eigen::Index>(j));
      if (!eligible(j, alpha)) continue;
      if (std::abs(d_[static_cast<Eigen::Index>(j)]) / std::abs(alpha) <= bound && std::abs(alpha) > best_alpha) {
        best_alpha = std::abs(alpha);
        q = j;
      }
    }
    const auto leaving = static_cast<Eigen::Index>(basis_[r]);
    pivot(r, q, below ? lower_[leaving] : upper_[leaving]);
  }
  return Status::IterationLimit;
}

}  // namespace cfld
