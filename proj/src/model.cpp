#include "cfld/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cfld {

namespace {

std::string idx(const char* what, std::size_t i) { return std::string(what) + "[" + std::to_string(i) + "]"; }

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidInstance(msg);
}

bool same_shape(const Matrix& a, const Matrix& b) { return a.rows() == b.rows() && a.cols() == b.cols(); }

}  // namespace

double euclidean(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

Instance::Instance(std::vector<Zone> zones, std::vector<CandidateSite> candidates,
                   std::vector<Competitor> competitors, std::vector<double> levels, Matrix level_costs,
                   Matrix dist_candidates, Matrix dist_competitors)
    : zones_(std::move(zones)),
      candidates_(std::move(candidates)),
      competitors_(std::move(competitors)),
      dist_candidates_(std::move(dist_candidates)),
      dist_competitors_(std::move(dist_competitors)) {
  require(!levels.empty(), "at least one attractiveness level is required");
  require(level_costs.rows() == static_cast<Eigen::Index>(candidates_.size()) &&
              level_costs.cols() == static_cast<Eigen::Index>(levels.size()),
          "level_costs must be |J| x |R|");

  std::vector<std::size_t> order(levels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return levels[a] < levels[b]; });
  levels_.resize(levels.size());
  level_costs_.resize(level_costs.rows(), level_costs.cols());
  for (std::size_t r = 0; r < order.size(); ++r) {
    levels_[r] = levels[order[r]];
    level_costs_.col(static_cast<Eigen::Index>(r)) = level_costs.col(static_cast<Eigen::Index>(order[r]));
  }
  validate();
}

Instance Instance::from_locations(std::vector<Zone> zones, std::vector<CandidateSite> candidates,
                                  std::vector<Competitor> competitors, std::vector<double> levels,
                                  Matrix level_costs) {
  const auto ni = zones.size();
  Matrix dj(ni, candidates.size());
  Matrix dk(ni, competitors.size());
  for (std::size_t i = 0; i < ni; ++i) {
    require(zones[i].location.has_value(), idx("zones", i) + " has no location");
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      require(candidates[j].location.has_value(), idx("candidates", j) + " has no location");
      dj(i, j) = euclidean(*zones[i].location, *candidates[j].location);
    }
    for (std::size_t k = 0; k < competitors.size(); ++k) {
      require(competitors[k].location.has_value(), idx("competitors", k) + " has no location");
      dk(i, k) = euclidean(*zones[i].location, *competitors[k].location);
    }
  }
  return Instance(std::move(zones), std::move(candidates), std::move(competitors), std::move(levels),
                  std::move(level_costs), std::move(dj), std::move(dk));
}

void Instance::validate() const {
  const auto ni = zones_.size(), nj = candidates_.size(), nk = competitors_.size();
  require(ni >= 1, "at least one zone is required");
  require(nj >= 1, "at least one candidate site is required");
  require(nk >= 1, "at least one competitor is required");

  for (std::size_t i = 0; i < ni; ++i)
    require(std::isfinite(zones_[i].buying_power) && zones_[i].buying_power >= 0.0,
            idx("zones", i) + ".buying_power must be finite and >= 0");
  for (std::size_t j = 0; j < nj; ++j)
    require(std::isfinite(candidates_[j].fixed_cost) && candidates_[j].fixed_cost >= 0.0,
            idx("candidates", j) + ".fixed_cost must be finite and >= 0");
  for (std::size_t k = 0; k < nk; ++k)
    require(std::isfinite(competitors_[k].attractiveness) && competitors_[k].attractiveness > 0.0,
            idx("competitors", k) + ".attractiveness must be finite and > 0");
  for (std::size_t r = 0; r < levels_.size(); ++r)
    require(std::isfinite(levels_[r]) && levels_[r] > 0.0, idx("levels", r) + " must be finite and > 0");
  for (Eigen::Index j = 0; j < level_costs_.rows(); ++j)
    for (Eigen::Index r = 0; r < level_costs_.cols(); ++r)
      require(std::isfinite(level_costs_(j, r)) && level_costs_(j, r) >= 0.0, "level costs must be finite and >= 0");

  require(dist_candidates_.rows() == static_cast<Eigen::Index>(ni) &&
              dist_candidates_.cols() == static_cast<Eigen::Index>(nj),
          "dist_candidates must be |I| x |J|");
  require(dist_competitors_.rows() == static_cast<Eigen::Index>(ni) &&
              dist_competitors_.cols() == static_cast<Eigen::Index>(nk),
          "dist_competitors must be |I| x |K|");

  auto check_dist = [&](const Matrix& d, const char* name) {
    for (Eigen::Index i = 0; i < d.rows(); ++i)
      for (Eigen::Index m = 0; m < d.cols(); ++m)
        require(std::isfinite(d(i, m)) && d(i, m) >= kMinDistance,
                std::string(name) + "(" + std::to_string(i) + "," + std::to_string(m) + ") is below the distance floor");
  };
  check_dist(dist_candidates_, "dist_candidates");
  check_dist(dist_competitors_, "dist_competitors");

  // When locations are present they must agree with the explicit matrices.
  for (std::size_t i = 0; i < ni; ++i) {
    if (!zones_[i].location) continue;
    for (std::size_t j = 0; j < nj; ++j) {
      if (!candidates_[j].location) continue;
      double d = euclidean(*zones_[i].location, *candidates_[j].location);
      require(std::abs(d - dist_candidates_(i, j)) <= kDistanceConsistencyTol,
              "dist_candidates disagrees with locations at (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
    for (std::size_t k = 0; k < nk; ++k) {
      if (!competitors_[k].location) continue;
      double d = euclidean(*zones_[i].location, *competitors_[k].location);
      require(std::abs(d - dist_competitors_(i, k)) <= kDistanceConsistencyTol,
              "dist_competitors disagrees with locations at (" + std::to_string(i) + "," + std::to_string(k) + ")");
    }
  }
}

double Instance::total_buying_power() const noexcept {
  double s = 0.0;
  for (const auto& z : zones_) s += z.buying_power;
  return s;
}

bool Instance::has_locations() const noexcept {
  auto has = [](const auto& v) { return std::all_of(v.begin(), v.end(), [](const auto& e) { return e.location.has_value(); }); };
  return has(zones_) && has(candidates_) && has(competitors_);
}

bool operator==(const Instance& a, const Instance& b) {
  return a.zones_ == b.zones_ && a.candidates_ == b.candidates_ && a.competitors_ == b.competitors_ &&
         a.levels_ == b.levels_ && same_shape(a.level_costs_, b.level_costs_) && a.level_costs_ == b.level_costs_ &&
         same_shape(a.dist_candidates_, b.dist_candidates_) && a.dist_candidates_ == b.dist_candidates_ &&
         same_shape(a.dist_competitors_, b.dist_competitors_) && a.dist_competitors_ == b.dist_competitors_;
}

Vector compute_competitor_utility(const Instance& instance) {
  const auto& d = instance.dist_competitors();
  Vector v = Vector::Zero(d.rows());
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index k = 0; k < d.cols(); ++k)
      v[i] += instance.competitors()[static_cast<std::size_t>(k)].attractiveness / (d(i, k) * d(i, k));
  return v;
}

DerivedCoefficients compute_coefficients(const Instance& instance, const Vector& v) {
  const auto ni = instance.num_zones(), nj = instance.num_candidates(), nr = instance.num_levels();
  if (static_cast<std::size_t>(v.size()) != ni) throw InvalidInstance("competitor utility vector has wrong size");

  DerivedCoefficients c;
  c.v = v;
  c.num_candidates = nj;
  c.num_levels = nr;
  c.b.resize(static_cast<Eigen::Index>(ni), static_cast<Eigen::Index>(nj * nr));
  c.b_star.resize(static_cast<Eigen::Index>(ni), static_cast<Eigen::Index>(nj));
  c.beta_lower.resize(static_cast<Eigen::Index>(ni));
  const auto& d = instance.dist_candidates();
  for (std::size_t i = 0; i < ni; ++i) {
    double star_sum = 0.0;
    for (std::size_t j = 0; j < nj; ++j) {
      const double d2v = d(i, j) * d(i, j) * v[i];
      double best = 0.0;
      for (std::size_t r = 0; r < nr; ++r) {
        const double bijr = instance.levels()[r] / d2v;
        c.b(i, c.column(j, r)) = bijr;
        best = std::max(best, bijr);
      }
      c.b_star(i, j) = best;
      star_sum += best;
    }
    c.beta_lower[i] = 1.0 / (star_sum + 1.0);
  }
  return c;
}

Solution Solution::all_closed(std::size_t num_candidates) {
  return Solution(std::vector<int>(num_candidates, kClosed));
}

Solution Solution::all_open(std::size_t num_candidates, int level) {
  return Solution(std::vector<int>(num_candidates, level));
}

Solution Solution::from_indicators(const std::vector<double>& x, const Matrix& y) {
  if (static_cast<Eigen::Index>(x.size()) != y.rows())
    throw InfeasibleSolution("x and y have inconsistent facility counts");
  std::vector<int> levels(x.size(), kClosed);
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] != 0.0 && x[j] != 1.0) throw InfeasibleSolution("x_" + std::to_string(j + 1) + " is not binary");
    int count = 0;
    for (Eigen::Index r = 0; r < y.cols(); ++r) {
      const double val = y(static_cast<Eigen::Index>(j), r);
      if (val != 0.0 && val != 1.0)
        throw InfeasibleSolution("y_" + std::to_string(j + 1) + "_" + std::to_string(r + 1) + " is not binary");
      if (val == 1.0) {
        ++count;
        levels[j] = static_cast<int>(r);
      }
    }
    if (count != static_cast<int>(x[j]))
      throw InfeasibleSolution("sum_r y_" + std::to_string(j + 1) + "_r does not equal x_" + std::to_string(j + 1));
  }
  return Solution(std::move(levels));
}

Matrix Solution::y_matrix(std::size_t num_levels) const {
  Matrix y = Matrix::Zero(static_cast<Eigen::Index>(levels_.size()), static_cast<Eigen::Index>(num_levels));
  for (std::size_t j = 0; j < levels_.size(); ++j)
    if (levels_[j] != kClosed) y(static_cast<Eigen::Index>(j), levels_[j]) = 1.0;
  return y;
}

std::size_t Solution::open_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(levels_.begin(), levels_.end(), [](int l) { return l != kClosed; }));
}

void Solution::check_against(const Instance& instance) const {
  if (levels_.size() != instance.num_candidates())
    throw InfeasibleSolution("solution covers " + std::to_string(levels_.size()) + " facilities, instance has " +
                             std::to_string(instance.num_candidates()));
  for (std::size_t j = 0; j < levels_.size(); ++j)
    if (levels_[j] != kClosed && (levels_[j] < 0 || levels_[j] >= static_cast<int>(instance.num_levels())))
      throw InfeasibleSolution("facility " + std::to_string(j + 1) + " has an invalid level");
}

bool lex_less_y(const Solution& a, const Solution& b) {
  // Row j of y is all-zero when closed and e_r when open at r, so a closed row
  // is smallest and a higher level index compares smaller than a lower one.
  const auto n = std::min(a.num_candidates(), b.num_candidates());
  for (std::size_t j = 0; j < n; ++j) {
    const int la = a.level(j), lb = b.level(j);
    if (la == lb) continue;
    if (la == Solution::kClosed) return true;
    if (lb == Solution::kClosed) return false;
    return la > lb;
  }
  return a.num_candidates() < b.num_candidates();
}

FractionalPoint::FractionalPoint(Matrix y, double tol) : y_(std::move(y)) {
  for (Eigen::Index j = 0; j < y_.rows(); ++j) {
    double s = 0.0;
    for (Eigen::Index r = 0; r < y_.cols(); ++r) {
      if (!(y_(j, r) >= -tol)) throw InfeasibleSolution("fractional point has a negative entry");
      s += y_(j, r);
    }
    if (s > 1.0 + tol) throw InfeasibleSolution("fractional point opens facility " + std::to_string(j + 1) + " more than once");
  }
}

FractionalPoint FractionalPoint::zeros(std::size_t num_candidates, std::size_t num_levels) {
  return FractionalPoint(Matrix::Zero(static_cast<Eigen::Index>(num_candidates), static_cast<Eigen::Index>(num_levels)),
                         Unchecked{});
}

FractionalPoint FractionalPoint::from_solution(const Solution& s, std::size_t num_levels) {
  return FractionalPoint(s.y_matrix(num_levels), Unchecked{});
}

Vector utility_totals(const DerivedCoefficients& coeffs, const Matrix& y) {
  Eigen::Map<const Vector> flat(y.data(), y.size());
  return (coeffs.b * flat).array() + 1.0;
}

Matrix patronage_probabilities(const DerivedCoefficients& coeffs, const FractionalPoint& point) {
  const auto& y = point.y();
  const Vector z = utility_totals(coeffs, y);
  const auto ni = static_cast<Eigen::Index>(coeffs.num_zones());
  const auto nj = y.rows(), nr = y.cols();
  Matrix p(ni, nj);
  for (Eigen::Index i = 0; i < ni; ++i)
    for (Eigen::Index j = 0; j < nj; ++j) {
      double num = 0.0;
      for (Eigen::Index r = 0; r < nr; ++r) num += coeffs.b(i, j * nr + r) * y(j, r);
      p(i, j) = num / z[i];
    }
  return p;
}

Vector capture_fraction(const DerivedCoefficients& coeffs, const FractionalPoint& point) {
  const Vector z = utility_totals(coeffs, point.y());
  return ((z.array() - 1.0) / z.array()).matrix();
}

Vector capture_complement(const DerivedCoefficients& coeffs, const FractionalPoint& point) {
  return utility_totals(coeffs, point.y()).cwiseInverse();
}

double profit(const Instance& instance, const DerivedCoefficients& coeffs, const Solution& s) {
  s.check_against(instance);
  const Matrix y = s.y_matrix(instance.num_levels());
  const Vector z = utility_totals(coeffs, y);
  double revenue = 0.0;
  for (std::size_t i = 0; i < instance.num_zones(); ++i) revenue += instance.buying_power(i) * (z[i] - 1.0) / z[i];
  double cost = 0.0;
  for (std::size_t j = 0; j < s.num_candidates(); ++j)
    if (s.is_open(j)) cost += instance.fixed_cost(j) + instance.level_cost(j, static_cast<std::size_t>(s.level(j)));
  return revenue - cost;
}

double min_objective(const Instance& instance, const DerivedCoefficients& coeffs, const Matrix& y) {
  const Vector z = utility_totals(coeffs, y);
  double value = 0.0;
  for (std::size_t i = 0; i < instance.num_zones(); ++i) value += instance.buying_power(i) / z[i];
  for (Eigen::Index j = 0; j < y.rows(); ++j) {
    double mass = 0.0;
    for (Eigen::Index r = 0; r < y.cols(); ++r) {
      mass += y(j, r);
      value += instance.level_cost(static_cast<std::size_t>(j), static_cast<std::size_t>(r)) * y(j, r);
    }
    value += instance.fixed_cost(static_cast<std::size_t>(j)) * mass;
  }
  return value;
}

double min_objective(const Instance& instance, const DerivedCoefficients& coeffs, const FractionalPoint& point) {
  return min_objective(instance, coeffs, point.y());
}

double min_objective(const Instance& instance, const DerivedCoefficients& coeffs, const Solution& s) {
  s.check_against(instance);
  return min_objective(instance, coeffs, s.y_matrix(instance.num_levels()));
}

Matrix complement_gradient(const DerivedCoefficients& coeffs, const FractionalPoint& point) {
  const Vector z = utility_totals(coeffs, point.y());
  Matrix g = coeffs.b;
  for (Eigen::Index i = 0; i < g.rows(); ++i) g.row(i) *= -1.0 / (z[i] * z[i]);
  return g;
}

Matrix linear_costs(const Instance& instance) {
  Matrix c = instance.level_costs();
  for (Eigen::Index j = 0; j < c.rows(); ++j) c.row(j).array() += instance.fixed_cost(static_cast<std::size_t>(j));
  return c;
}

}  // namespace cfld
