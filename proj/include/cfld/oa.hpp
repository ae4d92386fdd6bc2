#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cfld/model.hpp"
#include "cfld/oracle.hpp"

namespace cfld {

struct AdapterConfig;

/// One recorded point of the outer approximation and the tangent data of
/// 1 - F_i there. The cut for zone i reads
///   beta_i >= offset_i + sum_jr gradient(i, jr) * y_jr,
/// with offset_i = intercept_i - sum_jr gradient(i, jr) * ybar_jr.
struct CutPoint {
  Solution point;
  Vector intercept;
  Matrix gradient;
  Vector offset;
  /// z_i at the point; gradient(i, .) == -b(i, .) / z_i^2.
  Vector z;
};

class CutPool {
 public:
  /// Records `point` unless already present. Returns true when added.
  bool add(const Instance& instance, const DerivedCoefficients& coeffs, const Solution& point);
  bool contains(const Solution& point) const;

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  const CutPoint& operator[](std::size_t k) const { return points_[k]; }
  auto begin() const noexcept { return points_.begin(); }
  auto end() const noexcept { return points_.end(); }

  /// Affine value of cut k for zone i at a binary point.
  double value(std::size_t k, std::size_t i, const Solution& s) const;

  /// Smallest beta satisfying every cut and the lower bound beta^L.
  Vector min_beta(const DerivedCoefficients& coeffs, const Solution& s) const;

 private:
  std::vector<CutPoint> points_;
};

/// sum_j f_j x_j + sum_jr c_jr y_jr + sum_i a_i beta_i with minimal beta.
double master_value(const Instance& instance, const DerivedCoefficients& coeffs, const CutPool& cuts,
                    const Solution& s);

struct MasterResult {
  Solution solution;
  /// Master objective at `solution`.
  double objective = 0.0;
  /// Certified lower bound on the master optimum.
  double lower_bound = 0.0;
  bool proven = true;
  std::uint64_t nodes = 0;
};

using MasterOracle = std::function<MasterResult(const Instance&, const DerivedCoefficients&, const CutPool&)>;

/// Exact master optimum by enumeration. Ties go to the lexicographically
/// smallest y. Throws EnumerationCapExceeded.
MasterResult master_exhaustive(const Instance& instance, const DerivedCoefficients& coeffs, const CutPool& cuts,
                               std::uint64_t cap = kDefaultEnumerationCap);

struct MasterBnBOptions {
  double rel_tol = 1e-9;
  std::uint64_t node_cap = 5'000'000;
  std::size_t root_dual_iterations = 300;
  std::size_t node_dual_iterations = 40;
};

/// Master optimum by branch-and-bound over facility choices. Node bounds are
/// the larger of (a) fixed costs plus, per zone, the best cut minimized over
/// the completions of the node and (b) the LP relaxation of the cuts with
/// coefficients capped at their binary-exact values, certified through the
/// Lagrangian at the LP duals. Subgradient ascent stands in when the simplex
/// stalls.
MasterResult master_bnb(const Instance& instance, const DerivedCoefficients& coeffs, const CutPool& cuts,
                        const MasterBnBOptions& options = {});

/// Raised when an external master solution fails validation.
class MasterRejected : public Error {
 public:
  using Error::Error;
};

/// Exports the master as MPS, runs the adapter, and accepts the returned
/// assignment only if every residual is below 1e-6.
MasterResult master_external(const Instance& instance, const DerivedCoefficients& coeffs, const CutPool& cuts,
                             const AdapterConfig& adapter, double time_limit_seconds);

enum class OATermination { RepeatInT, ObjectiveGap, IterationCap };
std::string to_string(OATermination t);

struct OAOptions {
  std::size_t max_iterations = 100;
  /// Also seed the pool with the all-closed point.
  bool add_closed_point = true;
  /// Declare optimality once master bound >= incumbent - gap_tol * (1 + |incumbent|).
  double gap_tol = 1e-9;
};

struct OAReport {
  Solution solution;
  double profit = 0.0;
  /// Min-form value of `solution`.
  double objective = 0.0;
  std::size_t iterations = 0;
  std::vector<double> master_objectives;
  std::vector<double> master_lower_bounds;
  OATermination termination = OATermination::IterationCap;
  bool proven = false;
  std::size_t cuts = 0;
};

/// Every facility open at the highest level.
Solution default_oa_start(const Instance& instance);

/// Outer approximation: record the point, add its tangent cuts, solve the
/// master, stop when the master returns a recorded point.
OAReport run_oa(const Instance& instance, const DerivedCoefficients& coeffs, const MasterOracle& master,
                const Solution& init, const OAOptions& options = {});

/// Errors from a master carry the iteration they happened in.
class OAError : public Error {
 public:
  OAError(std::size_t iteration, const std::string& what)
      : Error("OA iteration " + std::to_string(iteration) + ": " + what), iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace cfld
