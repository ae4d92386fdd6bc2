#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfld/model.hpp"

namespace cfld {

class CutPool;

enum class VarKind { Binary, Continuous };
enum class RowSense { LessEqual, Equal, GreaterEqual };

struct Variable {
  std::string name;
  VarKind kind = VarKind::Continuous;
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
};

struct Term {
  std::size_t var = 0;
  double coef = 0.0;
};

/// sum_k coef_k * var_k + constant
struct AffineExpr {
  std::vector<Term> terms;
  double constant = 0.0;
};

struct LinearRow {
  std::string name;
  std::vector<Term> terms;
  RowSense sense = RowSense::Equal;
  double rhs = 0.0;
};

/// u * w >= t^2 with u, w >= 0.
struct RotatedConeRow {
  std::string name;
  std::size_t u = 0;
  std::size_t w = 0;
  AffineExpr t;
};

/// || (lhs_1, ..., lhs_m) ||_2 <= rhs
struct SocRow {
  std::string name;
  std::vector<AffineExpr> lhs;
  AffineExpr rhs;
};

/// Solver-agnostic sparse program. The objective is always minimized.
class FormulationModel {
 public:
  std::string name;
  std::vector<Variable> variables;
  std::vector<LinearRow> rows;
  std::vector<RotatedConeRow> rotated_cones;
  std::vector<SocRow> soc_rows;
  AffineExpr objective;

  std::size_t add_variable(std::string var_name, VarKind kind, double lower, double upper);
  void add_row(std::string row_name, std::vector<Term> terms, RowSense sense, double rhs);

  /// Index of a variable by name; nullopt when absent.
  std::optional<std::size_t> find(const std::string& var_name) const;
  std::size_t index(const std::string& var_name) const;

  std::size_t count(VarKind kind) const;
  bool has_cones() const noexcept { return !rotated_cones.empty() || !soc_rows.empty(); }

  /// Throws FormatError when a row references an undeclared variable, a
  /// binary is not bounded by [0, 1], or a cone touches a non-continuous or
  /// possibly negative variable.
  void validate() const;

 private:
  mutable std::map<std::string, std::size_t> lookup_;
};

/// Variable names used by every builder.
std::string x_name(std::size_t j);
std::string y_name(std::size_t j, std::size_t r);
std::string beta_name(std::size_t i);
std::string z_name(std::size_t i);
std::string w_name(std::size_t i, std::size_t j, std::size_t r);

/// Bilinear-linearized MILP: beta_i + sum_jr b_ijr w_ijr = 1 with four
/// McCormick rows per (i, j, r).
FormulationModel build_milp(const Instance& instance, const DerivedCoefficients& coeffs);

/// Outer-approximation master over the recorded cut points.
FormulationModel build_oa_master(const Instance& instance, const DerivedCoefficients& coeffs, const CutPool& cuts);

/// Rotated-cone program: z_i = sum b y + 1 and beta_i * z_i >= 1.
FormulationModel build_micqp(const Instance& instance, const DerivedCoefficients& coeffs);

/// Replaces each rotated cone u*w >= t^2 by ||(2t, u - w)||_2 <= u + w.
FormulationModel soc_convert(const FormulationModel& model);

/// Raised by exporters that cannot express a row type.
class UnsupportedRow : public Error {
 public:
  using Error::Error;
};

/// Free-format MPS. Throws UnsupportedRow on cone rows.
std::string export_mps(const FormulationModel& model);
/// Conic Benchmark Format, version 3.
std::string export_cbf(const FormulationModel& model);
/// Lossless JSON mirror of the model.
std::string export_json(const FormulationModel& model);
FormulationModel model_from_json(const std::string& text);

using Assignment = std::map<std::string, double>;

struct FeasibilityReport {
  double max_linear_residual = 0.0;
  double max_bound_violation = 0.0;
  double max_cone_violation = 0.0;
  double max_integrality_violation = 0.0;
  double objective = 0.0;

  double max_violation() const;
  bool feasible(double tol) const { return max_violation() <= tol; }
};

/// Raised when an assignment omits a model variable.
class MissingVariable : public Error {
 public:
  using Error::Error;
};

FeasibilityReport check_feasibility(const FormulationModel& model, const Assignment& assignment);

/// x and y values of a binary solution under the builder naming scheme.
Assignment solution_assignment(const Solution& s, std::size_t num_levels);

/// Completes `assignment` of x, y with the exact auxiliaries of each model:
/// beta_i = 1 / z_i, z_i = sum b y + 1 and w_ijr = y_jr beta_i.
Assignment exact_milp_assignment(const Instance& instance, const DerivedCoefficients& coeffs, const Solution& s);
Assignment exact_micqp_assignment(const Instance& instance, const DerivedCoefficients& coeffs, const Solution& s);
/// beta_i = 1 / z_i, which satisfies every tangent cut by convexity.
Assignment exact_oa_master_assignment(const Instance& instance, const DerivedCoefficients& coeffs, const Solution& s);

/// Reads x_j, y_j_r from an assignment and rounds to the nearest binary.
/// Throws InfeasibleSolution when the rounded point violates sum_r y = x.
Solution solution_from_assignment(const Assignment& a, std::size_t num_candidates, std::size_t num_levels);

}  // namespace cfld
