#include "cfld/formulations.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "cfld/oa.hpp"

namespace cfld {

std::string x_name(std::size_t j) { return "x_" + std::to_string(j + 1); }
std::string y_name(std::size_t j, std::size_t r) { return "y_" + std::to_string(j + 1) + "_" + std::to_string(r + 1); }
std::string beta_name(std::size_t i) { return "beta_" + std::to_string(i + 1); }
std::string z_name(std::size_t i) { return "z_" + std::to_string(i + 1); }
std::string w_name(std::size_t i, std::size_t j, std::size_t r) {
  return "w_" + std::to_string(i + 1) + "_" + std::to_string(j + 1) + "_" + std::to_string(r + 1);
}

// ---------------------------------------------------------------------------
// FormulationModel
// ---------------------------------------------------------------------------

std::size_t FormulationModel::add_variable(std::string var_name, VarKind kind, double lower, double upper) {
  variables.push_back({std::move(var_name), kind, lower, upper});
  lookup_.clear();
  return variables.size() - 1;
}

void FormulationModel::add_row(std::string row_name, std::vector<Term> terms, RowSense sense, double rhs) {
  rows.push_back({std::move(row_name), std::move(terms), sense, rhs});
}

std::optional<std::size_t> FormulationModel::find(const std::string& var_name) const {
  if (lookup_.size() != variables.size()) {
    lookup_.clear();
    for (std::size_t k = 0; k < variables.size(); ++k) lookup_.emplace(variables[k].name, k);
  }
  auto it = lookup_.find(var_name);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t FormulationModel::index(const std::string& var_name) const {
  if (auto k = find(var_name)) return *k;
  throw MissingVariable("model has no variable '" + var_name + "'");
}

std::size_t FormulationModel::count(VarKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(variables.begin(), variables.end(), [&](const Variable& v) { return v.kind == kind; }));
}

void FormulationModel::validate() const {
  const auto n = variables.size();
  auto check_terms = [&](const std::vector<Term>& terms, const std::string& where) {
    for (const auto& t : terms)
      if (t.var >= n) throw FormatError(where, "references undeclared variable " + std::to_string(t.var));
  };
  for (const auto& v : variables)
    if (v.kind == VarKind::Binary && (v.lower != 0.0 || v.upper != 1.0))
      throw FormatError(v.name, "binary variable must have bounds [0, 1]");
  for (const auto& r : rows) check_terms(r.terms, r.name);
  check_terms(objective.terms, "objective");
  auto cone_var = [&](std::size_t k, const std::string& where) {
    if (k >= n) throw FormatError(where, "references undeclared variable " + std::to_string(k));
    if (variables[k].kind != VarKind::Continuous) throw FormatError(where, "cone member must be continuous");
    if (variables[k].lower < 0.0) throw FormatError(where, "cone member " + variables[k].name + " may be negative");
  };
  for (const auto& c : rotated_cones) {
    cone_var(c.u, c.name);
    cone_var(c.w, c.name);
    check_terms(c.t.terms, c.name);
    for (const auto& t : c.t.terms)
      if (variables[t.var].kind != VarKind::Continuous) throw FormatError(c.name, "cone member must be continuous");
  }
  for (const auto& s : soc_rows) {
    for (const auto& e : s.lhs) check_terms(e.terms, s.name);
    check_terms(s.rhs.terms, s.name);
  }
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

namespace {

/// Declares x_j then y_j_r, so binaries are contiguous and come first.
void add_binaries(FormulationModel& m, const Instance& inst) {
  for (std::size_t j = 0; j < inst.num_candidates(); ++j) m.add_variable(x_name(j), VarKind::Binary, 0.0, 1.0);
  for (std::size_t j = 0; j < inst.num_candidates(); ++j)
    for (std::size_t r = 0; r < inst.num_levels(); ++r) m.add_variable(y_name(j, r), VarKind::Binary, 0.0, 1.0);
}

std::size_t x_index(std::size_t j) { return j; }
std::size_t y_index(const Instance& inst, std::size_t j, std::size_t r) {
  return inst.num_candidates() + j * inst.num_levels() + r;
}

void add_linking_rows(FormulationModel& m, const Instance& inst) {
  for (std::size_t j = 0; j < inst.num_candidates(); ++j) {
    std::vector<Term> t;
    for (std::size_t r = 0; r < inst.num_levels(); ++r) t.push_back({y_index(inst, j, r), 1.0});
    t.push_back({x_index(j), -1.0});
    m.add_row("link_" + std::to_string(j + 1), std::move(t), RowSense::Equal, 0.0);
  }
}

/// sum f x + sum c y + sum a beta, beta_i at index beta0 + i.
void set_objective(FormulationModel& m, const Instance& inst, std::size_t beta0) {
  m.objective = {};
  for (std::size_t j = 0; j < inst.num_candidates(); ++j)
    if (inst.fixed_cost(j) != 0.0) m.objective.terms.push_back({x_index(j), inst.fixed_cost(j)});
  for (std::size_t j = 0; j < inst.num_candidates(); ++j)
    for (std::size_t r = 0; r < inst.num_levels(); ++r)
      if (inst.level_cost(j, r) != 0.0) m.objective.terms.push_back({y_index(inst, j, r), inst.level_cost(j, r)});
  for (std::size_t i = 0; i < inst.num_zones(); ++i)
    if (inst.buying_power(i) != 0.0) m.objective.terms.push_back({beta0 + i, inst.buying_power(i)});
}

std::size_t add_betas(FormulationModel& m, const Instance& inst, const DerivedCoefficients& c) {
  const auto first = m.variables.size();
  for (std::size_t i = 0; i < inst.num_zones(); ++i)
    m.add_variable(beta_name(i), VarKind::Continuous, c.beta_lower[static_cast<Eigen::Index>(i)], c.beta_upper);
  return first;
}

}  // namespace

FormulationModel build_milp(const Instance& inst, const DerivedCoefficients& c) {
  const auto ni = inst.num_zones(), nj = inst.num_candidates(), nr = inst.num_levels();
  FormulationModel m;
  m.name = "cfld_milp";
  add_binaries(m, inst);
  const auto beta0 = add_betas(m, inst, c);
  const auto w0 = m.variables.size();
  for (std::size_t i = 0; i < ni; ++i)
    for (std::size_t j = 0; j < nj; ++j)
      for (std::size_t r = 0; r < nr; ++r) m.add_variable(w_name(i, j, r), VarKind::Continuous, 0.0, 1.0);
  auto w_index = [&](std::size_t i, std::size_t j, std::size_t r) { return w0 + (i * nj + j) * nr + r; };

  for (std::size_t i = 0; i < ni; ++i) {
    std::vector<Term> t;
    for (std::size_t j = 0; j < nj; ++j)
      for (std::size_t r = 0; r < nr; ++r) t.push_back({w_index(i, j, r), c.b_at(i, j, r)});
    t.push_back({beta0 + i, 1.0});
    m.add_row("def_" + std::to_string(i + 1), std::move(t), RowSense::Equal, 1.0);
  }
  for (std::size_t i = 0; i < ni; ++i) {
    const double lo = c.beta_lower[static_cast<Eigen::Index>(i)], up = c.beta_upper;
    for (std::size_t j = 0; j < nj; ++j)
      for (std::size_t r = 0; r < nr; ++r) {
        const auto w = w_index(i, j, r), y = y_index(inst, j, r), b = beta0 + i;
        const std::string tag = std::to_string(i + 1) + "_" + std::to_string(j + 1) + "_" + std::to_string(r + 1);
        // w >= beta - up (1 - y)
        m.add_row("mc1_" + tag, {{w, 1.0}, {b, -1.0}, {y, -up}}, RowSense::GreaterEqual, -up);
        // w >= lo y
        m.add_row("mc2_" + tag, {{w, 1.0}, {y, -lo}}, RowSense::GreaterEqual, 0.0);
        // w <= beta - lo (1 - y)
        m.add_row("mc3_" + tag, {{w, 1.0}, {b, -1.0}, {y, -lo}}, RowSense::LessEqual, -lo);
        // w <= up y
        m.add_row("mc4_" + tag, {{w, 1.0}, {y, -up}}, RowSense::LessEqual, 0.0);
      }
  }
  add_linking_rows(m, inst);
  set_objective(m, inst, beta0);
  return m;
}

FormulationModel build_oa_master(const Instance& inst, const DerivedCoefficients& c, const CutPool& cuts) {
  const auto ni = inst.num_zones(), nj = inst.num_candidates(), nr = inst.num_levels();
  FormulationModel m;
  m.name = "cfld_oa_master";
  add_binaries(m, inst);
  const auto beta0 = add_betas(m, inst, c);
  for (std::size_t k = 0; k < cuts.size(); ++k) {
    const auto& cut = cuts[k];
    for (std::size_t i = 0; i < ni; ++i) {
      // beta_i - sum g y >= offset
      std::vector<Term> t{{beta0 + i, 1.0}};
      for (std::size_t j = 0; j < nj; ++j)
        for (std::size_t r = 0; r < nr; ++r) {
          const double g = cut.gradient(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c.column(j, r)));
          if (g != 0.0) t.push_back({y_index(inst, j, r), -g});
        }
      m.add_row("cut_" + std::to_string(i + 1) + "_" + std::to_string(k + 1), std::move(t), RowSense::GreaterEqual,
                cut.offset[static_cast<Eigen::Index>(i)]);
    }
  }
  add_linking_rows(m, inst);
  set_objective(m, inst, beta0);
  return m;
}

FormulationModel build_micqp(const Instance& inst, const DerivedCoefficients& c) {
  const auto ni = inst.num_zones(), nj = inst.num_candidates(), nr = inst.num_levels();
  FormulationModel m;
  m.name = "cfld_micqp";
  add_binaries(m, inst);
  const auto beta0 = add_betas(m, inst, c);
  const auto z0 = m.variables.size();
  for (std::size_t i = 0; i < ni; ++i)
    m.add_variable(z_name(i), VarKind::Continuous, 1.0, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < ni; ++i) {
    // z_i - sum b y = 1
    std::vector<Term> t{{z0 + i, 1.0}};
    for (std::size_t j = 0; j < nj; ++j)
      for (std::size_t r = 0; r < nr; ++r) t.push_back({y_index(inst, j, r), -c.b_at(i, j, r)});
    m.add_row("zdef_" + std::to_string(i + 1), std::move(t), RowSense::Equal, 1.0);
  }
  for (std::size_t i = 0; i < ni; ++i)
    m.rotated_cones.push_back({"cone_" + std::to_string(i + 1), beta0 + i, z0 + i, AffineExpr{{}, 1.0}});
  add_linking_rows(m, inst);
  set_objective(m, inst, beta0);
  return m;
}

FormulationModel soc_convert(const FormulationModel& model) {
  FormulationModel out = model;
  out.rotated_cones.clear();
  for (const auto& rc : model.rotated_cones) {
    SocRow s;
    s.name = rc.name;
    AffineExpr two_t = rc.t;
    for (auto& term : two_t.terms) term.coef *= 2.0;
    two_t.constant *= 2.0;
    s.lhs.push_back(std::move(two_t));
    s.lhs.push_back(AffineExpr{{{rc.u, 1.0}, {rc.w, -1.0}}, 0.0});
    s.rhs = AffineExpr{{{rc.u, 1.0}, {rc.w, 1.0}}, 0.0};
    out.soc_rows.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exporters
// ---------------------------------------------------------------------------

namespace {

std::string num(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

const char* mps_sense(RowSense s) {
  switch (s) {
    case RowSense::LessEqual: return "L";
    case RowSense::Equal: return "E";
    case RowSense::GreaterEqual: return "G";
  }
  return "E";
}

}  // namespace

std::string export_mps(const FormulationModel& m) {
  if (m.has_cones())
    throw UnsupportedRow("MPS export supports linear rows only; model '" + m.name + "' has cone rows");
  m.validate();
  std::ostringstream out;
  out << "NAME " << (m.name.empty() ? "model" : m.name) << "\n";
  out << "ROWS\n N obj\n";
  for (const auto& r : m.rows) out << " " << mps_sense(r.sense) << " " << r.name << "\n";

  // Column-major view of the rows.
  std::vector<std::vector<std::pair<std::size_t, double>>> cols(m.variables.size());
  std::vector<double> obj(m.variables.size(), 0.0);
  for (const auto& t : m.objective.terms) obj[t.var] += t.coef;
  for (std::size_t k = 0; k < m.rows.size(); ++k)
    for (const auto& t : m.rows[k].terms) cols[t.var].emplace_back(k, t.coef);

  out << "COLUMNS\n";
  bool in_int = false;
  int marker = 0;
  for (std::size_t v = 0; v < m.variables.size(); ++v) {
    const bool is_int = m.variables[v].kind == VarKind::Binary;
    if (is_int != in_int) {
      out << " MARKER" << marker++ << " 'MARKER' " << (is_int ? "'INTORG'" : "'INTEND'") << "\n";
      in_int = is_int;
    }
    const auto& name = m.variables[v].name;
    bool wrote = false;
    if (obj[v] != 0.0) {
      out << " " << name << " obj " << num(obj[v]) << "\n";
      wrote = true;
    }
    for (const auto& [row, coef] : cols[v]) {
      out << " " << name << " " << m.rows[row].name << " " << num(coef) << "\n";
      wrote = true;
    }
    if (!wrote) out << " " << name << " obj 0\n";
  }
  if (in_int) out << " MARKER" << marker++ << " 'MARKER' 'INTEND'\n";

  out << "RHS\n";
  if (m.objective.constant != 0.0) out << " rhs obj " << num(-m.objective.constant) << "\n";
  for (const auto& r : m.rows)
    if (r.rhs != 0.0) out << " rhs " << r.name << " " << num(r.rhs) << "\n";

  out << "BOUNDS\n";
  for (const auto& v : m.variables) {
    if (v.kind == VarKind::Binary) {
      out << " BV bnd " << v.name << "\n";
      continue;
    }
    const bool lo_inf = std::isinf(v.lower), up_inf = std::isinf(v.upper);
    if (!lo_inf && !up_inf && v.lower == v.upper) {
      out << " FX bnd " << v.name << " " << num(v.lower) << "\n";
      continue;
    }
    if (lo_inf) {
      out << " MI bnd " << v.name << "\n";
    } else if (v.lower != 0.0) {
      out << " LO bnd " << v.name << " " << num(v.lower) << "\n";
    }
    if (!up_inf) out << " UP bnd " << v.name << " " << num(v.upper) << "\n";
  }
  out << "ENDATA\n";
  return out.str();
}

std::string export_cbf(const FormulationModel& m) {
  m.validate();
  struct Block {
    std::string domain;
    std::size_t size;
  };
  std::vector<Block> blocks;
  std::vector<std::tuple<std::size_t, std::size_t, double>> a;  // row, var, coef
  std::vector<std::pair<std::size_t, double>> b;                // row, constant
  std::size_t row = 0;

  auto push_block = [&](const std::string& domain, std::size_t size, bool mergeable) {
    if (mergeable && !blocks.empty() && blocks.back().domain == domain) {
      blocks.back().size += size;
    } else {
      blocks.push_back({domain, size});
    }
  };
  auto emit_affine = [&](const AffineExpr& e, double scale) {
    for (const auto& t : e.terms)
      if (t.coef != 0.0) a.emplace_back(row, t.var, scale * t.coef);
    if (e.constant != 0.0) b.emplace_back(row, scale * e.constant);
    ++row;
  };

  // Linear rows as (Ax - rhs) in L= / L- / L+.
  for (const auto& r : m.rows) {
    const char* dom = r.sense == RowSense::Equal ? "L=" : (r.sense == RowSense::LessEqual ? "L-" : "L+");
    push_block(dom, 1, true);
    emit_affine(AffineExpr{r.terms, -r.rhs}, 1.0);
  }
  // Variable bounds.
  for (std::size_t v = 0; v < m.variables.size(); ++v) {
    const auto& var = m.variables[v];
    if (!std::isinf(var.lower)) {
      push_block("L+", 1, true);
      emit_affine(AffineExpr{{{v, 1.0}}, -var.lower}, 1.0);
    }
    if (!std::isinf(var.upper)) {
      push_block("L-", 1, true);
      emit_affine(AffineExpr{{{v, 1.0}}, -var.upper}, 1.0);
    }
  }
  // CBF QR is 2 x1 x2 >= sum x_k^2, so the first member is halved.
  for (const auto& rc : m.rotated_cones) {
    push_block("QR", 3, false);
    emit_affine(AffineExpr{{{rc.u, 1.0}}, 0.0}, 0.5);
    emit_affine(AffineExpr{{{rc.w, 1.0}}, 0.0}, 1.0);
    emit_affine(rc.t, 1.0);
  }
  for (const auto& s : m.soc_rows) {
    push_block("Q", s.lhs.size() + 1, false);
    emit_affine(s.rhs, 1.0);
    for (const auto& e : s.lhs) emit_affine(e, 1.0);
  }

  std::ostringstream out;
  out << "# " << (m.name.empty() ? "model" : m.name) << "\n";
  out << "VER\n3\n\n";
  out << "OBJSENSE\nMIN\n\n";
  out << "VAR\n" << m.variables.size() << " 1\nF " << m.variables.size() << "\n\n";
  const auto nint = m.count(VarKind::Binary);
  if (nint > 0) {
    out << "INT\n" << nint << "\n";
    for (std::size_t v = 0; v < m.variables.size(); ++v)
      if (m.variables[v].kind == VarKind::Binary) out << v << "\n";
    out << "\n";
  }
  out << "CON\n" << row << " " << blocks.size() << "\n";
  for (const auto& blk : blocks) out << blk.domain << " " << blk.size << "\n";
  out << "\n";

  std::vector<double> obj(m.variables.size(), 0.0);
  for (const auto& t : m.objective.terms) obj[t.var] += t.coef;
  std::size_t nobj = static_cast<std::size_t>(std::count_if(obj.begin(), obj.end(), [](double v) { return v != 0.0; }));
  if (nobj > 0) {
    out << "OBJACOORD\n" << nobj << "\n";
    for (std::size_t v = 0; v < obj.size(); ++v)
      if (obj[v] != 0.0) out << v << " " << num(obj[v]) << "\n";
    out << "\n";
  }
  if (m.objective.constant != 0.0) out << "OBJBCOORD\n" << num(m.objective.constant) << "\n\n";
  if (!a.empty()) {
    out << "ACOORD\n" << a.size() << "\n";
    for (const auto& [r, v, coef] : a) out << r << " " << v << " " << num(coef) << "\n";
    out << "\n";
  }
  if (!b.empty()) {
    out << "BCOORD\n" << b.size() << "\n";
    for (const auto& [r, val] : b) out << r << " " << num(val) << "\n";
    out << "\n";
  }
  return out.str();
}

namespace {

using nlohmann::json;

json bound_json(double v) { return std::isinf(v) ? json(nullptr) : json(v); }

double bound_from(const json& v, double if_null) { return v.is_null() ? if_null : v.get<double>(); }

json terms_json(const std::vector<Term>& terms) {
  json a = json::array();
  for (const auto& t : terms) a.push_back(json::array({t.var, t.coef}));
  return a;
}

std::vector<Term> terms_from(const json& a) {
  std::vector<Term> t;
  for (const auto& e : a) t.push_back({e.at(0).get<std::size_t>(), e.at(1).get<double>()});
  return t;
}

json affine_json(const AffineExpr& e) { return {{"terms", terms_json(e.terms)}, {"constant", e.constant}}; }
AffineExpr affine_from(const json& j) { return {terms_from(j.at("terms")), j.at("constant").get<double>()}; }

const char* sense_str(RowSense s) {
  switch (s) {
    case RowSense::LessEqual: return "<=";
    case RowSense::Equal: return "=";
    case RowSense::GreaterEqual: return ">=";
  }
  return "=";
}

RowSense sense_from(const std::string& s) {
  if (s == "<=") return RowSense::LessEqual;
  if (s == "=") return RowSense::Equal;
  if (s == ">=") return RowSense::GreaterEqual;
  throw FormatError("sense", "unknown row sense '" + s + "'");
}

}  // namespace

std::string export_json(const FormulationModel& m) {
  json doc;
  doc["name"] = m.name;
  json vars = json::array();
  for (const auto& v : m.variables)
    vars.push_back({{"name", v.name},
                    {"kind", v.kind == VarKind::Binary ? "binary" : "continuous"},
                    {"lower", bound_json(v.lower)},
                    {"upper", bound_json(v.upper)}});
  doc["variables"] = std::move(vars);
  json rows = json::array();
  for (const auto& r : m.rows)
    rows.push_back({{"name", r.name}, {"terms", terms_json(r.terms)}, {"sense", sense_str(r.sense)}, {"rhs", r.rhs}});
  doc["rows"] = std::move(rows);
  json rc = json::array();
  for (const auto& c : m.rotated_cones) rc.push_back({{"name", c.name}, {"u", c.u}, {"w", c.w}, {"t", affine_json(c.t)}});
  doc["rotated_cones"] = std::move(rc);
  json soc = json::array();
  for (const auto& s : m.soc_rows) {
    json lhs = json::array();
    for (const auto& e : s.lhs) lhs.push_back(affine_json(e));
    soc.push_back({{"name", s.name}, {"lhs", std::move(lhs)}, {"rhs", affine_json(s.rhs)}});
  }
  doc["soc_rows"] = std::move(soc);
  doc["objective"] = affine_json(m.objective);
  doc["sense"] = "min";
  return doc.dump(1) + "\n";
}

FormulationModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError("model", std::string("malformed JSON (") + e.what() + ")");
  }
  FormulationModel m;
  try {
    m.name = doc.at("name").get<std::string>();
    for (const auto& v : doc.at("variables")) {
      const auto kind = v.at("kind").get<std::string>();
      if (kind != "binary" && kind != "continuous") throw FormatError("variables", "unknown kind '" + kind + "'");
      m.add_variable(v.at("name").get<std::string>(), kind == "binary" ? VarKind::Binary : VarKind::Continuous,
                     bound_from(v.at("lower"), -std::numeric_limits<double>::infinity()),
                     bound_from(v.at("upper"), std::numeric_limits<double>::infinity()));
    }
    for (const auto& r : doc.at("rows"))
      m.add_row(r.at("name").get<std::string>(), terms_from(r.at("terms")), sense_from(r.at("sense").get<std::string>()),
                r.at("rhs").get<double>());
    for (const auto& c : doc.at("rotated_cones"))
      m.rotated_cones.push_back(
          {c.at("name").get<std::string>(), c.at("u").get<std::size_t>(), c.at("w").get<std::size_t>(), affine_from(c.at("t"))});
    for (const auto& s : doc.at("soc_rows")) {
      SocRow row;
      row.name = s.at("name").get<std::string>();
      for (const auto& e : s.at("lhs")) row.lhs.push_back(affine_from(e));
      row.rhs = affine_from(s.at("rhs"));
      m.soc_rows.push_back(std::move(row));
    }
    m.objective = affine_from(doc.at("objective"));
  } catch (const json::exception& e) {
    throw FormatError("model", e.what());
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Feasibility
// ---------------------------------------------------------------------------

double FeasibilityReport::max_violation() const {
  return std::max({max_linear_residual, max_bound_violation, max_cone_violation, max_integrality_violation});
}

FeasibilityReport check_feasibility(const FormulationModel& m, const Assignment& assignment) {
  std::vector<double> x(m.variables.size());
  for (std::size_t v = 0; v < m.variables.size(); ++v) {
    auto it = assignment.find(m.variables[v].name);
    if (it == assignment.end()) throw MissingVariable("assignment has no value for '" + m.variables[v].name + "'");
    x[v] = it->second;
  }
  auto eval = [&](const AffineExpr& e) {
    double s = e.constant;
    for (const auto& t : e.terms) s += t.coef * x[t.var];
    return s;
  };

  FeasibilityReport rep;
  for (const auto& r : m.rows) {
    double lhs = 0.0;
    for (const auto& t : r.terms) lhs += t.coef * x[t.var];
    double res = 0.0;
    switch (r.sense) {
      case RowSense::LessEqual: res = std::max(0.0, lhs - r.rhs); break;
      case RowSense::GreaterEqual: res = std::max(0.0, r.rhs - lhs); break;
      case RowSense::Equal: res = std::abs(lhs - r.rhs); break;
    }
    rep.max_linear_residual = std::max(rep.max_linear_residual, res);
  }
  for (std::size_t v = 0; v < m.variables.size(); ++v) {
    const auto& var = m.variables[v];
    rep.max_bound_violation = std::max({rep.max_bound_violation, var.lower - x[v], x[v] - var.upper});
    if (var.kind == VarKind::Binary)
      rep.max_integrality_violation = std::max(rep.max_integrality_violation, std::abs(x[v] - std::round(x[v])));
  }
  for (const auto& c : m.rotated_cones) {
    const double u = x[c.u], w = x[c.w], t = eval(c.t);
    rep.max_cone_violation = std::max({rep.max_cone_violation, t * t - u * w, -u, -w});
  }
  for (const auto& s : m.soc_rows) {
    double sq = 0.0;
    for (const auto& e : s.lhs) {
      const double v = eval(e);
      sq += v * v;
    }
    rep.max_cone_violation = std::max(rep.max_cone_violation, std::sqrt(sq) - eval(s.rhs));
  }
  rep.objective = eval(m.objective);
  return rep;
}

Assignment solution_assignment(const Solution& s, std::size_t num_levels) {
  Assignment a;
  for (std::size_t j = 0; j < s.num_candidates(); ++j) {
    a[x_name(j)] = s.x(j);
    for (std::size_t r = 0; r < num_levels; ++r) a[y_name(j, r)] = s.y(j, r);
  }
  return a;
}

Assignment exact_milp_assignment(const Instance& inst, const DerivedCoefficients& c, const Solution& s) {
  Assignment a = solution_assignment(s, inst.num_levels());
  const Vector z = utility_totals(c, s.y_matrix(inst.num_levels()));
  for (std::size_t i = 0; i < inst.num_zones(); ++i) {
    const double beta = 1.0 / z[static_cast<Eigen::Index>(i)];
    a[beta_name(i)] = beta;
    for (std::size_t j = 0; j < inst.num_candidates(); ++j)
      for (std::size_t r = 0; r < inst.num_levels(); ++r) a[w_name(i, j, r)] = s.y(j, r) * beta;
  }
  return a;
}

Assignment exact_micqp_assignment(const Instance& inst, const DerivedCoefficients& c, const Solution& s) {
  Assignment a = solution_assignment(s, inst.num_levels());
  const Vector z = utility_totals(c, s.y_matrix(inst.num_levels()));
  for (std::size_t i = 0; i < inst.num_zones(); ++i) {
    a[z_name(i)] = z[static_cast<Eigen::Index>(i)];
    a[beta_name(i)] = 1.0 / z[static_cast<Eigen::Index>(i)];
  }
  return a;
}

Assignment exact_oa_master_assignment(const Instance& inst, const DerivedCoefficients& c, const Solution& s) {
  Assignment a = solution_assignment(s, inst.num_levels());
  const Vector z = utility_totals(c, s.y_matrix(inst.num_levels()));
  for (std::size_t i = 0; i < inst.num_zones(); ++i) a[beta_name(i)] = 1.0 / z[static_cast<Eigen::Index>(i)];
  return a;
}

Solution solution_from_assignment(const Assignment& a, std::size_t num_candidates, std::size_t num_levels) {
  auto get = [&](const std::string& name) {
    auto it = a.find(name);
    if (it == a.end()) throw MissingVariable("assignment has no value for '" + name + "'");
    return std::round(it->second);
  };
  std::vector<double> x(num_candidates);
  Matrix y(static_cast<Eigen::Index>(num_candidates), static_cast<Eigen::Index>(num_levels));
  for (std::size_t j = 0; j < num_candidates; ++j) {
    x[j] = get(x_name(j));
    for (std::size_t r = 0; r < num_levels; ++r)
      y(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r)) = get(y_name(j, r));
  }
  return Solution::from_indicators(x, y);
}

}  // namespace cfld
