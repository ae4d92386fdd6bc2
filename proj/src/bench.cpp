#include "cfld/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "cfld/formulations.hpp"
#include "cfld/oracle.hpp"

namespace cfld {

std::string to_string(Method m) {
  switch (m) {
    case Method::Bnb: return "bnb";
    case Method::OaExhaustive: return "oa-exhaustive";
    case Method::OaBnb: return "oa-bnb";
    case Method::OaExternal: return "oa-external";
    case Method::ExternalMilp: return "external-milp";
    case Method::ExternalMicqp: return "external-micqp";
    case Method::Oracle: return "oracle";
  }
  return "unknown";
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> m{Method::Bnb,          Method::OaExhaustive,  Method::OaBnb, Method::OaExternal,
                                     Method::ExternalMilp, Method::ExternalMicqp, Method::Oracle};
  return m;
}

Method parse_method(const std::string& name) {
  for (auto m : all_methods())
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown method '" + name + "'");
}

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Ok: return "ok";
    case RunStatus::NotProven: return "not-proven";
    case RunStatus::Unavailable: return "unavailable";
    case RunStatus::Error: return "error";
  }
  return "error";
}

namespace {

RunStatus parse_status(const std::string& s) {
  for (auto st : {RunStatus::Ok, RunStatus::NotProven, RunStatus::Unavailable, RunStatus::Error})
    if (to_string(st) == s) return st;
  throw std::invalid_argument("unknown status '" + s + "'");
}

/// Solves a full formulation through the adapter and validates the result.
Solution external_full(const Instance& inst, const FormulationModel& model,
                       bool conic, const RunOptions& opt) {
  const std::string text = conic ? export_cbf(model) : export_mps(model);
  const auto raw = invoke_on_text(*opt.adapter, text, conic ? ".cbf" : ".mps", opt.time_limit_seconds);
  const auto parsed = parse_solution(raw, model);
  const auto rep = check_feasibility(model, parsed.assignment);
  if (!rep.feasible(1e-6))
    throw InfeasibleSolution("external solution violates the model by " + std::to_string(rep.max_violation()));
  return solution_from_assignment(parsed.assignment, inst.num_candidates(), inst.num_levels());
}

}  // namespace

RunOutcome run_method(const Instance& instance, Method method, const RunOptions& options) {
  RunOutcome out;
  const auto start = std::chrono::steady_clock::now();
  const bool external = method == Method::OaExternal || method == Method::ExternalMilp || method == Method::ExternalMicqp;
  if (external && !options.adapter) {
    out.status = RunStatus::Unavailable;
    out.note = "no external solver adapter configured";
    return out;
  }
  try {
    const auto coeffs = compute_coefficients(instance);
    auto run_oa_with = [&](const MasterOracle& master) {
      const auto rep = run_oa(instance, coeffs, master, default_oa_start(instance), options.oa);
      out.solution = rep.solution;
      out.proven = rep.proven;
      out.iterations = rep.iterations;
      out.master_objectives = rep.master_objectives;
      out.termination = to_string(rep.termination);
      if (!rep.master_lower_bounds.empty())
        out.gap = std::max(0.0, (rep.objective - rep.master_lower_bounds.back()) / (1.0 + std::abs(rep.objective)));
    };
    switch (method) {
      case Method::Bnb: {
        const auto rep = solve_bnb(instance, coeffs, options.bnb);
        out.solution = rep.best_solution;
        out.proven = rep.proven;
        out.nodes = rep.nodes_explored;
        out.gap = rep.proven_gap;
        break;
      }
      case Method::OaExhaustive:
        run_oa_with([&](const Instance& i, const DerivedCoefficients& c, const CutPool& p) {
          return master_exhaustive(i, c, p, options.oracle_cap);
        });
        break;
      case Method::OaBnb:
        run_oa_with([&](const Instance& i, const DerivedCoefficients& c, const CutPool& p) {
          return master_bnb(i, c, p, options.master);
        });
        break;
      case Method::OaExternal:
        run_oa_with([&](const Instance& i, const DerivedCoefficients& c, const CutPool& p) {
          return master_external(i, c, p, *options.adapter, options.time_limit_seconds);
        });
        break;
      case Method::ExternalMilp:
        out.solution = external_full(instance, build_milp(instance, coeffs), false, options);
        out.proven = true;
        out.note = "optimality as reported by the external solver";
        break;
      case Method::ExternalMicqp:
        out.solution = external_full(instance, build_micqp(instance, coeffs), true, options);
        out.proven = true;
        out.note = "optimality as reported by the external solver";
        break;
      case Method::Oracle: {
        const auto rep = enumerate_optimal(instance, coeffs, options.oracle_cap);
        out.solution = rep.solution;
        out.proven = true;
        out.nodes = rep.evaluated;
        break;
      }
    }
    out.profit = profit(instance, coeffs, out.solution);
    out.status = out.proven ? RunStatus::Ok : RunStatus::NotProven;
  } catch (const std::exception& e) {
    out.status = RunStatus::Error;
    out.proven = false;
    out.note = e.what();
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

void sort_records(std::vector<BenchRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const BenchRecord& a, const BenchRecord& b) {
    return std::make_tuple(a.zones, a.fixed_cost, a.competitors, static_cast<int>(a.method), a.seed) <
           std::make_tuple(b.zones, b.fixed_cost, b.competitors, static_cast<int>(b.method), b.seed);
  });
}

std::vector<BenchRecord> run_sweep(const SweepConfig& sweep, const RunOptions& options) {
  std::vector<BenchRecord> out;
  for (auto nz : sweep.zones)
    for (double f : sweep.fixed_costs)
      for (auto k : sweep.competitors)
        for (auto seed : sweep.seeds) {
          GenConfig g = sweep.base;
          g.n_zones = nz;
          g.n_candidates = sweep.candidates == 0 ? nz : sweep.candidates;
          g.n_competitors = k;
          g.fixed_cost = f;
          g.seed = seed;
          std::optional<Instance> inst;
          std::string gen_error;
          try {
            inst = generate(g);
          } catch (const std::exception& e) {
            gen_error = e.what();
          }
          for (auto m : sweep.methods) {
            BenchRecord r;
            r.zones = nz;
            r.candidates = g.n_candidates;
            r.levels = g.level_values.size();
            r.competitors = k;
            r.fixed_cost = f;
            r.seed = seed;
            r.method = m;
            if (!inst) {
              r.status = RunStatus::Error;
              r.note = "generation failed: " + gen_error;
              out.push_back(std::move(r));
              continue;
            }
            const auto res = run_method(*inst, m, options);
            r.status = res.status;
            r.proven = res.proven;
            r.cpu_seconds = std::round(res.seconds * 10.0) / 10.0;
            r.profit_k = res.profit / 1000.0;
            r.open_count = res.solution.open_count();
            r.iterations = res.iterations;
            r.note = res.note;
            out.push_back(std::move(r));
          }
        }
  sort_records(out);
  return out;
}

namespace {

std::string g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch == '\n' || ch == '\r' ? ' ' : ch;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line, const std::string& where) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          cur += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (quoted) throw FormatError(where, "unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

std::string records_to_csv(const std::vector<BenchRecord>& records, bool include_time) {
  std::string out = std::string(kBenchHeader) + "\n";
  for (const auto& r : records) {
    out += std::to_string(r.zones) + "," + std::to_string(r.candidates) + "," + std::to_string(r.levels) + "," +
           std::to_string(r.competitors) + "," + g6(r.fixed_cost) + "," + std::to_string(r.seed) + "," +
           to_string(r.method) + "," + to_string(r.status) + "," + (r.proven ? "1" : "0") + "," +
           g6(include_time ? r.cpu_seconds : 0.0) + "," + g6(r.profit_k) + "," + std::to_string(r.open_count) + "," +
           std::to_string(r.iterations) + "," + csv_field(r.note) + "\n";
  }
  return out;
}

std::vector<BenchRecord> records_from_csv(const std::string& text) {
  std::vector<BenchRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = "line " + std::to_string(lineno);
    if (lineno == 1) {
      if (line != kBenchHeader) throw FormatError(where, "unexpected header '" + line + "'");
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_csv_line(line, where);
    if (f.size() != 14) throw FormatError(where, "expected 14 fields, got " + std::to_string(f.size()));
    try {
      BenchRecord r;
      r.zones = std::stoul(f[0]);
      r.candidates = std::stoul(f[1]);
      r.levels = std::stoul(f[2]);
      r.competitors = std::stoul(f[3]);
      r.fixed_cost = std::stod(f[4]);
      r.seed = std::stoull(f[5]);
      r.method = parse_method(f[6]);
      r.status = parse_status(f[7]);
      r.proven = f[8] == "1";
      r.cpu_seconds = std::stod(f[9]);
      r.profit_k = std::stod(f[10]);
      r.open_count = std::stoul(f[11]);
      r.iterations = std::stoul(f[12]);
      r.note = f[13];
      out.push_back(std::move(r));
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception& e) {
      throw FormatError(where, e.what());
    }
  }
  if (lineno == 0) throw FormatError("line 1", "missing header");
  return out;
}

PlotSeries make_plot_series(const std::vector<BenchRecord>& records, Method method, std::size_t zones) {
  PlotSeries s;
  std::set<std::size_t> ks;
  std::set<double> fs;
  std::map<std::pair<std::size_t, double>, std::tuple<double, double, int>> acc;
  for (const auto& r : records) {
    if (r.method != method || r.zones != zones) continue;
    ks.insert(r.competitors);
    fs.insert(r.fixed_cost);
    if (r.status != RunStatus::Ok || !r.proven) continue;
    auto& [p, f, n] = acc[{r.competitors, r.fixed_cost}];
    p += r.profit_k;
    f += static_cast<double>(r.open_count);
    ++n;
  }
  s.k_values.assign(ks.begin(), ks.end());
  s.f_values.assign(fs.begin(), fs.end());
  s.profit.assign(s.k_values.size(), std::vector<std::optional<double>>(s.f_values.size()));
  s.open_count = s.profit;
  for (std::size_t a = 0; a < s.k_values.size(); ++a)
    for (std::size_t b = 0; b < s.f_values.size(); ++b) {
      auto it = acc.find({s.k_values[a], s.f_values[b]});
      if (it == acc.end()) continue;
      const auto& [p, f, n] = it->second;
      s.profit[a][b] = p / n;
      s.open_count[a][b] = f / n;
    }
  return s;
}

std::string series_to_csv(const PlotSeries& s, bool open_counts) {
  std::string out = "K";
  for (double f : s.f_values) out += ",f=" + g6(f);
  out += "\n";
  const auto& grid = open_counts ? s.open_count : s.profit;
  for (std::size_t a = 0; a < s.k_values.size(); ++a) {
    out += std::to_string(s.k_values[a]);
    for (std::size_t b = 0; b < s.f_values.size(); ++b) out += "," + (grid[a][b] ? g6(*grid[a][b]) : std::string("NA"));
    out += "\n";
  }
  return out;
}

namespace {

std::vector<double> present(const std::vector<std::optional<double>>& v) {
  std::vector<double> out;
  for (const auto& x : v)
    if (x) out.push_back(*x);
  return out;
}

bool non_increasing(const std::vector<double>& v) {
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[k - 1] + 1e-9 * (1.0 + std::abs(v[k - 1]))) return false;
  return true;
}

std::string shape(const std::vector<double>& v) {
  if (v.size() < 2) return "too few points";
  bool up = true, down = true;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] < v[k - 1]) up = false;
    if (v[k] > v[k - 1]) down = false;
  }
  if (up && down) return "flat";
  if (up) return "nondecreasing";
  if (down) return "nonincreasing";
  const auto peak = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
  bool rise_fall = peak > 0 && peak + 1 < v.size();
  for (std::size_t k = 1; k <= peak && rise_fall; ++k) rise_fall = v[k] >= v[k - 1];
  for (std::size_t k = peak + 1; k < v.size() && rise_fall; ++k) rise_fall = v[k] <= v[k - 1];
  return rise_fall ? "rises then falls" : "mixed";
}

}  // namespace

std::string trend_report(const PlotSeries& s) {
  std::ostringstream out;
  for (std::size_t b = 0; b < s.f_values.size(); ++b) {
    std::vector<std::optional<double>> pcol, fcol;
    for (std::size_t a = 0; a < s.k_values.size(); ++a) {
      pcol.push_back(s.profit[a][b]);
      fcol.push_back(s.open_count[a][b]);
    }
    const auto p = present(pcol);
    out << "f=" << g6(s.f_values[b]) << ": profit non-increasing in K: " << (non_increasing(p) ? "yes" : "no")
        << "; F vs K: " << shape(present(fcol));
    if (p.size() != pcol.size()) out << " (" << pcol.size() - p.size() << " missing)";
    out << "\n";
  }
  for (std::size_t a = 0; a < s.k_values.size(); ++a)
    out << "K=" << s.k_values[a] << ": profit non-increasing in f: "
        << (non_increasing(present(s.profit[a])) ? "yes" : "no") << "\n";
  return out.str();
}

}  // namespace cfld
