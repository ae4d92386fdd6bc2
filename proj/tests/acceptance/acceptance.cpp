// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cfld/bnb.hpp"
#include "cfld/formulations.hpp"
#include "cfld/instancegen.hpp"
#include "cfld/oa.hpp"
#include "cfld/oracle.hpp"
#include "support/oracles.hpp"

using namespace cfld;
namespace ts = cfld::testsupport;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 3) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

Instance generated(std::size_t zones, std::size_t cands, std::vector<double> levels, std::size_t competitors,
                   double f, std::uint64_t seed) {
  GenConfig g;
  g.n_zones = zones;
  g.n_candidates = cands;
  g.level_values = std::move(levels);
  g.n_competitors = competitors;
  g.fixed_cost = f;
  g.seed = seed;
  return generate(g);
}

/// The 50 small instances shared by the first two criteria.
std::vector<Instance> small_set() {
  std::vector<Instance> out;
  for (std::uint64_t seed = 1; seed <= 25; ++seed)
    for (double f : {0.0, 500.0}) out.push_back(generated(10, 6, {100, 500, 900}, 3, f, seed));
  return out;
}

MasterOracle exhaustive_master() {
  return [](const Instance& i, const DerivedCoefficients& c, const CutPool& p) { return master_exhaustive(i, c, p); };
}

Verdict oracle_equivalence() {
  const auto t0 = Clock::now();
  double worst_bnb = 0.0, worst_oa = 0.0;
  std::size_t n = 0;
  for (const auto& inst : small_set()) {
    const auto c = compute_coefficients(inst);
    const double ref = enumerate_optimal(inst, c).profit;
    const auto b = solve_bnb(inst, c);
    const auto o = run_oa(inst, c, exhaustive_master(), default_oa_start(inst));
    worst_bnb = std::max(worst_bnb, ts::rel_diff(b.best_profit, ref));
    worst_oa = std::max(worst_oa, ts::rel_diff(o.profit, ref));
    ++n;
  }
  const double t = seconds_since(t0);
  return {n == 50 && worst_bnb <= 1e-6 && worst_oa <= 1e-6 && t < 120.0,
          std::to_string(n) + " instances, max rel diff bnb " + fmt(worst_bnb) + ", oa " + fmt(worst_oa) + ", " +
              fmt(t) + " s"};
}

Verdict formulation_cross_validation() {
  double worst_res = 0.0, worst_obj = 0.0;
  std::size_t cuts_min = std::numeric_limits<std::size_t>::max();
  for (const auto& inst : small_set()) {
    const auto c = compute_coefficients(inst);
    const auto opt = enumerate_optimal(inst, c);
    const double target = inst.total_buying_power() - opt.profit;
    CutPool pool;
    pool.add(inst, c, default_oa_start(inst));
    pool.add(inst, c, Solution::all_closed(inst.num_candidates()));
    cuts_min = std::min(cuts_min, pool.size());
    const FeasibilityReport reps[] = {
        check_feasibility(build_milp(inst, c), exact_milp_assignment(inst, c, opt.solution)),
        check_feasibility(build_oa_master(inst, c, pool), exact_oa_master_assignment(inst, c, opt.solution)),
        check_feasibility(build_micqp(inst, c), exact_micqp_assignment(inst, c, opt.solution))};
    for (const auto& r : reps) {
      worst_res = std::max(worst_res, r.max_violation());
      worst_obj = std::max(worst_obj, std::abs(r.objective - target));
    }
  }
  return {worst_res < 1e-9 && worst_obj <= 1e-9 && cuts_min >= 1,
          "max residual " + fmt(worst_res) + ", max |objective - (sum a - phi*)| " + fmt(worst_obj)};
}

/// 1 / z_i from raw data in extended precision.
long double fhat_ld(const Instance& inst, const Matrix& y, std::size_t i) {
  long double v = 0.0L;
  for (std::size_t k = 0; k < inst.num_competitors(); ++k) {
    const long double d = inst.dist_competitors()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    v += static_cast<long double>(inst.competitors()[k].attractiveness) / (d * d);
  }
  long double u = 0.0L;
  for (std::size_t j = 0; j < inst.num_candidates(); ++j) {
    const long double d = inst.dist_candidates()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    for (std::size_t r = 0; r < inst.num_levels(); ++r)
      u += static_cast<long double>(inst.levels()[r]) / (d * d * v) *
           static_cast<long double>(y(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r)));
  }
  return 1.0L / (u + 1.0L);
}

Verdict gradient_check() {
  const auto inst = generated(20, 20, GenConfig{}.level_values, 5, 0.0, 1);
  const auto c = compute_coefficients(inst);
  std::mt19937_64 rng(3);
  const long double h = 1e-5L;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Matrix y = ts::random_fractional(rng, 20, 5, true);
    const Matrix g = complement_gradient(c, FractionalPoint(y));
    for (std::size_t j = 0; j < 20; ++j)
      for (std::size_t r = 0; r < 5; ++r) {
        Matrix yp = y, ym = y;
        yp(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r)) += static_cast<double>(h);
        ym(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r)) -= static_cast<double>(h);
        const long double step = static_cast<long double>(yp(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r))) -
                                 static_cast<long double>(ym(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r)));
        for (std::size_t i = 0; i < 20; ++i) {
          const double fd = static_cast<double>((fhat_ld(inst, yp, i) - fhat_ld(inst, ym, i)) / step);
          const double an = g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c.column(j, r)));
          worst = std::max(worst, std::abs(an - fd) / std::abs(fd));
        }
      }
  }
  return {worst < 1e-5, "100 points, max relative error " + fmt(worst)};
}

Verdict concavity_suite() {
  const auto inst = generated(20, 20, GenConfig{}.level_values, 5, 0.0, 2);
  const auto c = compute_coefficients(inst);
  std::mt19937_64 rng(4);
  std::size_t violations = 0;
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Matrix y1 = ts::random_fractional(rng, 20, 5), y2 = ts::random_fractional(rng, 20, 5);
    const Vector f1 = capture_fraction(c, FractionalPoint(y1));
    const Vector f2 = capture_fraction(c, FractionalPoint(y2));
    const Vector fm = capture_fraction(c, FractionalPoint((y1 + y2) / 2.0));
    for (Eigen::Index i = 0; i < fm.size(); ++i) {
      const double gap = (f1[i] + f2[i]) / 2.0 - fm[i];
      worst = std::max(worst, gap);
      if (gap > 1e-12) ++violations;
    }
  }
  return {violations == 0, "1000 trials x 20 zones, violations " + std::to_string(violations) + ", worst excess " +
                               fmt(worst)};
}

Verdict cone_identity() {
  FormulationModel m;
  const auto x = m.add_variable("x", VarKind::Continuous, -10.0, 10.0);
  const auto y = m.add_variable("y", VarKind::Continuous, 0.0, 10.0);
  const auto z = m.add_variable("z", VarKind::Continuous, 0.0, 10.0);
  m.rotated_cones.push_back({"k", y, z, AffineExpr{{{x, 1.0}}, 0.0}});
  const auto soc = soc_convert(m);
  if (soc.soc_rows.size() != 1) return {false, "conversion produced no SOC row"};
  const auto& row = soc.soc_rows[0];
  auto eval = [](const AffineExpr& e, const std::vector<double>& v) {
    double s = e.constant;
    for (const auto& t : e.terms) s += t.coef * v[t.var];
    return s;
  };
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(-3.0, 3.0), uy(0.0, 3.0);
  std::size_t bad = 0;
  for (int k = 0; k < 100000; ++k) {
    const std::vector<double> v{ux(rng), uy(rng), uy(rng)};
    const double rot = v[1] * v[2] - v[0] * v[0];
    double sq = 0.0;
    for (const auto& e : row.lhs) sq += eval(e, v) * eval(e, v);
    const double socs = eval(row.rhs, v) - std::sqrt(sq);
    if ((rot > 1e-12 && socs < -1e-12) || (rot < -1e-12 && socs > 1e-12)) ++bad;
  }
  return {bad == 0, "100000 triples, discrepancies " + std::to_string(bad)};
}

Verdict oa_behavior() {
  const auto t0 = Clock::now();
  std::size_t n = 0, max_it = 0, bad = 0;
  for (double f : {0.0, 2500.0, 5000.0})
    for (std::size_t k : {1u, 5u, 10u})
      for (std::uint64_t seed : {1u, 2u}) {
        const auto inst = generated(20, 20, GenConfig{}.level_values, k, f, seed);
        const auto c = compute_coefficients(inst);
        const auto rep = run_oa(
            inst, c, [](const Instance& i, const DerivedCoefficients& cc, const CutPool& p) { return master_bnb(i, cc, p); },
            default_oa_start(inst));
        ++n;
        max_it = std::max(max_it, rep.iterations);
        bool ok = rep.termination == OATermination::RepeatInT || rep.termination == OATermination::ObjectiveGap;
        ok = ok && rep.iterations <= 25;
        for (std::size_t t = 1; t < rep.master_objectives.size(); ++t)
          if (rep.master_objectives[t] < rep.master_objectives[t - 1] - 1e-9 * (1.0 + std::abs(rep.master_objectives[t])))
            ok = false;
        if (!ok) ++bad;
      }
  const double t = seconds_since(t0);
  return {n == 18 && bad == 0 && t < 600.0, std::to_string(n) + " instances, failures " + std::to_string(bad) +
                                                 ", max iterations " + std::to_string(max_it) + ", " + fmt(t) + " s"};
}

Verdict reformulation_scale() {
  bool ok = true;
  std::string worst;
  for (std::size_t ni : {5u, 10u, 20u})
    for (std::size_t nj : {3u, 6u})
      for (std::size_t nr : {1u, 3u, 5u}) {
        std::vector<double> levels = GenConfig{}.level_values;
        levels.resize(nr);
        const auto inst = generated(ni, nj, levels, 2, 0.0, 1);
        const auto c = compute_coefficients(inst);
        const auto milp = build_milp(inst, c);
        const auto micqp = build_micqp(inst, c);
        const std::size_t base = nj + nj * nr;
        const bool cell = milp.variables.size() == base + ni + ni * nj * nr &&
                          milp.rows.size() == ni + nj + 4 * ni * nj * nr && micqp.variables.size() == base + 2 * ni &&
                          micqp.rows.size() == ni + nj && micqp.rotated_cones.size() == ni;
        if (!cell) {
          ok = false;
          worst = " mismatch at " + std::to_string(ni) + "x" + std::to_string(nj) + "x" + std::to_string(nr);
        }
      }
  return {ok, "18 shapes: MILP adds |I|+|I||J||R| variables and |I|+4|I||J||R| rows, MICQP adds 2|I| variables and "
              "|I| cones" +
                  worst};
}

Verdict trend_reproduction() {
  const std::vector<std::size_t> ks{1, 5, 10};
  const std::vector<double> fs{0.0, 2500.0, 5000.0};
  std::size_t k_bad = 0, f_bad = 0, unproven = 0;
  std::ostringstream shapes;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::vector<std::vector<double>> phi(ks.size(), std::vector<double>(fs.size()));
    std::vector<std::vector<std::size_t>> open(ks.size(), std::vector<std::size_t>(fs.size()));
    for (std::size_t a = 0; a < ks.size(); ++a)
      for (std::size_t b = 0; b < fs.size(); ++b) {
        const auto inst = generated(30, 30, GenConfig{}.level_values, ks[a], fs[b], seed);
        const auto rep = solve_bnb(inst, compute_coefficients(inst));
        if (!rep.proven) ++unproven;
        phi[a][b] = rep.best_profit;
        open[a][b] = rep.best_solution.open_count();
      }
    auto drop = [](double hi, double lo) { return lo <= hi + 1e-6 * (1.0 + std::abs(hi)); };
    for (std::size_t b = 0; b < fs.size(); ++b)
      for (std::size_t a = 1; a < ks.size(); ++a)
        if (!drop(phi[a - 1][b], phi[a][b])) ++k_bad;
    for (std::size_t a = 0; a < ks.size(); ++a)
      for (std::size_t b = 1; b < fs.size(); ++b)
        if (!drop(phi[a][b - 1], phi[a][b])) ++f_bad;
    shapes << " seed " << seed << " F(K) per f:";
    for (std::size_t b = 0; b < fs.size(); ++b) {
      shapes << " [";
      for (std::size_t a = 0; a < ks.size(); ++a) shapes << (a ? "," : "") << open[a][b];
      shapes << "]";
    }
    shapes << ";";
  }
  return {k_bad == 0 && f_bad == 0 && unproven == 0,
          "45 instances, K-order breaks " + std::to_string(k_bad) + ", f-order breaks " + std::to_string(f_bad) +
              ", unproven " + std::to_string(unproven) + ";" + shapes.str()};
}

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string("'") + CFLD_CLI_PATH + "' " + args + " 2>&1";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int st = ::pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict determinism() {
  const auto dir = std::filesystem::temp_directory_path() / ("cfld_accept_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  auto p = [&](const std::string& n) { return (dir / n).string(); };
  std::vector<std::string> failed;
  std::size_t checks = 0;
  auto twice = [&](const std::string& label, const std::function<std::string(const std::string&)>& args,
                   const std::vector<std::string>& files) {
    const auto a = cli(args("a"));
    const auto b = cli(args("b"));
    ++checks;
    bool same = a.code == 0 && b.code == 0 && a.out == b.out;
    for (const auto& f : files) same = same && slurp(p("a" + f)) == slurp(p("b" + f)) && !slurp(p("a" + f)).empty();
    if (!same) failed.push_back(label);
  };
  auto strip_paths = [](std::string s) {
    // "wrote <path>" differs only by the output file name.
    return s.substr(s.find('('));
  };
  {
    const auto a = cli("generate --seed 7 --zones 12 --fixed-cost 2500 --out " + p("ainst.json"));
    const auto b = cli("generate --seed 7 --zones 12 --fixed-cost 2500 --out " + p("binst.json"));
    ++checks;
    if (a.code || b.code || strip_paths(a.out) != strip_paths(b.out) || slurp(p("ainst.json")) != slurp(p("binst.json")))
      failed.push_back("generate");
  }
  const std::string in = p("ainst.json");
  for (const std::string form : {"milp", "oa-master", "micqp"})
    for (const std::string fmt_ : {"mps", "cbf", "json"}) {
      if (form == "micqp" && fmt_ == "mps") continue;
      twice("export " + form + " " + fmt_,
            [&](const std::string& tag) {
              return "export --in " + in + " --form " + form + " --fmt " + fmt_ + " --out " + p(tag + "model." + fmt_);
            },
            {"model." + fmt_});
    }
  for (const std::string m : {"bnb", "oa"})
    twice("solve " + m,
          [&](const std::string& tag) {
            return "solve --in " + in + " --method " + m + " --no-time --report " + p(tag + "report.json");
          },
          {"report.json"});
  std::filesystem::remove_all(dir);
  std::string detail = std::to_string(checks) + " command pairs compared";
  for (const auto& f : failed) detail += ", differs: " + f;
  return {failed.empty(), detail};
}

Verdict desk_performance() {
  const auto inst = generated(20, 20, GenConfig{}.level_values, 5, 2500.0, 1);
  const auto t0 = Clock::now();
  BnBOptions opt;
  opt.rel_tol = 1e-6;
  const auto rep = solve_bnb(inst, compute_coefficients(inst), opt);
  const double t = seconds_since(t0);
  return {rep.proven && rep.proven_gap <= 1e-6 && t < 300.0,
          "gap " + fmt(rep.proven_gap) + ", nodes " + std::to_string(rep.nodes_explored) + ", " + fmt(t) + " s"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"oracle equivalence", oracle_equivalence},
      {"formulation cross-validation", formulation_cross_validation},
      {"gradient check", gradient_check},
      {"concavity suite", concavity_suite},
      {"rotated-cone/SOC identity", cone_identity},
      {"OA behavior", oa_behavior},
      {"reformulation scale", reformulation_scale},
      {"trend reproduction", trend_reproduction},
      {"determinism", determinism},
      {"desk-scale performance", desk_performance},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "PASS" : "FAIL") << " " << (k + 1) << " " << criteria[k].first << ": " << v.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
