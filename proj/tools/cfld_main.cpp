#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfld/bench.hpp"
#include "cfld/extsolver.hpp"
#include "cfld/formulations.hpp"
#include "cfld/instancegen.hpp"
#include "cfld/oa.hpp"
#include "cfld/oracle.hpp"

namespace {

using namespace cfld;
using nlohmann::json;

enum ExitCode : int {
  kOk = 0,
  kGeneric = 1,
  kUsage = 2,
  kIo = 3,
  kNotProven = 4,
  kUnsupported = 5,
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnsupportedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Config files are JSON objects keyed by long option names, applied to the
/// subcommand being run: {"method": "oa", "master": "bnb"}. A nested object
/// named after a subcommand ({"bench": {"seeds": [1, 2]}}) targets that one.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* root) : root_(root) {}

  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json out = json::object();
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string& name = opt->get_lnames().front();
      if (opt->count() == 0 && !default_also) continue;
      std::vector<std::string> values = opt->results();
      if (values.empty()) {
        if (opt->get_default_str().empty()) continue;
        values.push_back(opt->get_default_str());
      }
      if (opt->get_type_size() == 0)
        out[name] = values.front() != "false";
      else if (values.size() == 1 && opt->get_expected_max() <= 1)
        out[name] = values.front();
      else
        out[name] = values;
    }
    return out.dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json doc;
    try {
      doc = json::parse(input);
    } catch (const json::parse_error& e) {
      throw CLI::FileError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw CLI::FileError("config must be a JSON object");
    std::vector<std::string> parents;
    const auto active = root_->get_subcommands();
    if (!active.empty()) parents.push_back(active.front()->get_name());
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : doc.items()) {
      const bool section = value.is_object() && root_->get_subcommand_no_throw(key) != nullptr;
      if (section) {
        flatten(value, {key}, items);
      } else {
        flatten(json{{key, value}}, parents, items);
      }
    }
    return items;
  }

 private:
  const CLI::App* root_;

  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void flatten(const json& obj, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_object()) {
        auto p = parents;
        p.push_back(key);
        flatten(value, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      out.push_back(std::move(item));
    }
  }
};

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("cannot write " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt_double(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

struct AdapterFlags {
  std::string solver_cmd;
  std::string adapter_path;
  double time_limit = 600.0;

  void add(CLI::App* app) {
    app->add_option("--solver-cmd", solver_cmd,
                    "External solver command template with {model}, {solution} and {time_limit} placeholders");
    app->add_option("--adapter", adapter_path,
                    std::string("Adapter config JSON (default: $") + kAdapterEnvVar + ")");
    app->add_option("--time-limit", time_limit, "Time limit for external solver runs, seconds")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  }

  std::optional<AdapterConfig> resolve() const {
    if (!solver_cmd.empty()) {
      AdapterConfig cfg;
      cfg.command_template = solver_cmd;
      return cfg;
    }
    if (!adapter_path.empty()) return load_adapter_config(adapter_path);
    return adapter_from_environment();
  }
};

// ---------------------------------------------------------------- generate

struct GenerateCmd {
  GenConfig cfg;
  std::size_t candidates = 0;
  std::string out;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("generate", "Generate a random instance");
    c->add_option("--zones", cfg.n_zones, "Number of demand zones |I|")->capture_default_str();
    c->add_option("--candidates", candidates, "Number of candidate sites |J| (default: same as --zones)");
    c->add_option("--competitors", cfg.n_competitors, "Number of competitor facilities K")->capture_default_str();
    c->add_option("--fixed-cost", cfg.fixed_cost, "Fixed opening cost f of every site")->capture_default_str();
    c->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    c->add_option("--levels", cfg.level_values, "Attractiveness levels Q_r")->delimiter(',')->capture_default_str();
    c->add_option("--level-cost-multiplier", cfg.level_cost_multiplier, "Level cost c_jr = multiplier * Q_r")
        ->capture_default_str();
    c->add_option("--side", cfg.square_side, "Side of the square market area")->capture_default_str();
    c->add_option("--out", out, "Output instance file ('-' for stdout)")->required();
    c->callback([this] { code = run(); });
  }

  int run() {
    cfg.n_candidates = candidates == 0 ? cfg.n_zones : candidates;
    try {
      cfg.validate();
    } catch (const InvalidInstance& e) {
      throw UsageError(e.what());
    }
    const Instance inst = generate(cfg);
    write_text(out, instance_to_json(inst));
    if (out != "-")
      std::printf("wrote %s (I=%zu J=%zu R=%zu K=%zu)\n", out.c_str(), inst.num_zones(), inst.num_candidates(),
                  inst.num_levels(), inst.num_competitors());
    return kOk;
  }

  int code = kOk;
};

// ---------------------------------------------------------------- reports

void print_solution(const Instance& inst, const Solution& s, double profit_value) {
  std::printf("profit: %s (%s thousand)\n", fmt_double("%.6f", profit_value).c_str(),
              fmt_double("%.6f", profit_value / 1000.0).c_str());
  std::printf("open facilities: %zu\n", s.open_count());
  for (std::size_t j = 0; j < s.num_candidates(); ++j) {
    if (!s.is_open(j)) continue;
    const auto r = static_cast<std::size_t>(s.level(j));
    std::printf("  facility %zu (%s): level %zu, Q=%s\n", j + 1, inst.candidates()[j].id.c_str(), r + 1,
                fmt_double("%g", inst.levels()[r]).c_str());
  }
}

json solution_json(const Instance& inst, const Solution& s) {
  json fac = json::array();
  for (std::size_t j = 0; j < s.num_candidates(); ++j) {
    if (!s.is_open(j)) continue;
    const auto r = static_cast<std::size_t>(s.level(j));
    fac.push_back({{"facility", j + 1}, {"id", inst.candidates()[j].id}, {"level", r + 1},
                   {"attractiveness", inst.levels()[r]}});
  }
  return fac;
}

// ---------------------------------------------------------------- oracle

struct OracleCmd {
  std::string in;
  std::uint64_t cap = kDefaultEnumerationCap;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("oracle", "Exhaustively enumerate a small instance");
    c->add_option("--in", in, "Instance file")->required();
    c->add_option("--cap", cap, "Maximum number of configurations")->capture_default_str();
    c->callback([this] { code = run(); });
  }

  int run() {
    const Instance inst = load_instance(in);
    const auto coeffs = compute_coefficients(inst);
    const auto res = enumerate_optimal(inst, coeffs, cap);
    print_solution(inst, res.solution, res.profit);
    std::printf("evaluated: %llu\n", static_cast<unsigned long long>(res.evaluated));
    return kOk;
  }

  int code = kOk;
};

// ---------------------------------------------------------------- solve

struct SolveCmd {
  std::string in;
  std::string method = "bnb";
  std::string master = "bnb";
  double tol = 1e-6;
  std::uint64_t node_cap = 1'000'000;
  std::size_t max_iterations = 100;
  std::uint64_t cap = kDefaultEnumerationCap;
  std::string report;
  bool no_time = false;
  AdapterFlags adapter;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("solve", "Solve an instance");
    c->add_option("--in", in, "Instance file")->required();
    c->add_option("--method", method, "bnb, oa, oracle, external-milp or external-micqp")
        ->check(CLI::IsMember({"bnb", "oa", "oracle", "external-milp", "external-micqp"}))
        ->capture_default_str();
    c->add_option("--master", master, "OA master solver: exhaustive, bnb or external")
        ->check(CLI::IsMember({"exhaustive", "bnb", "external"}))
        ->capture_default_str();
    c->add_option("--tol", tol, "Relative optimality tolerance for bnb")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--node-cap", node_cap, "Node limit for bnb")->capture_default_str();
    c->add_option("--max-iterations", max_iterations, "OA iteration limit")->capture_default_str();
    c->add_option("--cap", cap, "Enumeration cap for oracle and exhaustive master")->capture_default_str();
    c->add_option("--report", report, "Also write a JSON report to this file");
    c->add_flag("--no-time", no_time, "Leave timing out of the output");
    adapter.add(c);
    c->callback([this] { code = run(); });
  }

  Method selected() const {
    if (method == "oa") {
      if (master == "exhaustive") return Method::OaExhaustive;
      if (master == "external") return Method::OaExternal;
      return Method::OaBnb;
    }
    return parse_method(method);
  }

  int run() {
    const Instance inst = load_instance(in);
    RunOptions opt;
    opt.bnb.rel_tol = tol;
    opt.bnb.node_cap = node_cap;
    opt.oa.max_iterations = max_iterations;
    opt.oracle_cap = cap;
    opt.time_limit_seconds = adapter.time_limit;
    opt.adapter = adapter.resolve();
    const Method m = selected();
    const RunOutcome res = run_method(inst, m, opt);

    std::printf("method: %s\n", to_string(m).c_str());
    std::printf("status: %s\n", to_string(res.status).c_str());
    if (res.status == RunStatus::Unavailable || res.status == RunStatus::Error) {
      std::fprintf(stderr, "error: %s\n", res.note.c_str());
      return res.status == RunStatus::Unavailable ? kUnsupported : kGeneric;
    }
    print_solution(inst, res.solution, res.profit);
    std::printf("proven: %s\n", res.proven ? "yes" : "no");
    std::printf("gap: %s\n", fmt_double("%.3g", res.gap).c_str());
    if (m == Method::Bnb || m == Method::Oracle) std::printf("nodes: %llu\n", static_cast<unsigned long long>(res.nodes));
    if (!res.termination.empty()) {
      std::printf("iterations: %zu\n", res.iterations);
      std::printf("termination: %s\n", res.termination.c_str());
    }
    if (!res.note.empty()) std::printf("note: %s\n", res.note.c_str());
    if (!no_time) std::printf("time: %.1f s\n", res.seconds);

    if (!report.empty()) {
      json j = {{"method", to_string(m)},
                {"status", to_string(res.status)},
                {"proven", res.proven},
                {"profit", res.profit},
                {"profit_thousands", res.profit / 1000.0},
                {"open_count", res.solution.open_count()},
                {"open", solution_json(inst, res.solution)},
                {"gap", res.gap},
                {"nodes", res.nodes}};
      if (!res.termination.empty()) {
        j["iterations"] = res.iterations;
        j["termination"] = res.termination;
        j["master_objectives"] = res.master_objectives;
      }
      if (!no_time) j["seconds"] = res.seconds;
      write_text(report, j.dump(2) + "\n");
    }
    return res.proven ? kOk : kNotProven;
  }

  int code = kOk;
};

// ---------------------------------------------------------------- export

struct ExportCmd {
  std::string in;
  std::string form = "milp";
  std::string fmt = "mps";
  std::string out;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("export", "Write a formulation of an instance");
    c->add_option("--in", in, "Instance file")->required();
    c->add_option("--form", form,
                  "milp, oa-master (cuts at the OA start points), micqp (rotated cones) or micqp-soc")
        ->check(CLI::IsMember({"milp", "oa-master", "micqp", "micqp-soc"}))
        ->capture_default_str();
    c->add_option("--fmt", fmt, "mps, cbf or json")->check(CLI::IsMember({"mps", "cbf", "json"}))->capture_default_str();
    c->add_option("--out", out, "Output file ('-' for stdout)")->required();
    c->callback([this] { code = run(); });
  }

  int run() {
    const Instance inst = load_instance(in);
    const auto coeffs = compute_coefficients(inst);
    FormulationModel model;
    if (form == "milp") {
      model = build_milp(inst, coeffs);
    } else if (form == "oa-master") {
      CutPool pool;
      pool.add(inst, coeffs, default_oa_start(inst));
      pool.add(inst, coeffs, Solution::all_closed(inst.num_candidates()));
      model = build_oa_master(inst, coeffs, pool);
    } else if (form == "micqp") {
      model = build_micqp(inst, coeffs);
    } else {
      model = soc_convert(build_micqp(inst, coeffs));
    }
    std::string text;
    if (fmt == "mps") {
      try {
        text = export_mps(model);
      } catch (const UnsupportedRow& e) {
        throw UnsupportedError(e.what());
      }
    } else if (fmt == "cbf") {
      text = export_cbf(model);
    } else {
      text = export_json(model);
    }
    write_text(out, text);
    return kOk;
  }

  int code = kOk;
};

// ---------------------------------------------------------------- bench

struct BenchCmd {
  SweepConfig sweep;
  std::vector<std::string> methods{"bnb", "oa-bnb"};
  std::vector<double> levels = GenConfig{}.level_values;
  std::string out = "-";
  bool no_time = false;
  double tol = 1e-6;
  std::uint64_t node_cap = 1'000'000;
  AdapterFlags adapter;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("bench", "Run a benchmark sweep and write CSV records");
    c->add_option("--zones", sweep.zones, "Zone counts |I|")->delimiter(',')->capture_default_str();
    c->add_option("--candidates", sweep.candidates, "Candidate count |J| (0: same as zones)")->capture_default_str();
    c->add_option("--competitors", sweep.competitors, "Competitor counts K")->delimiter(',')->capture_default_str();
    c->add_option("--fixed-costs", sweep.fixed_costs, "Fixed costs f")->delimiter(',')->capture_default_str();
    c->add_option("--seeds", sweep.seeds, "Seeds")->delimiter(',')->capture_default_str();
    c->add_option("--methods", methods, "Methods: bnb oa-exhaustive oa-bnb oa-external external-milp external-micqp oracle")
        ->delimiter(',')->capture_default_str();
    c->add_option("--levels", levels, "Attractiveness levels Q_r")->delimiter(',')->capture_default_str();
    c->add_option("--tol", tol, "Relative optimality tolerance for bnb")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--node-cap", node_cap, "Node limit for bnb")->capture_default_str();
    c->add_option("--out", out, "Output CSV file ('-' for stdout)")->capture_default_str();
    c->add_flag("--no-time", no_time, "Write 0 in the time column");
    adapter.add(c);
    c->callback([this] { code = run(); });
  }

  int run() {
    sweep.methods.clear();
    for (const auto& m : methods) {
      try {
        sweep.methods.push_back(parse_method(m));
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
    }
    sweep.base.level_values = levels;
    RunOptions opt;
    opt.bnb.rel_tol = tol;
    opt.bnb.node_cap = node_cap;
    opt.time_limit_seconds = adapter.time_limit;
    opt.adapter = adapter.resolve();
    const auto records = run_sweep(sweep, opt);
    write_text(out, records_to_csv(records, !no_time));
    return kOk;
  }

  int code = kOk;
};

// ---------------------------------------------------------------- plotdata

struct PlotCmd {
  std::string in;
  std::string method = "bnb";
  std::size_t zones = 0;
  std::string profit_out;
  std::string open_out;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("plotdata", "Turn bench CSV into profit and open-count series over (K, f)");
    c->add_option("--in", in, "Bench CSV file")->required();
    c->add_option("--method", method, "Method whose records are used")->capture_default_str();
    c->add_option("--zones", zones, "Zone count to select (default: first in file)");
    c->add_option("--profit-out", profit_out, "Profit series CSV (default: stdout)");
    c->add_option("--open-out", open_out, "Open-count series CSV (default: stdout)");
    c->callback([this] { code = run(); });
  }

  int run() {
    Method m;
    try {
      m = parse_method(method);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    const auto records = records_from_csv(read_text(in));
    if (records.empty()) throw FormatError(in, "no records");
    const std::size_t nz = zones == 0 ? records.front().zones : zones;
    const PlotSeries s = make_plot_series(records, m, nz);
    const std::string profit_csv = series_to_csv(s, false);
    const std::string open_csv = series_to_csv(s, true);
    if (profit_out.empty() && open_out.empty()) {
      std::cout << "# profit (thousands)\n" << profit_csv << "\n# open facilities\n" << open_csv << "\n";
    } else {
      write_text(profit_out.empty() ? "-" : profit_out, profit_csv);
      write_text(open_out.empty() ? "-" : open_out, open_csv);
    }
    std::cout << trend_report(s);
    return kOk;
  }

  int code = kOk;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Competitive facility location with discrete attractiveness"};
  app.config_formatter(std::make_shared<JsonConfig>(&app));
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "JSON file with option values for the subcommand");
  app.fallthrough();
  app.require_subcommand(1);

  GenerateCmd gen;
  OracleCmd oracle;
  SolveCmd solve;
  ExportCmd exp;
  BenchCmd bench;
  PlotCmd plot;
  gen.add(app);
  oracle.add(app);
  solve.add(app);
  exp.add(app);
  bench.add(app);
  plot.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::FileError& e) {
    app.exit(e);
    return kIo;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const UnsupportedError& e) {
    std::fprintf(stderr, "unsupported: %s\n", e.what());
    return kUnsupported;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIo;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kIo;
  } catch (const SchemaVersionError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kIo;
  } catch (const InvalidInstance& e) {
    std::fprintf(stderr, "invalid instance: %s\n", e.what());
    return kIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kGeneric;
  }
  for (int c : {gen.code, oracle.code, solve.code, exp.code, bench.code, plot.code})
    if (c != kOk) return c;
  return kOk;
}
