#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cfld/bnb.hpp"
#include "cfld/extsolver.hpp"
#include "cfld/instancegen.hpp"
#include "cfld/oa.hpp"

namespace cfld {

enum class Method { Bnb, OaExhaustive, OaBnb, OaExternal, ExternalMilp, ExternalMicqp, Oracle };

std::string to_string(Method m);
/// Throws std::invalid_argument on an unknown name.
Method parse_method(const std::string& name);
const std::vector<Method>& all_methods();

/// Outcome of a single run.
enum class RunStatus { Ok, NotProven, Unavailable, Error };
std::string to_string(RunStatus s);

struct BenchRecord {
  std::size_t zones = 0;
  std::size_t candidates = 0;
  std::size_t levels = 0;
  std::size_t competitors = 0;
  double fixed_cost = 0.0;
  std::uint64_t seed = 0;
  Method method = Method::Bnb;
  RunStatus status = RunStatus::Ok;
  bool proven = false;
  /// Monotonic wall clock, rounded to 0.1 s.
  double cpu_seconds = 0.0;
  /// Profit in thousands of currency units.
  double profit_k = 0.0;
  std::size_t open_count = 0;
  /// OA iterations; 0 for other methods.
  std::size_t iterations = 0;
  std::string note;
};

struct RunOptions {
  BnBOptions bnb;
  MasterBnBOptions master;
  OAOptions oa;
  std::uint64_t oracle_cap = kDefaultEnumerationCap;
  std::optional<AdapterConfig> adapter;
  double time_limit_seconds = 600.0;
};

/// Everything a solve produces, before it is flattened into a record.
struct RunOutcome {
  RunStatus status = RunStatus::Ok;
  bool proven = false;
  Solution solution;
  double profit = 0.0;
  double seconds = 0.0;
  std::size_t iterations = 0;
  std::uint64_t nodes = 0;
  /// Relative gap between incumbent and proven bound (min form).
  double gap = 0.0;
  /// OA only.
  std::vector<double> master_objectives;
  std::string termination;
  std::string note;
};

/// Solves one instance with one method. Failures are reported in the
/// outcome, never thrown.
RunOutcome run_method(const Instance& instance, Method method, const RunOptions& options);

struct SweepConfig {
  std::vector<std::size_t> zones{20};
  /// Candidates per instance; 0 means equal to the zone count.
  std::size_t candidates = 0;
  std::vector<std::size_t> competitors{1, 5, 10};
  std::vector<double> fixed_costs{0.0, 2500.0, 5000.0};
  std::vector<std::uint64_t> seeds{1};
  std::vector<Method> methods{Method::Bnb, Method::OaBnb};
  GenConfig base;
};

/// One record per (instance, method), sorted by (I, f, K, method, seed).
std::vector<BenchRecord> run_sweep(const SweepConfig& sweep, const RunOptions& options);

void sort_records(std::vector<BenchRecord>& records);

inline constexpr const char* kBenchHeader =
    "I,J,R,K,f,seed,method,status,proven,cpu_seconds,profit_k,F,iterations,note";

/// Fixed column order, 6 significant digits. With `include_time` false the
/// time column is written as 0 so output depends only on the solutions.
std::string records_to_csv(const std::vector<BenchRecord>& records, bool include_time = true);
/// Throws FormatError("line N", ...) on malformed input.
std::vector<BenchRecord> records_from_csv(const std::string& text);

struct PlotSeries {
  std::vector<std::size_t> k_values;
  std::vector<double> f_values;
  /// [k][f]; nullopt marks a missing cell.
  std::vector<std::vector<std::optional<double>>> profit;
  std::vector<std::vector<std::optional<double>>> open_count;
};

/// Averages proven records of `method` over seeds at zone count `zones`.
PlotSeries make_plot_series(const std::vector<BenchRecord>& records, Method method, std::size_t zones);

/// Grid CSV with rows K and one column per f; gaps are written as NA.
std::string series_to_csv(const PlotSeries& s, bool open_counts);

/// Human-readable trend summary: profit monotonicity in K and f, and the
/// shape of the open-count curve per f.
std::string trend_report(const PlotSeries& s);

}  // namespace cfld
