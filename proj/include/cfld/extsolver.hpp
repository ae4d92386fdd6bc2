#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cfld/error.hpp"
#include "cfld/formulations.hpp"

namespace cfld {

/// Environment variable naming the adapter config file.
inline constexpr const char* kAdapterEnvVar = "CFLD_SOLVER_ADAPTER";

/// How to run an external solver. The command template is passed to
/// /bin/sh -c after substituting {model}, {solution} and {time_limit}; paths
/// are shell-quoted. Only PATH and the listed variables reach the child.
struct AdapterConfig {
  std::string command_template;
  std::string solution_format = "name-value";
  std::vector<std::string> env_passthrough;

  static AdapterConfig from_json(const std::string& text);
};

AdapterConfig load_adapter_config(const std::filesystem::path& path);

/// Config named by CFLD_SOLVER_ADAPTER, if set.
std::optional<AdapterConfig> adapter_from_environment();

class SolverError : public Error {
 public:
  using Error::Error;
};

/// fork or exec of the shell failed.
class SpawnError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Child exited nonzero or died from a signal.
class ChildFailure : public SolverError {
 public:
  ChildFailure(int exit_code, const std::string& what) : SolverError(what), exit_code_(exit_code) {}
  /// Exit status, or 128 + signal number.
  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

class SolverTimeout : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Child succeeded but left no solution file.
class MissingOutput : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Runs the adapter on `model_file` and returns the solution file text. The
/// child runs in its own process group inside a fresh temporary directory,
/// which is removed afterwards; its stdout and stderr are captured there and
/// quoted in error messages.
std::string invoke(const AdapterConfig& adapter, const std::filesystem::path& model_file, double time_limit_seconds);

/// Writes `model_text` to a private temporary file with the given extension
/// (".mps", ".cbf") and runs invoke() on it.
std::string invoke_on_text(const AdapterConfig& adapter, const std::string& model_text, const std::string& extension,
                           double time_limit_seconds);

struct ParsedSolution {
  Assignment assignment;
  std::vector<std::string> warnings;
};

/// Reads "name value" lines. Blank lines and lines starting with '#' are
/// skipped. Unknown names produce a warning; variables not mentioned take 0
/// if binary and their lower bound (0 when unbounded below) otherwise.
/// Throws FormatError("line N", ...) on a malformed line.
ParsedSolution parse_solution(const std::string& text, const FormulationModel& model);

/// One "name value" line per entry, in name order, shortest round-trip form.
std::string serialize_solution(const Assignment& assignment);

}  // namespace cfld
