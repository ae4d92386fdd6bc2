#include "cfld/extsolver.hpp"

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

namespace cfld {

namespace fs = std::filesystem;

AdapterConfig AdapterConfig::from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("adapter", std::string("malformed JSON (") + e.what() + ")");
  }
  AdapterConfig cfg;
  try {
    cfg.command_template = doc.at("command_template").get<std::string>();
    if (doc.contains("solution_format")) cfg.solution_format = doc["solution_format"].get<std::string>();
    if (doc.contains("env_passthrough")) cfg.env_passthrough = doc["env_passthrough"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("adapter", e.what());
  }
  if (cfg.command_template.empty()) throw FormatError("adapter.command_template", "must not be empty");
  if (cfg.solution_format != "name-value")
    throw FormatError("adapter.solution_format", "unsupported format '" + cfg.solution_format + "'");
  return cfg;
}

AdapterConfig load_adapter_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read adapter config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return AdapterConfig::from_json(ss.str());
}

std::optional<AdapterConfig> adapter_from_environment() {
  const char* p = std::getenv(kAdapterEnvVar);
  if (p == nullptr || *p == '\0') return std::nullopt;
  return load_adapter_config(p);
}

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char ch : s) {
    if (ch == '\'')
      out += "'\\''";
    else
      out += ch;
  }
  return out + "'";
}

std::string substitute(std::string cmd, const std::string& key, const std::string& value) {
  for (auto pos = cmd.find(key); pos != std::string::npos; pos = cmd.find(key, pos + value.size()))
    cmd.replace(pos, key.size(), value);
  return cmd;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string log_tail(const fs::path& p) {
  auto text = read_file(p);
  constexpr std::size_t kMax = 400;
  if (text.size() > kMax) text = "..." + text.substr(text.size() - kMax);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text.empty() ? "" : " (output: " + text + ")";
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "cfld-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw SpawnError(std::string("mkdtemp failed: ") + std::strerror(errno));
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const noexcept { return path_; }

 private:
  fs::path path_;
};

}  // namespace

std::string invoke(const AdapterConfig& adapter, const fs::path& model_file, double time_limit_seconds) {
  TempDir dir;
  const fs::path solution = dir.path() / "solution.txt";
  const fs::path log = dir.path() / "solver.log";

  std::array<char, 32> tl{};
  auto res = std::to_chars(tl.data(), tl.data() + tl.size(), time_limit_seconds);
  std::string cmd = adapter.command_template;
  cmd = substitute(cmd, "{model}", shell_quote(fs::absolute(model_file).string()));
  cmd = substitute(cmd, "{solution}", shell_quote(solution.string()));
  cmd = substitute(cmd, "{time_limit}", std::string(tl.data(), res.ptr));

  std::vector<std::string> env_strings;
  auto pass = [&](const std::string& name) {
    if (const char* v = std::getenv(name.c_str())) env_strings.push_back(name + "=" + v);
  };
  pass("PATH");
  for (const auto& name : adapter.env_passthrough)
    if (name != "PATH") pass(name);
  std::vector<char*> envp;
  for (auto& s : env_strings) envp.push_back(s.data());
  envp.push_back(nullptr);
  std::string sh = "/bin/sh", dash_c = "-c";
  std::array<char*, 4> argv{sh.data(), dash_c.data(), cmd.data(), nullptr};
  const std::string log_s = log.string();

  const pid_t pid = ::fork();
  if (pid < 0) throw SpawnError(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::setpgid(0, 0);
    const int fd = ::open(log_s.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    if (fd >= 0) {
      ::dup2(fd, STDOUT_FILENO);
      ::dup2(fd, STDERR_FILENO);
      ::close(fd);
    }
    const int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    ::execve(argv[0], argv.data(), envp.data());
    ::_exit(127);
  }
  ::setpgid(pid, pid);

  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(time_limit_seconds);
  int status = 0;
  for (;;) {
    const pid_t w = ::waitpid(pid, &status, WNOHANG);
    if (w == pid) break;
    if (w < 0 && errno != EINTR) throw SpawnError(std::string("waitpid failed: ") + std::strerror(errno));
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      throw SolverTimeout("solver exceeded the time limit of " + std::string(tl.data(), res.ptr) + " s");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  // Reap anything the shell left behind in the group.
  ::kill(-pid, SIGKILL);

  if (WIFSIGNALED(status)) {
    const int sig = WTERMSIG(status);
    throw ChildFailure(128 + sig, "solver killed by signal " + std::to_string(sig) + log_tail(log));
  }
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : 1;
  if (code == 127) throw SpawnError("solver command not found" + log_tail(log));
  if (code != 0) throw ChildFailure(code, "solver exited with status " + std::to_string(code) + log_tail(log));
  if (!fs::exists(solution)) throw MissingOutput("solver produced no solution file" + log_tail(log));
  return read_file(solution);
}

std::string invoke_on_text(const AdapterConfig& adapter, const std::string& model_text, const std::string& extension,
                           double time_limit_seconds) {
  TempDir dir;
  const fs::path model = dir.path() / ("model" + extension);
  {
    std::ofstream out(model, std::ios::binary);
    out << model_text;
    if (!out) throw IoError("cannot write " + model.string());
  }
  return invoke(adapter, model, time_limit_seconds);
}

ParsedSolution parse_solution(const std::string& text, const FormulationModel& model) {
  ParsedSolution out;
  Assignment given;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string name, value, extra;
    if (!(ls >> name) || name[0] == '#') continue;
    const std::string where = "line " + std::to_string(lineno);
    if (!(ls >> value)) throw FormatError(where, "expected 'name value', got '" + line + "'");
    if (ls >> extra) throw FormatError(where, "trailing text after value in '" + line + "'");
    double v = 0.0;
    const char* first = value.data();
    const char* last = first + value.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v))
      throw FormatError(where, "cannot parse value '" + value + "'");
    if (!model.find(name)) {
      out.warnings.push_back(where + ": unknown variable '" + name + "' ignored");
      continue;
    }
    given[name] = v;
  }
  for (const auto& var : model.variables) {
    auto it = given.find(var.name);
    if (it != given.end()) {
      out.assignment[var.name] = it->second;
    } else if (var.kind == VarKind::Binary) {
      out.assignment[var.name] = 0.0;
    } else {
      out.assignment[var.name] = std::isinf(var.lower) ? 0.0 : var.lower;
    }
  }
  return out;
}

std::string serialize_solution(const Assignment& assignment) {
  std::string out;
  std::array<char, 64> buf{};
  for (const auto& [name, value] : assignment) {
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    out += name;
    out += ' ';
    out.append(buf.data(), res.ptr);
    out += '\n';
  }
  return out;
}

}  // namespace cfld
