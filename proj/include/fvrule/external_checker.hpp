#pragma once

// Adapter for third-party equivalence tools. The tool is run twice, once per
// mode ("strict", "relaxed"), through a shell command template with
// {golden_file}, {generated_file} and {mode} placeholders. Each run's stdout
// is matched line by line against pass/fail patterns.

#include <array>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "fvrule/equivalence.hpp"
#include "fvrule/errors.hpp"
#include "fvrule/text.hpp"

namespace fvrule::sva {

struct CheckerAdapterConfig {
  std::string command;  // e.g. "mychecker --mode {mode} {golden_file} {generated_file}"
  std::string strict_pass = R"(\bEQUIVALENT\b)";
  std::string strict_fail = R"(\b(RELAXED_ONLY|NOT_EQUIVALENT|FAIL)\b)";
  std::string relaxed_pass = R"(\b(EQUIVALENT|RELAXED_ONLY)\b)";
  std::string relaxed_fail = R"(\b(NOT_EQUIVALENT|FAIL)\b)";
  std::string work_dir;  // temp files; defaults to the system temp dir

  static CheckerAdapterConfig from_json(const nlohmann::json& j) {
    CheckerAdapterConfig c;
    if (!j.contains("command") || !j["command"].is_string())
      throw Error(ErrorCode::Config, "external checker config needs a 'command' string");
    c.command = j["command"];
    c.strict_pass = j.value("strict_pass", c.strict_pass);
    c.strict_fail = j.value("strict_fail", c.strict_fail);
    c.relaxed_pass = j.value("relaxed_pass", c.relaxed_pass);
    c.relaxed_fail = j.value("relaxed_fail", c.relaxed_fail);
    c.work_dir = j.value("work_dir", c.work_dir);
    return c;
  }

  nlohmann::json to_json() const {
    return {{"command", command},         {"strict_pass", strict_pass},
            {"strict_fail", strict_fail}, {"relaxed_pass", relaxed_pass},
            {"relaxed_fail", relaxed_fail}, {"work_dir", work_dir}};
  }
};

namespace detail {

inline std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
    s.replace(pos, from.size(), to);
  return s;
}

inline bool on_path(const std::string& program) {
  if (program.find('/') != std::string::npos) return std::filesystem::exists(program);
  const char* path = std::getenv("PATH");
  if (!path) return false;
  for (const auto& dir : text::split(path, ':')) {
    if (dir.empty()) continue;
    std::error_code ec;
    if (std::filesystem::exists(std::filesystem::path(dir) / program, ec)) return true;
  }
  return false;
}

struct CommandResult {
  int exit_code = 0;
  std::string output;
};

inline CommandResult run_command(const std::string& cmd) {
  CommandResult r;
  FILE* pipe = ::popen((cmd + " 2>&1").c_str(), "r");
  if (!pipe) throw Error(ErrorCode::ToolNotFound, "cannot start: " + cmd);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace detail

class ExternalChecker : public EquivalenceOracle {
 public:
  explicit ExternalChecker(CheckerAdapterConfig cfg) : cfg_(std::move(cfg)) {}

  // Verdicts carry no counterexample; the tools do not report witnesses in
  // a portable form.
  EquivalenceVerdict compare(std::string_view golden, std::string_view generated) const override {
    const auto program = first_word(cfg_.command);
    if (program.empty() || !detail::on_path(program))
      throw Error(ErrorCode::ToolNotFound, "checker '" + program + "' not found");

    namespace fs = std::filesystem;
    const fs::path dir = cfg_.work_dir.empty() ? fs::temp_directory_path() : fs::path(cfg_.work_dir);
    static std::atomic<std::uint64_t> counter{0};
    const std::string tag = std::to_string(::getpid()) + "_" + std::to_string(counter++);
    const fs::path gold_file = dir / ("fvrule_golden_" + tag + ".sv");
    const fs::path gen_file = dir / ("fvrule_generated_" + tag + ".sv");
    text::write_file(gold_file.string(), std::string(golden) + "\n");
    text::write_file(gen_file.string(), std::string(generated) + "\n");

    auto run_mode = [&](const char* mode, const std::string& pass, const std::string& fail) {
      std::string cmd = cfg_.command;
      cmd = detail::replace_all(cmd, "{golden_file}", detail::shell_quote(gold_file.string()));
      cmd = detail::replace_all(cmd, "{generated_file}", detail::shell_quote(gen_file.string()));
      cmd = detail::replace_all(cmd, "{mode}", mode);
      const auto res = detail::run_command(cmd);
      if (res.exit_code == 127) throw Error(ErrorCode::ToolNotFound, "checker exited 127: " + cmd);
      return classify(res.output, pass, fail, mode);
    };

    bool strict = false;
    bool relaxed = false;
    try {
      strict = run_mode("strict", cfg_.strict_pass, cfg_.strict_fail);
      relaxed = strict || run_mode("relaxed", cfg_.relaxed_pass, cfg_.relaxed_fail);
    } catch (...) {
      std::error_code ec;
      fs::remove(gold_file, ec);
      fs::remove(gen_file, ec);
      throw;
    }
    std::error_code ec;
    fs::remove(gold_file, ec);
    fs::remove(gen_file, ec);

    EquivalenceVerdict v;
    v.verdict = strict ? Verdict::Equivalent
                       : (relaxed ? Verdict::GoldenImpliesGenerated : Verdict::Incomparable);
    return v;
  }

  std::string name() const override { return "external"; }

 private:
  static std::string first_word(const std::string& cmd) {
    const auto t = text::trim(cmd);
    const auto end = t.find_first_of(" \t");
    return std::string(t.substr(0, end));
  }

  // Fail wins over pass on the same line; the first matching line decides.
  static bool classify(const std::string& output, const std::string& pass, const std::string& fail,
                       const char* mode) {
    const std::regex pass_re(pass);
    const std::regex fail_re(fail);
    for (const auto& line : text::split_lines(output)) {
      if (std::regex_search(line, fail_re)) return false;
      if (std::regex_search(line, pass_re)) return true;
    }
    throw Error(ErrorCode::ToolParse,
                std::string("no pass/fail marker in ") + mode + " checker output");
  }

  CheckerAdapterConfig cfg_;
};

}  // namespace fvrule::sva
