#include "test_support.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <stdexcept>
#include <sys/wait.h>

namespace mcpflow::testing {

std::filesystem::path fixture(const std::string &relative) { return std::filesystem::path(MCPFLOW_FIXTURES_DIR) / relative; }

std::filesystem::path cli_path() { return MCPFLOW_CLI_PATH; }

LoadResult lower(std::vector<std::pair<std::string, std::string>> files) {
  std::vector<SourceText> sources;
  for (auto &[path, text] : files) sources.push_back({path, text});
  return lower_sources(std::move(sources));
}

ProcIndex proc_named(const Program &program, const std::string &name) {
  auto p = program.find_procedure_by_name(name);
  if (!p) throw std::runtime_error("no procedure named " + name);
  return *p;
}

std::vector<StmtIndex> statements_where(const Program &program, const std::string &proc,
                                        const std::function<bool(const Statement &)> &pred) {
  std::vector<StmtIndex> out;
  for (StmtIndex s = 0; s < program.statements.size(); ++s) {
    const Statement &st = program.stmt(s);
    if (!proc.empty() && program.proc(st.procedure).name != proc) continue;
    if (pred(st)) out.push_back(s);
  }
  return out;
}

StmtIndex call_to(const Program &program, const std::string &callee) {
  auto found = statements_where(program, "", [&](const Statement &st) {
    return st.kind == StmtKind::call && st.call && (st.call->callee == callee || st.call->qualified == callee);
  });
  if (found.empty()) throw std::runtime_error("no call to " + callee);
  return found.front();
}

ScanConfig test_config(const std::filesystem::path &root) {
  ScanConfig cfg;
  cfg.root = root;
  cfg.judge_mode = JudgeMode::heuristic;
  cfg.threads = 1;
  return cfg;
}

Report scan_fixture(const std::string &relative, const std::function<void(ScanConfig &)> &tweak) {
  ScanConfig cfg = test_config(fixture(relative));
  if (tweak) tweak(cfg);
  return scan(cfg);
}

std::size_t count_clusters(const Report &report, const std::string &direction, const std::string &tool) {
  return std::count_if(report.clusters.begin(), report.clusters.end(), [&](const ReportCluster &c) {
    return c.direction == direction && (tool.empty() || c.tool == tool);
  });
}

const ReportCluster *find_cluster(const Report &report, const std::string &direction, const std::string &tool) {
  for (const auto &c : report.clusters)
    if (c.direction == direction && (tool.empty() || c.tool == tool)) return &c;
  return nullptr;
}

std::vector<std::string> corpus_fixtures() {
  std::vector<std::string> out{"running_example"};
  std::filesystem::path root = fixture("corpus");
  for (const auto &group : std::filesystem::directory_iterator(root)) {
    if (!group.is_directory()) continue;
    for (const auto &dir : std::filesystem::directory_iterator(group.path()))
      if (dir.is_directory())
        out.push_back(std::filesystem::relative(dir.path(), fixture("")).generic_string());
  }
  std::sort(out.begin() + 1, out.end());
  return out;
}

namespace {

std::string shell_quote(const std::string &s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

} // namespace

CommandResult run_cli(const std::vector<std::string> &args) {
  std::string cmd = shell_quote(cli_path().string());
  for (const auto &a : args) cmd += " " + shell_quote(a);
  cmd += " 2>/dev/null";
  CommandResult r;
  FILE *pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

} // namespace mcpflow::testing
