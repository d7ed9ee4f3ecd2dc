#pragma once

// Shared helpers for unit and acceptance tests: fixture paths, in-memory
// lowering, statement lookup and scan shortcuts.

#include "mcpflow/scan.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace mcpflow::testing {

std::filesystem::path fixture(const std::string &relative);
std::filesystem::path cli_path();

/// Lowers in-memory files (path, text) through the full frontend pipeline.
LoadResult lower(std::vector<std::pair<std::string, std::string>> files);

ProcIndex proc_named(const Program &program, const std::string &name);

/// Statements of `proc` (or every procedure when name is empty) satisfying `pred`.
std::vector<StmtIndex> statements_where(const Program &program, const std::string &proc,
                                        const std::function<bool(const Statement &)> &pred);

/// First call statement whose callee text or qualified name equals `callee`.
StmtIndex call_to(const Program &program, const std::string &callee);

/// Scan options used across tests: deterministic judge, single thread.
ScanConfig test_config(const std::filesystem::path &root);
Report scan_fixture(const std::string &relative, const std::function<void(ScanConfig &)> &tweak = {});

std::size_t count_clusters(const Report &report, const std::string &direction, const std::string &tool = "");
const ReportCluster *find_cluster(const Report &report, const std::string &direction, const std::string &tool = "");

/// Every fixture directory of the corpus (relative to the fixture root).
std::vector<std::string> corpus_fixtures();

struct CommandResult {
  int exit_code = -1;
  std::string out;
};
/// Runs the CLI with arguments (shell-quoted here), capturing stdout.
CommandResult run_cli(const std::vector<std::string> &args);

} // namespace mcpflow::testing
