#pragma once

// Python and JS/TS frontends: discover source files, parse them and lower
// them into a Program.

#include "mcpflow/model.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mcpflow {

struct FrontendConfig {
  bool python = true;
  bool js_ts = true;
  /// fnmatch-style patterns over repository-relative paths (`*` crosses `/`).
  std::vector<std::string> include = {"*.py",  "*.js",  "*.mjs", "*.cjs", "*.jsx",
                                      "*.ts",  "*.mts", "*.cts", "*.tsx"};
  std::vector<std::string> exclude = {"node_modules/*", "*/node_modules/*", ".git/*",
                                      "*/.git/*",       "dist/*",           "build/*",
                                      "*/__pycache__/*", ".venv/*",         "venv/*",
                                      "*.d.ts",          "*.min.js"};
  std::uintmax_t max_file_bytes = 2u << 20;
};

enum class UnitStatus { lowered, partially_lowered, skipped };

std::string to_string(UnitStatus status);

struct UnitReport {
  std::string path;
  UnitStatus status = UnitStatus::lowered;
  /// Constructs outside the supported subset, by name.
  std::map<std::string, int> unsupported;
  std::vector<std::string> issues;
};

struct LoweringReport {
  std::vector<UnitReport> units;
  std::vector<std::string> warnings;

  std::size_t count(UnitStatus status) const;
  std::map<std::string, int> unsupported_totals() const;
};

struct SourceText {
  std::string path; ///< repository-relative, `/`-separated
  std::string text;
};

struct LoadResult {
  Program program;
  LoweringReport report;
};

/// Language for a path by extension, if it is a supported source file.
std::optional<Language> language_for(const std::string &path);

bool glob_match(const std::string &pattern, const std::string &path);

/// Discovers, parses and lowers every matching file under `root`, then
/// resolves imports and builds CFGs and the call graph. Throws Error with
/// code "root_unreadable" when the root is missing.
LoadResult load_project(const std::filesystem::path &root, const FrontendConfig &config);

/// Same pipeline over in-memory sources (used by load_project and tests).
LoadResult lower_sources(std::vector<SourceText> files);

/// Fills CallSite::qualified and Decorator::qualified through local alias
/// chains and import bindings, and links import bindings to project units.
void resolve_imports(Program &program);

} // namespace mcpflow
