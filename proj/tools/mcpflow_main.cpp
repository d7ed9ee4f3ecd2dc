// Command-line front end: `mcpflow scan <root> [options]`.
// Exit codes: 0 no clusters, 1 clusters found, 2 fatal error.

#include "mcpflow/scan.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

constexpr int kExitClean = 0;
constexpr int kExitFindings = 1;
constexpr int kExitFatal = 2;

int fatal(const std::string &code, const std::string &message) {
  std::cerr << "mcpflow: " << code << ": " << message << "\n";
  return kExitFatal;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Bidirectional taint scanner for MCP server source trees"};
  app.set_version_flag("--version", std::string(mcpflow::kToolName) + " " + mcpflow::kToolVersion);
  app.require_subcommand(0, 1);

  bool list_patterns = false;
  std::string catalog_path;
  app.add_flag("--list-patterns", list_patterns, "Print the dispatch/publication pattern catalog and exit");

  // A TOML/INI file supplies defaults; command-line flags override it.
  // Scan options live under a [scan] section.
  app.set_config("--config", "", "Configuration file (TOML subset)");
  CLI::App *scan_cmd = app.add_subcommand("scan", "Scan a source tree");
  scan_cmd->fallthrough();

  std::string root, format = "json", rules_path, judge_mode, judge_endpoint, debug_dump, output;
  std::string token_env = "MCPFLOW_JUDGE_TOKEN";
  double judge_timeout = 20.0, timeout = 30.0;
  bool no_llm = false, no_recovery = false, no_lifting = false;
  unsigned threads = 0;
  std::vector<std::string> languages, include, exclude;
  std::uintmax_t max_file_bytes = 0;

  scan_cmd->add_option("root", root, "Repository root to scan");
  scan_cmd->add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "sarif", "text"}));
  scan_cmd->add_option("--rules", rules_path, "Sink rule pack file");
  scan_cmd->add_option("--catalog", catalog_path, "Pattern catalog file");
  scan_cmd->add_flag("--no-llm", no_llm, "Use the deterministic heuristic judge");
  scan_cmd->add_option("--judge-mode", judge_mode, "Judge: off, heuristic or remote")
      ->check(CLI::IsMember({"off", "heuristic", "remote"}));
  scan_cmd->add_option("--judge-endpoint", judge_endpoint, "Remote judge URL (http://host:port/path)");
  scan_cmd->add_option("--judge-timeout", judge_timeout, "Remote judge timeout in seconds");
  scan_cmd->add_option("--judge-token-env", token_env, "Environment variable holding the judge bearer token");
  scan_cmd->add_option("--timeout-per-entrypoint", timeout, "Per-entrypoint analysis budget in seconds");
  scan_cmd->add_flag("--list-patterns", list_patterns, "Print the pattern catalog and exit");
  scan_cmd->add_option("--debug-dump", debug_dump, "Directory for lowered IR and per-entrypoint traces");
  scan_cmd->add_option("-o,--output", output, "Write the report to a file instead of stdout");
  scan_cmd->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");
  scan_cmd->add_option("--languages", languages, "Languages to load: python, js_ts")
      ->check(CLI::IsMember({"python", "js_ts"}));
  scan_cmd->add_option("--include", include, "Include globs (replace the defaults)");
  scan_cmd->add_option("--exclude", exclude, "Exclude globs (added to the defaults)");
  scan_cmd->add_option("--max-file-bytes", max_file_bytes, "Skip files larger than this");
  scan_cmd->add_flag("--no-entrypoint-recovery", no_recovery, "Ablation: treat no procedure as an entrypoint");
  scan_cmd->add_flag("--no-accessor-lifting", no_lifting, "Ablation: do not seed structured accessor reads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitClean : kExitFatal;
  }

  try {
    if (list_patterns) {
      auto catalog = catalog_path.empty() ? mcpflow::default_catalog() : mcpflow::load_catalog(catalog_path);
      std::cout << mcpflow::format_catalog(catalog);
      return kExitClean;
    }
    if (!scan_cmd->parsed() || root.empty()) {
      std::cerr << app.help();
      return kExitFatal;
    }

    mcpflow::ScanConfig cfg;
    cfg.root = root;
    if (!rules_path.empty()) cfg.rules_path = rules_path;
    if (!catalog_path.empty()) cfg.catalog_path = catalog_path;
    cfg.format = *mcpflow::output_format_from(format);
    if (!judge_mode.empty()) cfg.judge_mode = *mcpflow::judge_mode_from(judge_mode);
    else if (!judge_endpoint.empty()) cfg.judge_mode = mcpflow::JudgeMode::remote;
    if (no_llm) cfg.judge_mode = mcpflow::JudgeMode::heuristic;
    if (cfg.judge_mode == mcpflow::JudgeMode::remote && judge_endpoint.empty())
      return fatal("invalid_config", "remote judge selected without --judge-endpoint");
    cfg.judge_endpoint = judge_endpoint;
    cfg.judge_timeout_seconds = judge_timeout;
    cfg.judge_token_env = token_env;
    if (timeout <= 0) return fatal("invalid_config", "--timeout-per-entrypoint must be positive");
    cfg.timeout_per_entrypoint = timeout;
    if (!debug_dump.empty()) cfg.debug_dump = debug_dump;
    cfg.threads = threads;
    cfg.entrypoint_recovery = !no_recovery;
    cfg.lift_accessors = !no_lifting;
    if (!languages.empty()) {
      cfg.frontend.python = std::find(languages.begin(), languages.end(), "python") != languages.end();
      cfg.frontend.js_ts = std::find(languages.begin(), languages.end(), "js_ts") != languages.end();
    }
    if (!include.empty()) cfg.frontend.include = include;
    cfg.frontend.exclude.insert(cfg.frontend.exclude.end(), exclude.begin(), exclude.end());
    if (max_file_bytes) cfg.frontend.max_file_bytes = max_file_bytes;

    mcpflow::Report report = mcpflow::scan(cfg);
    std::string text = mcpflow::emit_report(report, cfg.format);
    if (output.empty()) {
      std::cout << text;
    } else {
      std::ofstream out(output, std::ios::binary);
      if (!(out << text)) return fatal("output_unwritable", "cannot write " + output);
    }
    return report.clusters.empty() ? kExitClean : kExitFindings;
  } catch (const mcpflow::Error &e) {
    return fatal(e.code(), e.what());
  } catch (const std::exception &e) {
    return fatal("internal", e.what());
  }
}
