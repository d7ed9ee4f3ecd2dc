#pragma once

// End-to-end scan orchestration and report emission.

#include "mcpflow/adjudicator.hpp"
#include "mcpflow/entrypoints.hpp"
#include "mcpflow/frontend.hpp"
#include "mcpflow/taint_engine.hpp"
#include "mcpflow/taint_spec.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mcpflow {

inline constexpr const char *kToolName = "mcpflow";
inline constexpr const char *kToolVersion = "0.1.0";

enum class JudgeMode { off, heuristic, remote };
enum class OutputFormat { json, sarif, text };

std::string to_string(JudgeMode m);
std::string to_string(OutputFormat f);
std::optional<JudgeMode> judge_mode_from(const std::string &s);
std::optional<OutputFormat> output_format_from(const std::string &s);

struct ScanConfig {
  std::filesystem::path root;
  FrontendConfig frontend;
  std::optional<std::filesystem::path> rules_path;
  std::optional<std::filesystem::path> catalog_path;
  JudgeMode judge_mode = JudgeMode::heuristic;
  std::string judge_endpoint;
  double judge_timeout_seconds = 20.0;
  std::string judge_token_env = "MCPFLOW_JUDGE_TOKEN";
  /// Replaces the judge built from judge_mode (tests use scripted judges).
  std::shared_ptr<Judge> judge_override;
  OutputFormat format = OutputFormat::json;
  double timeout_per_entrypoint = 30.0;
  std::optional<std::filesystem::path> debug_dump;
  /// Worker threads for per-entrypoint analysis; 0 picks the hardware count.
  unsigned threads = 0;

  // Ablation switches.
  bool entrypoint_recovery = true;
  bool lift_accessors = true;

  EngineLimits limits;
};

struct ReportLocation {
  std::string path;
  int start_line = 0;
  int start_col = 0;
  int end_line = 0;
  int end_col = 0;
  std::string excerpt;
};

struct ReportStep {
  std::string stmt_id; ///< empty for parameter seeds
  std::string rule;
  std::string value;
  std::string procedure;
  ReportLocation location;
};

struct ReportGuard {
  std::string stmt_id;
  std::string kind;
  std::string disposition;
  std::string note;
  ReportLocation location;
};

struct ReportCluster {
  std::string id;
  std::string direction;
  std::string tool;
  std::string entrypoint_id;
  std::string handler;
  std::string handler_id;
  std::string root_cause;
  std::string confidence;
  std::size_t members = 0;
  // source
  std::string source_value;
  std::string source_label;
  std::string source_rationale;
  std::string source_confidence;
  std::string source_note;
  ReportLocation source_location;
  // sink
  std::string sink_stmt_id;
  std::string sink_rule;
  std::string sink_category; ///< "protocol_return" for return sinks
  std::string sink_callee;
  ReportLocation sink_location;
  std::vector<ReportStep> steps;
  std::vector<ReportGuard> guards;
};

struct ReportSuppressed {
  std::string direction;
  std::string tool;
  std::string sink_stmt_id;
  std::string sink_rule;
  ReportLocation sink_location;
  std::string reason;
};

struct ReportEntrypoint {
  std::string id;
  std::string tool;
  std::string handler;
  std::string handler_id;
  std::string scope; ///< branch statement id, or "top"
  std::string provenance;
  std::string family;
  std::string variant;
  bool assumed = false;
  std::size_t request_seeds = 0;
  std::size_t external_seeds = 0;
  std::size_t operation_sinks = 0;
  std::size_t return_sinks = 0;
  std::size_t forward_facts = 0;
  std::size_t passthrough_calls = 0;
  ReportLocation location;
};

struct ReportGap {
  std::string kind; ///< unresolved_handler, incomplete_region, partially_lowered, skipped_unit, ...
  std::string tool;
  std::string reason;
  ReportLocation location;
};

struct ReportMetadata {
  std::string tool_version;
  std::string rule_pack_version;
  std::size_t rule_count = 0;
  std::string catalog_version;
  std::string judge_mode;
  std::vector<std::string> degradations;
  std::size_t units_lowered = 0;
  std::size_t units_partial = 0;
  std::size_t units_skipped = 0;
  std::map<std::string, int> unsupported;
  std::vector<std::string> warnings;
  bool entrypoint_recovery = true;
  bool accessor_lifting = true;
};

struct Report {
  ReportMetadata metadata;
  std::vector<ReportEntrypoint> entrypoints;
  std::vector<ReportCluster> clusters;
  std::vector<ReportSuppressed> suppressed;
  std::vector<ReportGap> gaps;
};

/// Runs the whole pipeline. Throws Error only for fatal conditions
/// (unreadable root, malformed rule pack or catalog).
Report scan(const ScanConfig &config);

/// Same pipeline over an already loaded project (tests).
Report scan_program(const ScanConfig &config, const LoadResult &loaded);

std::string emit_report(const Report &report, OutputFormat format);

} // namespace mcpflow
