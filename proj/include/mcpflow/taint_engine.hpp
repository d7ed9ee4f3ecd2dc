#pragma once

// Bidirectional interprocedural taint propagation over one entrypoint:
// forward/backward reach regions, candidate paths, guard evidence,
// refinement and clustering.

#include "mcpflow/adjudicator.hpp"
#include "mcpflow/entrypoints.hpp"
#include "mcpflow/model.hpp"
#include "mcpflow/taint_spec.hpp"

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mcpflow {

/// Label bits: request taint and external-content taint.
inline constexpr std::uint8_t kReqBit = 1;
inline constexpr std::uint8_t kExtBit = 2;

std::uint8_t label_bit(TaintLabel l);

/// Rule ids attached to flow steps.
namespace rule {
inline constexpr const char *assign = "R1";    ///< x := y, operators, templates
inline constexpr const char *field = "R2";     ///< o.f := v, x := o.f
inline constexpr const char *argument = "R3";  ///< actual argument to formal parameter
inline constexpr const char *ret = "R4";       ///< return value to the call's result
inline constexpr const char *assemble = "R5";  ///< component to assembled object
inline constexpr const char *sink = "R6";      ///< tainted operand at a sink
inline constexpr const char *pass = "pass";    ///< unresolved call: operands to result
inline constexpr const char *mutate = "mut";   ///< unresolved mutator: argument to receiver
inline constexpr const char *seed = "seed";    ///< first path step
} // namespace rule

using FactKey = std::pair<ProcIndex, Location>;

/// Procedures and statements one entrypoint's analysis may touch.
struct AnalysisScope {
  ProcIndex anchor = 0;
  std::set<ProcIndex> procedures;
  /// Statements of other tools' scopes in a shared dispatcher.
  std::set<StmtIndex> excluded;

  bool active(const Program &program, StmtIndex s) const;
};

/// Anchor (scope procedure or handler) plus everything reachable from it
/// through call edges and function values read by active statements.
AnalysisScope make_analysis_scope(const Program &program, const Entrypoint &entrypoint);
AnalysisScope make_analysis_scope(const Program &program, ProcIndex anchor,
                                  const std::set<StmtIndex> &excluded = {});

/// One rule instance of a statement: if any read overlaps a tainted fact,
/// the written location receives the read facts' labels.
struct FlowInstance {
  StmtIndex stmt = 0;
  std::string rule;
  std::vector<FactKey> reads;
  FactKey write;
};

/// Rule instances of an active statement (captured reads expanded).
std::vector<FlowInstance> flow_instances(const Program &program, const AnalysisScope &scope, StmtIndex s);

/// Label map with per-fact witness (statement, rule) of the first derivation.
struct TaintState {
  std::map<FactKey, std::uint8_t> labels;
  std::map<FactKey, std::pair<StmtIndex, std::string>> witness;

  std::uint8_t read(const FactKey &key) const;
};

/// Applies every rule instance of one statement once.
TaintState transfer(const Program &program, const AnalysisScope &scope, TaintState state, StmtIndex s);

struct FlowEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  StmtIndex stmt = 0;
  std::string rule;

  auto operator<=>(const FlowEdge &) const = default;
};

enum class RegionDirection { forward, backward };

struct ReachRegion {
  RegionDirection direction = RegionDirection::forward;
  std::vector<FactKey> facts;
  /// Forward: label bits per fact. Backward: all ones.
  std::vector<std::uint8_t> labels;
  /// Forward only: rule-instance edges between facts.
  std::vector<FlowEdge> edges;
  /// Forward only: index of the first edge that derived each fact.
  std::vector<std::optional<std::size_t>> witness;
  bool incomplete = false;
  std::string incomplete_reason;
  std::size_t updates = 0;
  std::size_t passthrough = 0;

  std::optional<std::size_t> find(const FactKey &key) const;
  /// Facts in `proc` whose location overlaps `loc`.
  std::vector<std::size_t> related(ProcIndex proc, const Location &loc) const;
  std::uint8_t labels_at(ProcIndex proc, const Location &loc) const;
  /// Fact set as sorted (proc, location, labels) triples.
  std::set<std::tuple<ProcIndex, Location, std::uint8_t>> snapshot() const;

  std::map<FactKey, std::size_t> index;
};

struct EngineLimits {
  std::size_t max_fact_updates = 10000;
  std::size_t max_paths_per_pair = 16;
  std::size_t path_expansion_budget = 200000;
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

struct SeedFact {
  FactKey key;
  std::uint8_t labels = 0;
};

ReachRegion reach_forward(const Program &program, const AnalysisScope &scope, const std::vector<SeedFact> &seeds,
                          const EngineLimits &limits = {});
ReachRegion reach_backward(const Program &program, const AnalysisScope &scope,
                           const std::vector<FactKey> &targets, const EngineLimits &limits = {});

std::vector<SeedFact> seed_facts(const std::vector<TaintSeed> &seeds);

enum class PathDirection { request_side, return_side };

std::string to_string(PathDirection d);

struct PathStep {
  std::optional<StmtIndex> stmt;
  std::string rule;
  ProcIndex procedure = 0;
  Location value;
  SourceLocation location;
};

enum class GuardKind { schema_check, confinement_check, quoting_or_normalization, allowlist, parameterized_api, other };
enum class GuardDisposition { suppressing, recorded_only, adjudicated };

std::string to_string(GuardKind k);
std::string to_string(GuardDisposition d);

struct GuardEvidence {
  StmtIndex stmt = 0;
  GuardKind kind = GuardKind::other;
  GuardDisposition disposition = GuardDisposition::recorded_only;
  /// Whether this guard needs adjudication (before refinement) / the note.
  bool ambiguous = false;
  std::string note;
  std::optional<Decision> verdict;
};

/// A sink as seen by path construction.
struct SinkTarget {
  StmtIndex stmt = 0;
  ProcIndex procedure = 0;
  std::string rule_id; ///< pack rule id, or "return"
  std::vector<Location> operands;
  /// Bound-parameter operands (parameterized APIs).
  std::vector<Location> bound;
  std::optional<SinkSite> op;
  std::optional<ReturnSink> ret;
};

std::vector<SinkTarget> sink_targets(const Program &program, const AnalysisScope &scope,
                                     const std::vector<SinkSite> &sinks);
std::vector<SinkTarget> sink_targets(const Program &program, const std::vector<ReturnSink> &sinks);

struct CandidatePath {
  PathDirection direction = PathDirection::request_side;
  std::string entrypoint_id;
  std::string tool;
  ProcIndex handler = 0;
  std::vector<PathStep> steps;
  TaintSeed seed;
  SinkTarget sink;
  /// True when the path ends at a bound-parameter operand.
  bool via_bound_operand = false;
  std::vector<GuardEvidence> guards;

  std::string root_cause() const;
};

struct PathContext {
  const Entrypoint *entrypoint = nullptr;
  const AnalysisScope *scope = nullptr;
  const ReachRegion *forward = nullptr;
};

struct PathBuildResult {
  std::vector<CandidatePath> paths;
  bool truncated = false;
};

/// Paths from seeds to sinks through facts present in both regions.
/// Return-side paths through another of `sinks`' return statements are
/// dropped, so each returned value is reported at its innermost return.
PathBuildResult intersect_and_build_paths(const Program &program, const PathContext &ctx,
                                          const ReachRegion &backward, PathDirection direction,
                                          const std::vector<TaintSeed> &seeds,
                                          const std::vector<SinkTarget> &sinks, const EngineLimits &limits = {});

/// Step-by-step check that a path is justified by rule instances of the
/// program. Returns violations (empty when valid).
std::vector<std::string> validate_path(const Program &program, const AnalysisScope &scope,
                                       const CandidatePath &path);

std::vector<GuardEvidence> collect_guard_evidence(const Program &program, const PathContext &ctx,
                                                  const CandidatePath &path);

struct SuppressedPath {
  CandidatePath path;
  std::string reason;
};

struct RefineResult {
  std::vector<CandidatePath> kept;
  std::vector<SuppressedPath> suppressed;
};

/// `judge` null: ambiguous guards stay recorded_only and never suppress.
RefineResult refine_paths(const Program &program, std::vector<CandidatePath> paths, Judge *judge);

enum class ClusterConfidence { certain, adjudicated, assumed };

std::string to_string(ClusterConfidence c);

struct FindingCluster {
  PathDirection direction = PathDirection::request_side;
  std::string tool;
  std::string entrypoint_id;
  std::string handler_id;
  std::string sink_stmt_id;
  std::string root_cause;
  CandidatePath representative;
  std::size_t members = 0;
  ClusterConfidence confidence = ClusterConfidence::certain;

  std::string key() const;
};

ClusterConfidence path_confidence(const CandidatePath &path);

/// Groups paths by (direction, tool, handler, sink, root cause). The
/// representative is the shortest path, ties broken by location order.
std::vector<FindingCluster> dedupe_findings(const Program &program, const std::vector<CandidatePath> &paths);

/// Ordering of paths by length, then step locations.
bool path_precedes(const CandidatePath &a, const CandidatePath &b);

} // namespace mcpflow
