#pragma once

// Language-neutral program model consumed by every analysis stage.
//
// A Program is built once by the frontends and is immutable afterwards.
// Statements live in one program-wide table; procedures refer to them by
// index. Stable string ids (content hashes of path, span and kind) are
// used for anything that leaves the process.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcpflow {

/// Fields deeper than this collapse onto their depth-k prefix.
inline constexpr std::size_t kFieldDepthLimit = 3;
/// Synthetic field used for container elements and non-literal keys.
inline constexpr const char *kElementField = "[*]";
/// Location that receives a procedure's returned values.
inline constexpr const char *kReturnSlot = "$ret";

enum class Language { python, js_ts };

std::string to_string(Language lang);

/// Error raised for fatal, structured failures (bad input, malformed files).
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string &message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string &code() const noexcept { return code_; }

private:
  std::string code_;
};

struct SourceLocation {
  std::string path;
  int start_line = 0;
  int start_col = 0;
  int end_line = 0;
  int end_col = 0;
  std::size_t begin = 0; ///< byte offset into the unit text
  std::size_t end = 0;   ///< one past the last byte

  bool operator==(const SourceLocation &) const = default;
};

std::string to_string(const SourceLocation &loc);

using ProcIndex = std::size_t;
using StmtIndex = std::size_t;
using UnitIndex = std::size_t;

enum class ValueKind { param, local, field_path, literal, call_result };

std::string to_string(ValueKind kind);

/// A symbolic value: a variable (param/local/temp) with an optional field
/// path, or a literal. Identity is (base, fields); `kind` is descriptive.
struct ValueRef {
  ValueKind kind = ValueKind::local;
  std::string base;
  std::vector<std::string> fields;
  /// For literals: the literal's value (string contents, number text, ...).
  std::string literal;
  /// For function literals and references that the frontend resolved
  /// statically: the procedure they denote.
  std::optional<ProcIndex> function;

  std::size_t field_depth() const { return fields.size(); }
  bool is_literal() const { return kind == ValueKind::literal; }
  bool is_string_literal() const;
  /// Location key "base.f1.f2"; literals render as their value.
  std::string str() const;

  static ValueRef local(std::string name);
  static ValueRef param(std::string name);
  static ValueRef temp(std::string name, bool call_result);
  static ValueRef string_literal(std::string value);
  static ValueRef other_literal(std::string text);
  static ValueRef function_literal(ProcIndex proc);

  /// Returns this value extended by one field, collapsing past the k-limit.
  ValueRef with_field(const std::string &field) const;
  /// Same location (base + fields), ignoring descriptive kind.
  bool same_location(const ValueRef &other) const {
    return !is_literal() && !other.is_literal() && base == other.base &&
           fields == other.fields;
  }
};

/// A location inside one procedure; the unit of taint facts.
struct Location {
  std::string base;
  std::vector<std::string> fields;

  auto operator<=>(const Location &) const = default;
  std::string str() const;
  bool is_prefix_of(const Location &other) const;
  static Location of(const ValueRef &value) { return {value.base, value.fields}; }
};

enum class StmtKind {
  assign,      ///< x := e (one or more operands)
  field_store, ///< o.f := v
  field_load,  ///< x := o.f
  call,        ///< [x :=] callee(a1..an)
  ret,         ///< return e
  branch,      ///< if cond then-scope else-scope
  assemble,    ///< r := {.., v, ..}
  exit         ///< throw / raise: leaves the procedure without returning
};

std::string to_string(StmtKind kind);

enum class CalleeForm {
  name,     ///< f(...)
  member,   ///< obj.m(...)
  computed, ///< expr(...) where expr is a value (registry lookup, alias, ...)
};

struct CallSite {
  CalleeForm form = CalleeForm::name;
  /// Source text of the callee, e.g. "Fetcher.html" or "execSync".
  std::string callee;
  /// Callee after alias and import resolution (filled by resolve_imports).
  std::string qualified;
  /// Receiver object of a member call.
  std::optional<ValueRef> object;
  /// Callee value for computed calls.
  std::optional<ValueRef> callee_value;
  /// Key expression of a computed `table[key](...)` callee.
  std::optional<ValueRef> callee_key;
  std::vector<ValueRef> args;
  /// Keyword argument names, parallel to args ("" for positional).
  std::vector<std::string> arg_names;
  bool is_new = false;

  std::string method_name() const;
};

enum class BranchForm {
  plain,      ///< if / else, loops, try handlers
  if_chain,   ///< part of an if/elif or else-if chain
  switch_case,
  match_case,
  loop,
  handler,    ///< try/except handler scope
};

enum class ConditionForm { none, equality, inequality, membership, truthy, other };

/// Structure of a branch condition, kept for dispatch and guard analysis.
struct Condition {
  ConditionForm form = ConditionForm::none;
  bool negated = false;
  /// Compared value for equality / membership forms.
  std::optional<ValueRef> subject;
  /// String literals compared against (equality, membership, case labels).
  std::vector<std::string> literals;
  /// Name of a collection compared against (membership in a named set).
  std::string collection;
  /// Every non-temporary location read anywhere inside the condition.
  std::vector<ValueRef> reads;
  /// Callee names of calls inside the condition.
  std::vector<std::string> calls;
  /// Verbatim condition source.
  std::string text;
};

struct Statement {
  std::string id;
  StmtKind kind = StmtKind::assign;
  ProcIndex procedure = 0;
  /// x, o.f or r; the return slot for ret statements.
  std::optional<ValueRef> target;
  /// Operand values read by the statement (condition values for branches).
  std::vector<ValueRef> sources;
  /// Keys of assembled components, parallel to sources ("" if positional).
  std::vector<std::string> keys;
  std::optional<CallSite> call;
  /// Branch arms: [then, else]; each is an ordered list of statement indices.
  std::vector<std::vector<StmtIndex>> arms;
  BranchForm branch_form = BranchForm::plain;
  Condition condition;
  /// For string templates with literal text: the literal head before the
  /// first interpolation and the pattern with holes rendered as "{}".
  std::optional<std::string> template_head;
  std::optional<std::string> template_pattern;
  SourceLocation location;
};

struct Param {
  std::string name;
  bool rest = false;
  /// Default value literal, if any (informational).
  std::optional<std::string> default_text;
};

/// A decorator applied to a procedure, e.g. `@mcp.tool(name="x")`.
struct Decorator {
  std::string callee;
  std::string qualified;
  std::vector<ValueRef> args;
  std::vector<std::string> arg_names;
  bool called = false;
  SourceLocation location;
};

struct CFG {
  std::vector<StmtIndex> nodes;
  std::vector<std::pair<StmtIndex, StmtIndex>> edges;
  std::optional<StmtIndex> entry;
  std::vector<StmtIndex> exits;

  std::vector<StmtIndex> successors(StmtIndex node) const;
};

/// A captured outer variable read by a nested function.
struct Capture {
  ProcIndex outer = 0;
  std::string name;
};

struct Procedure {
  std::string id;
  std::string name; ///< qualified, e.g. "Fetcher._fetch"
  UnitIndex unit = 0;
  std::vector<Param> params;
  std::vector<StmtIndex> body;      ///< top-level statements, in order
  std::vector<StmtIndex> statements; ///< all statements, in lowering order
  std::optional<CFG> cfg;
  SourceLocation location;
  std::vector<Decorator> decorators;
  std::optional<ProcIndex> parent; ///< enclosing procedure for nested defs
  std::string class_name;          ///< enclosing class, if a method
  bool is_module = false;          ///< synthetic module-level procedure
  bool is_lambda = false;
  bool is_generator = false;
  /// First param is the receiver (self / this) bound from the call object.
  bool has_receiver = false;
  std::vector<Capture> captures;
};

enum class Confidence { exact, heuristic, unresolved };

std::string to_string(Confidence c);

struct CallEdge {
  StmtIndex site = 0;
  ProcIndex caller = 0;
  std::optional<ProcIndex> callee; ///< empty for external / unresolved
  std::string callee_name;
  Confidence confidence = Confidence::exact;
  bool external = false;
};

struct CallGraph {
  std::vector<ProcIndex> nodes;
  std::vector<CallEdge> edges;

  std::vector<const CallEdge *> edges_at(StmtIndex site) const;
  std::vector<const CallEdge *> edges_from(ProcIndex caller) const;
};

/// A binding introduced by an import in a unit.
struct ImportBinding {
  std::string local;    ///< local name
  std::string module;   ///< module specifier as written
  std::string imported; ///< imported member ("" for namespace/default import)
  bool namespace_import = false;
  std::optional<UnitIndex> target; ///< resolved first-party unit
  bool external = true;
  SourceLocation location;
};

struct ModuleGraph {
  std::vector<std::vector<ImportBinding>> imports; ///< per unit
};

struct SourceUnit {
  std::string path; ///< repository-relative
  Language language = Language::python;
  std::string root; ///< syntax root id
  std::string text; ///< verbatim file contents
  std::optional<ProcIndex> module_procedure;
  /// Top-level names defined in the unit (functions, classes' methods as
  /// "Class.method").
  std::map<std::string, ProcIndex> definitions;
  /// Class name -> method name -> procedure.
  std::map<std::string, std::map<std::string, ProcIndex>> classes;
};

struct Program {
  std::vector<SourceUnit> units;
  std::vector<Procedure> procedures;
  std::vector<Statement> statements;
  CallGraph call_graph;
  ModuleGraph module_graph;

  const Statement &stmt(StmtIndex i) const { return statements.at(i); }
  const Procedure &proc(ProcIndex i) const { return procedures.at(i); }
  const SourceUnit &unit_of(ProcIndex p) const { return units.at(procedures.at(p).unit); }

  std::optional<StmtIndex> find_statement(const std::string &id) const;
  std::optional<ProcIndex> find_procedure(const std::string &id) const;
  std::optional<ProcIndex> find_procedure_by_name(const std::string &name) const;
  /// Excerpt of the unit text covered by `loc`.
  std::string excerpt(const SourceLocation &loc) const;
  const SourceUnit *unit_by_path(const std::string &path) const;
};

/// Verbatim excerpt around a value or statement, clipped to its procedure.
struct CodeSlice {
  std::string focus;     ///< statement id or value string
  std::string text;      ///< verbatim substring of the unit
  std::string procedure; ///< enclosing procedure name
  int first_line = 0;
  int last_line = 0;
  std::string path;
};

/// Stable hex id from path, span and kind.
std::string stable_id(const std::string &path, std::size_t begin, std::size_t end,
                      const std::string &kind, std::size_t ordinal = 0);

// Structural operations.
CFG build_cfg(const Program &program, ProcIndex proc);
CallGraph build_call_graph(const Program &program);
CodeSlice slice_around(const Program &program, const std::string &focus_stmt_id, int window);
CodeSlice slice_around(const Program &program, StmtIndex focus, int window);

/// Immediate-dominator-based dominance over a CFG.
class Dominators {
public:
  explicit Dominators(const CFG &cfg);
  bool dominates(StmtIndex a, StmtIndex b) const;

private:
  std::map<StmtIndex, std::vector<StmtIndex>> dom_;
};

/// Line-delimited text dump of a Program (procedures, statements, edges).
std::string dump_program(const Program &program);

/// Checks the structural invariants of a Program. Returns violations.
std::vector<std::string> check_invariants(const Program &program);

} // namespace mcpflow
