#pragma once

// Name, alias and callee resolution over a lowered Program. Shared by the
// call-graph builder and entrypoint recovery.

#include "mcpflow/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mcpflow {

/// Default bound on alias / wrapper hops when resolving a reference.
inline constexpr int kDefaultResolveDepth = 4;

struct Resolution {
  std::vector<ProcIndex> procs;
  Confidence confidence = Confidence::unresolved;
  bool external = false;
  /// Why nothing was found: "depth-exceeded", "not-found", "dynamic", ...
  std::string reason;
  /// Resolved dotted name for external references (e.g. "child_process.exec").
  std::string external_name;

  bool resolved() const { return !procs.empty(); }
};

/// Statements in `scope` or its enclosing procedures (innermost first) that
/// write exactly the local `name`.
std::vector<StmtIndex> definitions_of(const Program &program, ProcIndex scope,
                                      const std::string &name);

/// Import binding for `local` in a unit, if any.
const ImportBinding *find_import(const Program &program, UnitIndex unit, const std::string &local);

/// Resolves a value used as a callable (function reference, alias, tool
/// object field, registry element) to procedures.
Resolution resolve_value(const Program &program, ProcIndex scope, const ValueRef &value,
                         int depth_limit = kDefaultResolveDepth);

/// Resolves the callee of a call statement.
Resolution resolve_call(const Program &program, StmtIndex site,
                        int depth_limit = kDefaultResolveDepth);

/// Class that a receiver expression denotes or is an instance of, if known.
std::optional<std::pair<UnitIndex, std::string>>
resolve_class(const Program &program, ProcIndex scope, const ValueRef &value, int depth_limit);

/// Dotted name with the leading alias / import replaced by its qualified
/// form, e.g. "cp.exec" -> "child_process.exec".
std::string qualify_name(const Program &program, ProcIndex scope, const std::string &dotted);

} // namespace mcpflow
