#pragma once

// Tool entrypoint recovery: publication facts, dispatch facts and their
// specialization into per-tool analysis units.

#include "mcpflow/model.hpp"
#include "mcpflow/resolve.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mcpflow {

enum class PatternKind { publication, dispatcher };

enum class DispatchFamily { protocol, branch, registry, reflective };

std::string to_string(DispatchFamily f);

struct PatternVariant {
  std::string id;
  PatternKind kind = PatternKind::publication;
  /// "python", "js_ts" or "any".
  std::string language;
  /// Dispatcher family; empty for publication variants.
  std::string family;
  /// Syntactic template, e.g. `@<server>.tool(name=<t>) def <h>(...)`.
  std::string template_text;
  /// Which sub-node binds the tool name, handler and schema.
  std::string bindings;
};

struct PatternCatalog {
  std::string version;
  std::vector<PatternVariant> variants;

  const PatternVariant *find(const std::string &id) const;
  std::size_t count(PatternKind kind) const;
};

/// Parses the catalog text format. Throws Error "catalog_malformed" /
/// "catalog_duplicate".
PatternCatalog parse_catalog(const std::string &text, const std::string &origin = "<catalog>");
PatternCatalog load_catalog(const std::filesystem::path &path);
/// Catalog shipped in the repository's data directory.
PatternCatalog default_catalog();
std::string format_catalog(const PatternCatalog &catalog);

struct Witness {
  std::string variant;
  SourceLocation location;
  std::string excerpt;
};

struct PublicationFact {
  std::string tool;
  std::string site; ///< statement or procedure id of the publication site
  std::optional<ProcIndex> handler;
  std::string unresolved_reason; ///< set when handler is empty
  Witness witness;
  /// Schema value, when one was recognized at the site.
  std::optional<ValueRef> schema;
  ProcIndex site_procedure = 0;
};

/// Statements reachable only under one tool-name match in a dispatcher.
struct BranchScope {
  std::string id; ///< id of the guarding branch statement
  ProcIndex procedure = 0;
  std::set<StmtIndex> statements;
  /// Branch statement and arm that open the scope.
  StmtIndex branch = 0;
  int arm = 0;
};

struct DispatchFact {
  std::string tool;
  std::string site; ///< dispatcher root statement or procedure id
  std::optional<ProcIndex> handler;
  std::string unresolved_reason;
  /// Branch scope, or none when the handler itself is the unit (registry /
  /// reflective targets).
  std::optional<BranchScope> scope;
  Witness witness;
  DispatchFamily family = DispatchFamily::branch;
  Confidence confidence = Confidence::exact;
  /// Locations in the dispatcher procedure that hold the tool name.
  std::vector<ValueRef> routing;
};

enum class Provenance { from_dispatch, from_publication_fallback };

std::string to_string(Provenance p);

struct Entrypoint {
  std::string id;
  std::string tool;
  ProcIndex handler = 0;
  /// None stands for the whole handler (unbranched publication).
  std::optional<BranchScope> scope;
  Provenance provenance = Provenance::from_publication_fallback;
  std::optional<ValueRef> schema;
  std::string variant;
  DispatchFamily family = DispatchFamily::branch;
  /// Seeds for reflective targets are recorded as assumed.
  bool assumed = false;
  /// Routing locations (in the scope's procedure) excluded from seeding.
  std::vector<ValueRef> routing;
  /// Publication handlers that disagreed with the dispatch handler.
  std::vector<std::string> secondary_witnesses;
  /// Statements excluded from this entrypoint's analysis (other tools'
  /// scopes in a shared dispatcher).
  std::set<StmtIndex> excluded;
};

struct EntrypointGap {
  std::string tool;
  std::string reason;
  SourceLocation location;
};

std::vector<PublicationFact> collect_publication_facts(const Program &program,
                                                       const PatternCatalog &catalog);
std::vector<DispatchFact> collect_dispatch_facts(const Program &program,
                                                 const PatternCatalog &catalog,
                                                 std::vector<EntrypointGap> *gaps = nullptr);

/// Resolves a handler reference (alias, wrapper, tool object) to a procedure.
Resolution resolve_handler(const Program &program, ProcIndex scope, const ValueRef &reference,
                           int depth_limit = kDefaultResolveDepth);

struct Specialization {
  std::vector<Entrypoint> entrypoints;
  std::vector<EntrypointGap> gaps;
};

Specialization specialize_entrypoints(const Program &program,
                                      const std::vector<PublicationFact> &publications,
                                      const std::vector<DispatchFact> &dispatches);

/// Full recovery: collect both fact kinds and specialize.
Specialization recover_entrypoints(const Program &program, const PatternCatalog &catalog);

} // namespace mcpflow
