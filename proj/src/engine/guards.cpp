#include "mcpflow/resolve.hpp"
#include "mcpflow/taint_engine.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>
#include <sstream>

namespace mcpflow {

std::string to_string(GuardKind k) {
  switch (k) {
  case GuardKind::schema_check: return "schema_check";
  case GuardKind::confinement_check: return "confinement_check";
  case GuardKind::quoting_or_normalization: return "quoting_or_normalization";
  case GuardKind::allowlist: return "allowlist";
  case GuardKind::parameterized_api: return "parameterized_api";
  case GuardKind::other: return "other";
  }
  return "other";
}

std::string to_string(GuardDisposition d) {
  switch (d) {
  case GuardDisposition::suppressing: return "suppressing";
  case GuardDisposition::recorded_only: return "recorded_only";
  case GuardDisposition::adjudicated: return "adjudicated";
  }
  return "recorded_only";
}

std::string to_string(ClusterConfidence c) {
  switch (c) {
  case ClusterConfidence::certain: return "certain";
  case ClusterConfidence::adjudicated: return "adjudicated";
  case ClusterConfidence::assumed: return "assumed";
  }
  return "certain";
}

namespace {

std::string lower(std::string s) {
  for (auto &c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string last_segment(const std::string &dotted) {
  auto dot = dotted.rfind('.');
  return dot == std::string::npos ? dotted : dotted.substr(dot + 1);
}

const std::set<std::string> kCanonicalizers = {"realpath", "realpathSync", "resolve", "abspath", "normpath",
                                               "normalize", "canonicalize", "expanduser"};
const std::set<std::string> kRootChecks = {"startsWith", "startswith", "is_relative_to", "commonpath",
                                           "relative",   "isPathInside", "is_subpath",   "relative_to"};
const std::set<std::string> kQuoting = {"quote",      "escape",     "shellescape",      "shell_quote",
                                        "escapeShellArg", "shellEscape", "escapeshellarg", "sanitize",
                                        "sanitizePath", "sanitize_path", "sanitize_filename", "encodeURIComponent",
                                        "escape_string", "escapeId",  "quote_plus",       "shlex.quote"};

bool contains_any(const std::string &hay, const std::vector<std::string> &needles) {
  for (const auto &n : needles)
    if (hay.find(n) != std::string::npos) return true;
  return false;
}

std::set<StmtIndex> closure(const Program &prog, const std::vector<StmtIndex> &arm) {
  std::set<StmtIndex> out;
  std::vector<StmtIndex> work(arm.begin(), arm.end());
  while (!work.empty()) {
    StmtIndex s = work.back();
    work.pop_back();
    if (!out.insert(s).second) continue;
    for (const auto &a : prog.stmt(s).arms) work.insert(work.end(), a.begin(), a.end());
  }
  return out;
}

bool arm_exits(const Program &prog, const std::vector<StmtIndex> &arm) {
  for (StmtIndex s : arm) {
    auto k = prog.stmt(s).kind;
    if (k == StmtKind::exit || k == StmtKind::ret) return true;
  }
  return false;
}

/// Locals holding canonicalized paths in a procedure (with aliases).
std::set<std::string> canonical_locals(const Program &prog, ProcIndex p) {
  std::set<std::string> out;
  const auto &stmts = prog.proc(p).statements;
  for (StmtIndex s : stmts) {
    const Statement &st = prog.stmt(s);
    if (st.kind == StmtKind::call && st.call && st.target && st.target->fields.empty()) {
      std::string m = st.call->method_name();
      if (kCanonicalizers.count(m)) out.insert(st.target->base);
    }
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (StmtIndex s : stmts) {
      const Statement &st = prog.stmt(s);
      if (!st.target || !st.target->fields.empty() || out.count(st.target->base)) continue;
      bool from_canonical = false;
      if (st.kind == StmtKind::assign)
        for (const auto &v : st.sources) from_canonical |= !v.is_literal() && out.count(v.base);
      if (st.kind == StmtKind::call && st.call) {
        // str(p), String(p), p.toString()
        std::string m = st.call->method_name();
        if (m == "str" || m == "String" || m == "toString" || m == "fspath" || m == "as_posix") {
          if (st.call->object) from_canonical |= out.count(st.call->object->base) > 0;
          for (const auto &a : st.call->args) from_canonical |= !a.is_literal() && out.count(a.base);
        }
      }
      if (from_canonical) {
        out.insert(st.target->base);
        changed = true;
      }
    }
  }
  return out;
}

std::string call_text(const Condition &c) {
  std::string out;
  for (const auto &k : c.calls) out += k + " ";
  return out;
}

struct Classified {
  GuardKind kind = GuardKind::other;
  GuardDisposition disposition = GuardDisposition::recorded_only;
  bool ambiguous = false;
  std::string note;
};

} // namespace

std::vector<GuardEvidence> collect_guard_evidence(const Program &prog, const PathContext &ctx,
                                                  const CandidatePath &path) {
  std::vector<GuardEvidence> out;
  const std::uint8_t bit = path.direction == PathDirection::request_side ? kReqBit : kExtBit;
  const Entrypoint *ep = ctx.entrypoint;

  // Path statements per procedure, and the locations the path carries there.
  std::map<ProcIndex, std::vector<StmtIndex>> steps_in;
  std::map<ProcIndex, std::vector<Location>> values_in;
  for (const auto &st : path.steps) {
    if (st.stmt) steps_in[prog.stmt(*st.stmt).procedure].push_back(*st.stmt);
    values_in[st.procedure].push_back(st.value);
  }

  auto extends_routing = [&](const ValueRef &v) {
    if (!ep || v.is_literal()) return false;
    for (const auto &r : ep->routing)
      if (!r.is_literal() && Location::of(r).is_prefix_of(Location::of(v))) return true;
    return false;
  };
  auto on_path = [&](ProcIndex p, const Location &loc) {
    for (const auto &v : values_in[p])
      if (locations_related(v, loc)) return true;
    return false;
  };
  auto tainted = [&](ProcIndex p, const Location &loc) {
    return on_path(p, loc) || (ctx.forward && (ctx.forward->labels_at(p, loc) & bit));
  };

  for (auto &[p, stmts] : steps_in) {
    const Procedure &proc = prog.proc(p);
    if (!proc.cfg) continue;
    Dominators dom(*proc.cfg);
    std::set<std::string> canonical = canonical_locals(prog, p);
    for (StmtIndex b : proc.statements) {
      const Statement &br = prog.stmt(b);
      if (br.kind != StmtKind::branch) continue;
      if (ctx.scope && !ctx.scope->active(prog, b)) continue;
      if (br.branch_form == BranchForm::loop || br.branch_form == BranchForm::handler) continue;
      if (ep && ep->scope && ep->scope->branch == b) continue;
      const Condition &c = br.condition;
      if (c.subject && extends_routing(*c.subject)) continue;
      bool routing_only = !c.reads.empty();
      for (const auto &r : c.reads) routing_only &= extends_routing(r);
      if (routing_only) continue;

      // Latest dominated step in this procedure.
      std::optional<StmtIndex> guarded;
      for (StmtIndex s : stmts) {
        if (s == b) continue;
        std::set<StmtIndex> inside;
        for (const auto &a : br.arms) {
          auto cl = closure(prog, a);
          inside.insert(cl.begin(), cl.end());
        }
        if (dom.dominates(b, s) || inside.count(s)) guarded = s;
      }
      if (!guarded) continue;

      bool relevant = false;
      for (const auto &r : c.reads) relevant |= !r.is_literal() && tainted(p, Location::of(r));
      if (c.subject) relevant |= tainted(p, Location::of(*c.subject));
      if (!relevant) continue;

      // Does the passing arm gate the guarded step?
      bool negated = c.negated != (c.form == ConditionForm::inequality);
      auto then_arm = br.arms.empty() ? std::set<StmtIndex>{} : closure(prog, br.arms[0]);
      auto else_arm = br.arms.size() > 1 ? closure(prog, br.arms[1]) : std::set<StmtIndex>{};
      bool gated = (!negated && then_arm.count(*guarded)) ||
                   (negated && !br.arms.empty() && arm_exits(prog, br.arms[0]) && !then_arm.count(*guarded)) ||
                   (negated && else_arm.count(*guarded));

      std::string text = lower(c.text + " " + call_text(c));
      Classified g;
      bool root_check = false;
      for (const auto &call : c.calls) root_check |= kRootChecks.count(last_segment(call)) > 0;
      bool reads_canonical = false;
      for (const auto &r : c.reads) reads_canonical |= !r.is_literal() && canonical.count(r.base);
      bool path_canonical = false;
      for (const auto &v : values_in[p]) path_canonical |= canonical.count(v.base) > 0;

      if (root_check && reads_canonical) {
        g.kind = GuardKind::confinement_check;
        if (gated && path_canonical) {
          g.disposition = GuardDisposition::suppressing;
          g.note = "canonicalized path checked against a root";
        } else {
          g.note = "root check does not gate the canonical value on this path";
        }
      } else if ((c.form == ConditionForm::equality || c.form == ConditionForm::inequality ||
                  c.form == ConditionForm::membership) &&
                 (!c.literals.empty() || !c.collection.empty()) && c.subject &&
                 tainted(p, Location::of(*c.subject))) {
        g.kind = GuardKind::allowlist;
        if (gated) {
          g.disposition = GuardDisposition::suppressing;
          g.note = c.literals.empty() ? "membership in " + c.collection : "closed literal set";
        } else {
          g.note = "comparison does not gate the guarded step";
        }
      } else if (contains_any(text, {"isabsolute", "is_absolute", "isabs", "private", "localhost", "loopback",
                                     "127.0.0.1", "isip", "ipaddress", "is_global", "internal", "blocked"})) {
        g.kind = GuardKind::confinement_check;
        g.note = "location check that does not confine the value";
      } else if (contains_any(text, {"validate", "safeparse", "isvalid", "is_valid", ".success", "typeof",
                                     "instanceof", "isinstance", "schema", "isarray", "isinteger", "isnan"})) {
        g.kind = GuardKind::schema_check;
        g.note = "type or schema validation";
      } else if (text.find("..") != std::string::npos) {
        g.kind = GuardKind::confinement_check;
        g.ambiguous = true;
        g.note = "traversal-sequence check";
      } else if (!c.calls.empty()) {
        g.kind = GuardKind::other;
        g.ambiguous = true;
        g.note = "condition calls " + c.calls.front();
      } else {
        g.kind = GuardKind::other;
        g.note = "unclassified condition";
      }
      GuardEvidence ev;
      ev.stmt = b;
      ev.kind = g.kind;
      ev.disposition = g.disposition;
      ev.ambiguous = g.ambiguous;
      ev.note = g.note;
      out.push_back(ev);
    }
  }

  // Quoting or escaping calls the value passes through.
  for (std::size_t i = 1; i + 1 < path.steps.size(); ++i) {
    const PathStep &st = path.steps[i];
    if (!st.stmt || st.rule != rule::pass) continue;
    const Statement &s = prog.stmt(*st.stmt);
    if (!s.call) continue;
    std::string name = s.call->qualified.empty() ? s.call->callee : s.call->qualified;
    if (!kQuoting.count(last_segment(name)) && !kQuoting.count(name)) continue;
    GuardEvidence ev;
    ev.stmt = *st.stmt;
    ev.kind = GuardKind::quoting_or_normalization;
    ev.ambiguous = true;
    ev.note = "value passes through " + name;
    out.push_back(ev);
  }

  if (path.via_bound_operand) {
    GuardEvidence ev;
    ev.stmt = path.sink.stmt;
    ev.kind = GuardKind::parameterized_api;
    ev.disposition = GuardDisposition::suppressing;
    ev.note = "taint reaches only bound query parameters";
    out.push_back(ev);
  }

  // Fixed-base URL: the operand is a template whose literal head pins
  // scheme, host and the start of the path.
  if (path.sink.op && path.sink.op->category == SinkCategory::network && path.steps.size() >= 2) {
    static const std::regex fixed_base(R"(^https?://[^/\s{}$]+/)");
    const PathStep &last = path.steps.back();
    std::vector<StmtIndex> defs;
    if (last.value.fields.empty()) defs = definitions_of(prog, last.procedure, last.value.base);
    for (StmtIndex d : defs) {
      const Statement &st = prog.stmt(d);
      std::string head;
      if (st.template_head) head = *st.template_head;
      else if (st.kind == StmtKind::assign && !st.sources.empty() && st.sources[0].is_string_literal())
        head = st.sources[0].literal;
      if (!head.empty() && std::regex_search(head, fixed_base)) {
        GuardEvidence ev;
        ev.stmt = d;
        ev.kind = GuardKind::confinement_check;
        ev.disposition = GuardDisposition::suppressing;
        ev.note = "fixed-base URL construction";
        out.push_back(ev);
        break;
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const GuardEvidence &a, const GuardEvidence &b) { return a.stmt < b.stmt; });
  return out;
}

RefineResult refine_paths(const Program &prog, std::vector<CandidatePath> paths, Judge *judge) {
  RefineResult result;
  for (auto &path : paths) {
    std::string reason;
    for (auto &g : path.guards) {
      if (g.ambiguous && judge && !g.verdict) {
        AdjudicationRequest req;
        req.kind = AdjudicationKind::guard_effectiveness;
        req.slice = slice_around(prog, g.stmt, 1);
        req.entrypoint_id = path.entrypoint_id;
        const Statement &st = prog.stmt(g.stmt);
        req.subject = st.kind == StmtKind::branch ? st.condition.text : prog.excerpt(st.location);
        req.context = to_string(path.direction) + " path to " + prog.excerpt(prog.stmt(path.sink.stmt).location);
        Verdict v = judge->adjudicate_guard(req);
        g.verdict = v.decision;
        g.disposition = GuardDisposition::adjudicated;
        g.note += "; " + v.judge_id + ": " + to_string(v.decision);
      }
      if (reason.empty()) {
        if (g.disposition == GuardDisposition::suppressing)
          reason = to_string(g.kind) + " at " + prog.stmt(g.stmt).id + " (" + g.note + ")";
        else if (g.disposition == GuardDisposition::adjudicated && g.verdict == Decision::blocks)
          reason = "adjudicated " + to_string(g.kind) + " at " + prog.stmt(g.stmt).id + " blocks";
      }
    }
    if (reason.empty()) result.kept.push_back(std::move(path));
    else result.suppressed.push_back({std::move(path), reason});
  }
  return result;
}

ClusterConfidence path_confidence(const CandidatePath &path) {
  if (path.seed.confidence == SeedConfidence::assumed) return ClusterConfidence::assumed;
  // An ambiguous guard nobody judged leaves the path unconfirmed.
  for (const auto &g : path.guards)
    if (g.ambiguous && !g.verdict) return ClusterConfidence::assumed;
  if (path.seed.confidence == SeedConfidence::adjudicated) return ClusterConfidence::adjudicated;
  for (const auto &g : path.guards)
    if (g.disposition == GuardDisposition::adjudicated) return ClusterConfidence::adjudicated;
  return ClusterConfidence::certain;
}

bool path_precedes(const CandidatePath &a, const CandidatePath &b) {
  if (a.steps.size() != b.steps.size()) return a.steps.size() < b.steps.size();
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    const auto &x = a.steps[i].location, &y = b.steps[i].location;
    auto kx = std::tie(x.path, x.start_line, x.start_col, x.end_line, x.end_col);
    auto ky = std::tie(y.path, y.start_line, y.start_col, y.end_line, y.end_col);
    if (kx != ky) return kx < ky;
    if (a.steps[i].rule != b.steps[i].rule) return a.steps[i].rule < b.steps[i].rule;
    if (a.steps[i].value != b.steps[i].value) return a.steps[i].value < b.steps[i].value;
  }
  return false;
}

std::string FindingCluster::key() const {
  return to_string(direction) + "|" + tool + "|" + handler_id + "|" + sink_stmt_id + "|" + root_cause;
}

std::vector<FindingCluster> dedupe_findings(const Program &prog, const std::vector<CandidatePath> &paths) {
  std::map<std::string, FindingCluster> groups;
  std::map<std::string, std::set<std::string>> distinct;
  for (const auto &p : paths) {
    FindingCluster c;
    c.direction = p.direction;
    c.tool = p.tool;
    c.entrypoint_id = p.entrypoint_id;
    c.handler_id = prog.proc(p.handler).id;
    c.sink_stmt_id = prog.stmt(p.sink.stmt).id;
    c.root_cause = p.root_cause();
    std::string k = c.key();
    std::ostringstream sig;
    for (const auto &s : p.steps) sig << (s.stmt ? prog.stmt(*s.stmt).id : "-") << ':' << s.rule << ':' << s.value.str() << ';';
    auto it = groups.find(k);
    if (it == groups.end()) {
      c.representative = p;
      groups.emplace(k, std::move(c));
    } else if (path_precedes(p, it->second.representative)) {
      it->second.representative = p;
    }
    distinct[k].insert(sig.str());
  }
  std::vector<FindingCluster> out;
  for (auto &[k, c] : groups) {
    c.members = distinct[k].size();
    c.confidence = path_confidence(c.representative);
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(), [](const FindingCluster &a, const FindingCluster &b) {
    const auto &la = a.representative.steps.back().location, &lb = b.representative.steps.back().location;
    return std::tie(a.tool, a.entrypoint_id, a.direction, la.path, la.start_line, la.start_col, a.root_cause) <
           std::tie(b.tool, b.entrypoint_id, b.direction, lb.path, lb.start_line, lb.start_col, b.root_cause);
  });
  return out;
}

} // namespace mcpflow
