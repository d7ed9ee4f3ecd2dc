#include "mcpflow/resolve.hpp"
#include "mcpflow/taint_spec.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace mcpflow {

namespace {

const std::set<std::string> kCoercions = {"int",       "float",     "Number",     "parseInt",
                                          "parseFloat", "bool",     "Boolean",    "Math.floor",
                                          "Math.trunc", "Math.round", "uuid.UUID", "decimal.Decimal"};

const std::set<std::string> kAccessorMethods = {"get",      "pop",         "getattr",     "parse",
                                                "safeParse", "parseAsync", "validate",    "model_validate",
                                                "parse_obj", "getlist",    "get_argument", "dict",
                                                "model_dump", "to_dict"};

std::string short_callee(const CallSite &cs) {
  return cs.qualified.empty() ? cs.callee : cs.qualified;
}

bool is_coercion(const CallSite &cs) {
  std::string q = short_callee(cs);
  return kCoercions.count(q) || kCoercions.count(cs.callee);
}

bool is_accessor_call(const CallSite &cs) { return kAccessorMethods.count(cs.method_name()) > 0; }

bool extends_routing(const std::vector<ValueRef> &routing, const ValueRef &v) {
  Location lv = Location::of(v);
  for (const auto &r : routing)
    if (!r.is_literal() && Location::of(r).is_prefix_of(lv)) return true;
  return false;
}

/// Why a seed is ambiguous (coercion or closed-set membership), with the
/// statement that shows it.
std::optional<std::pair<StmtIndex, std::string>> ambiguity(const Program &prog, ProcIndex proc,
                                                           const Location &seed,
                                                           const std::set<StmtIndex> &excluded) {
  for (StmtIndex si : prog.proc(proc).statements) {
    if (excluded.count(si)) continue;
    const Statement &st = prog.stmt(si);
    if (st.kind == StmtKind::call && st.call && is_coercion(*st.call)) {
      for (const auto &a : st.call->args)
        if (!a.is_literal() && locations_related(Location::of(a), seed))
          return std::make_pair(si, "coerced by " + short_callee(*st.call));
    }
    if (st.kind == StmtKind::branch && st.branch_form != BranchForm::loop &&
        st.condition.form == ConditionForm::membership && !st.condition.literals.empty() &&
        st.condition.subject &&
        locations_related(Location::of(*st.condition.subject), seed))
      return std::make_pair(si, "tested against a closed literal set");
  }
  return std::nullopt;
}

struct SeedSink {
  std::vector<TaintSeed> seeds;
  std::set<std::pair<ProcIndex, Location>> seen;

  void add(TaintSeed s) {
    if (seen.insert({s.procedure, Location::of(s.value)}).second) seeds.push_back(std::move(s));
  }
};

} // namespace

std::vector<TaintSeed> seed_request_sources(const Program &prog, const Entrypoint &ep, Judge *judge,
                                            const SeedOptions &options) {
  SeedSink sink;
  const ProcIndex anchor = ep.scope ? ep.scope->procedure : ep.handler;
  const Procedure &ap = prog.proc(anchor);
  std::size_t first_param = ap.has_receiver ? 1 : 0;

  std::set<std::string> request_bases;
  for (std::size_t i = first_param; i < ap.params.size(); ++i) {
    ValueRef pv = ValueRef::param(ap.params[i].name);
    if (extends_routing(ep.routing, pv)) continue;
    request_bases.insert(pv.base);
  }

  if (!ep.scope) {
    for (const auto &b : request_bases) {
      TaintSeed s;
      s.procedure = anchor;
      s.value = ValueRef::param(b);
      s.label = TaintLabel::req;
      s.origin = ap.location;
      s.rationale = SeedRationale::handler_param;
      sink.add(std::move(s));
    }
  } else {
    const BranchScope &scope = *ep.scope;
    // Aliases of the request payload defined in the dispatcher preamble.
    if (options.lift_accessors) {
      bool changed = true;
      while (changed) {
        changed = false;
        for (StmtIndex si : ap.statements) {
          if (scope.statements.count(si) || ep.excluded.count(si)) continue;
          const Statement &st = prog.stmt(si);
          if (!st.target || !st.target->fields.empty() || request_bases.count(st.target->base)) continue;
          if (st.kind != StmtKind::assign && st.kind != StmtKind::field_load && st.kind != StmtKind::call)
            continue;
          for (const auto &v : values_read(st)) {
            if (!request_bases.count(v.base) || extends_routing(ep.routing, v)) continue;
            if (st.call && st.call->callee_value) continue;
            request_bases.insert(st.target->base);
            changed = true;
            break;
          }
        }
      }
    }
    std::vector<StmtIndex> in_scope(scope.statements.begin(), scope.statements.end());
    for (StmtIndex si : in_scope) {
      if (ep.excluded.count(si)) continue;
      const Statement &st = prog.stmt(si);
      if (st.procedure != anchor) continue;
      for (const auto &v : values_read(st)) {
        if (!request_bases.count(v.base) || extends_routing(ep.routing, v)) continue;
        bool via_accessor = false;
        if (st.call) {
          bool is_object = st.call->object && st.call->object->same_location(v);
          via_accessor = (is_object && is_accessor_call(*st.call)) ||
                         (!is_object && is_accessor_call(*st.call) && st.call->form == CalleeForm::member);
        }
        bool structured = !v.fields.empty() || via_accessor;
        if (!options.lift_accessors && structured) continue;
        TaintSeed s;
        s.procedure = anchor;
        s.value = v;
        s.label = TaintLabel::req;
        s.origin = st.location;
        s.origin_stmt = si;
        s.rationale = structured ? SeedRationale::structured_accessor : SeedRationale::branch_local;
        sink.add(std::move(s));
      }
    }
  }

  std::vector<TaintSeed> out;
  for (auto &s : sink.seeds) {
    if (auto amb = ambiguity(prog, anchor, Location::of(s.value), ep.excluded)) {
      if (!judge) {
        s.confidence = SeedConfidence::assumed;
        s.note = "ambiguous: " + amb->second;
      } else {
        AdjudicationRequest req;
        req.kind = AdjudicationKind::source_controllability;
        req.slice = slice_around(prog, amb->first, 0);
        req.entrypoint_id = ep.id;
        req.subject = s.value.str();
        req.context = "requester of tool '" + ep.tool + "'";
        Verdict v = judge->adjudicate_source(req);
        if (v.decision == Decision::not_controlled) continue;
        s.confidence = SeedConfidence::adjudicated;
        s.note = "ambiguous (" + amb->second + "); " + v.judge_id + ": " + to_string(v.decision);
      }
    }
    if (ep.assumed && s.confidence != SeedConfidence::adjudicated) {
      s.confidence = SeedConfidence::assumed;
      if (s.note.empty()) s.note = "reflective dispatch target";
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ReturnSink> derive_return_sinks(const Program &prog, const Entrypoint &ep) {
  std::vector<ReturnSink> out;
  auto add = [&](StmtIndex si) {
    const Statement &st = prog.stmt(si);
    if (st.kind != StmtKind::ret || ep.excluded.count(si)) return;
    for (const auto &r : out)
      if (r.stmt == si) return;
    ReturnSink rs;
    rs.entrypoint_id = ep.id;
    rs.stmt = si;
    rs.value = st.sources.empty() ? ValueRef::other_literal("None") : st.sources[0];
    out.push_back(std::move(rs));
  };
  bool handler_is_dispatcher = ep.scope && ep.scope->procedure == ep.handler;
  if (!handler_is_dispatcher)
    for (StmtIndex si : prog.proc(ep.handler).statements) add(si);
  if (ep.scope)
    for (StmtIndex si : ep.scope->statements)
      if (prog.stmt(si).procedure == ep.scope->procedure) add(si);
  std::sort(out.begin(), out.end(), [](const ReturnSink &a, const ReturnSink &b) { return a.stmt < b.stmt; });
  return out;
}

} // namespace mcpflow
