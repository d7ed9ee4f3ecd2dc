#include "mcpflow/entrypoints.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <sstream>

namespace mcpflow {

namespace {

const std::vector<std::string> kHandlerFields = {"execute", "handler", "callback", "run", "fn", "func"};
const std::vector<std::string> kSchemaFields = {"inputSchema", "input_schema", "parameters", "schema"};

std::string last_segment(const std::string &dotted) {
  auto dot = dotted.rfind('.');
  return dot == std::string::npos ? dotted : dotted.substr(dot + 1);
}

bool language_ok(const PatternVariant *v, Language lang) {
  if (!v) return false;
  if (v->language == "any") return true;
  return (v->language == "python") == (lang == Language::python);
}

Witness make_witness(const Program &prog, const std::string &variant, const SourceLocation &loc) {
  Witness w;
  w.variant = variant;
  w.location = loc;
  w.excerpt = prog.excerpt(loc);
  if (w.excerpt.size() > 400) w.excerpt = w.excerpt.substr(0, 400);
  return w;
}

/// Literal string a value holds, following single-definition aliases.
std::optional<std::string> string_value(const Program &prog, ProcIndex scope, const ValueRef &v,
                                        int depth = kDefaultResolveDepth) {
  if (v.is_string_literal()) return v.literal;
  if (v.is_literal() || !v.fields.empty() || depth <= 0) return std::nullopt;
  auto defs = definitions_of(prog, scope, v.base);
  if (defs.size() != 1) return std::nullopt;
  const Statement &st = prog.stmt(defs[0]);
  if (st.kind != StmtKind::assign || st.sources.size() != 1 || st.template_pattern) return std::nullopt;
  return string_value(prog, st.procedure, st.sources[0], depth - 1);
}

std::optional<ValueRef> keyword(const CallSite &cs, const std::string &name) {
  for (std::size_t i = 0; i < cs.args.size() && i < cs.arg_names.size(); ++i)
    if (cs.arg_names[i] == name) return cs.args[i];
  return std::nullopt;
}

std::vector<ValueRef> positional(const CallSite &cs) {
  std::vector<ValueRef> out;
  for (std::size_t i = 0; i < cs.args.size(); ++i)
    if (i >= cs.arg_names.size() || cs.arg_names[i].empty()) out.push_back(cs.args[i]);
  return out;
}

/// The object-literal statement that defines `v`, if any.
const Statement *object_literal(const Program &prog, ProcIndex scope, const ValueRef &v) {
  if (v.is_literal() || !v.fields.empty()) return nullptr;
  for (StmtIndex d : definitions_of(prog, scope, v.base)) {
    const Statement &st = prog.stmt(d);
    if (st.kind == StmtKind::assemble) return &st;
    if (st.kind == StmtKind::assign && st.sources.size() == 1 && !st.sources[0].is_literal())
      return object_literal(prog, st.procedure, st.sources[0]);
  }
  return nullptr;
}

std::optional<ValueRef> component(const Statement &obj, const std::string &key) {
  for (std::size_t i = 0; i < obj.sources.size() && i < obj.keys.size(); ++i)
    if (obj.keys[i] == key) return obj.sources[i];
  return std::nullopt;
}

std::set<StmtIndex> arm_closure(const Program &prog, const std::vector<StmtIndex> &arm) {
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

bool contains_location(const std::vector<ValueRef> &set, const ValueRef &v) {
  return std::any_of(set.begin(), set.end(), [&](const ValueRef &r) { return r.same_location(v); });
}

bool template_matches(const std::string &pattern, const std::string &name, std::string *middle) {
  std::size_t hole = pattern.find("{}");
  if (hole == std::string::npos || pattern.find("{}", hole + 2) != std::string::npos) return false;
  std::string prefix = pattern.substr(0, hole), suffix = pattern.substr(hole + 2);
  if (name.size() <= prefix.size() + suffix.size()) return false;
  if (name.rfind(prefix, 0) != 0) return false;
  if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) return false;
  if (middle) *middle = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
  return true;
}

std::optional<std::string> template_of(const Program &prog, ProcIndex scope, const ValueRef &v) {
  if (v.is_literal() || !v.fields.empty()) return std::nullopt;
  for (StmtIndex d : definitions_of(prog, scope, v.base)) {
    const Statement &st = prog.stmt(d);
    if (st.template_pattern) return st.template_pattern;
  }
  return std::nullopt;
}

// --- publication -------------------------------------------------------------------

class PublicationCollector {
public:
  PublicationCollector(const Program &prog, const PatternCatalog &cat) : prog_(prog), cat_(cat) {}

  std::vector<PublicationFact> run() {
    for (ProcIndex p = 0; p < prog_.procedures.size(); ++p) decorators(p);
    // addTool objects first so the generic tool-object pass skips them.
    for (StmtIndex s = 0; s < prog_.statements.size(); ++s)
      if (prog_.stmt(s).call) call_site(s);
    for (StmtIndex s = 0; s < prog_.statements.size(); ++s)
      if (prog_.stmt(s).kind == StmtKind::assemble && !consumed_.count(s)) tool_object(s);
    std::sort(out_.begin(), out_.end(), [](const PublicationFact &a, const PublicationFact &b) {
      return std::tie(a.tool, a.site) < std::tie(b.tool, b.site);
    });
    return std::move(out_);
  }

private:
  const PatternVariant *variant(const std::string &id, Language lang) const {
    const PatternVariant *v = cat_.find(id);
    return language_ok(v, lang) ? v : nullptr;
  }

  void emit(std::string tool, std::string variant_id, const std::string &site, ProcIndex site_proc,
            const SourceLocation &loc, Resolution handler, std::optional<ValueRef> schema) {
    PublicationFact f;
    f.tool = std::move(tool);
    f.site = site;
    f.site_procedure = site_proc;
    if (handler.resolved()) f.handler = handler.procs.front();
    else f.unresolved_reason = handler.reason.empty() ? "no handler at publication site" : handler.reason;
    f.witness = make_witness(prog_, variant_id, loc);
    f.schema = std::move(schema);
    out_.push_back(std::move(f));
  }

  void decorators(ProcIndex p) {
    const Procedure &proc = prog_.proc(p);
    Language lang = prog_.unit_of(p).language;
    for (const auto &d : proc.decorators) {
      std::string name = last_segment(d.qualified.empty() ? d.callee : d.qualified);
      if (name != "tool") continue;
      const char *id = d.called ? "py.decorator.call" : "py.decorator.bare";
      if (!variant(id, lang)) continue;
      std::string tool = last_segment(proc.name);
      ProcIndex scope = proc.parent.value_or(p);
      for (std::size_t i = 0; i < d.args.size() && i < d.arg_names.size(); ++i)
        if (d.arg_names[i] == "name")
          if (auto s = string_value(prog_, scope, d.args[i])) tool = *s;
      Resolution r;
      r.procs = {p};
      r.confidence = Confidence::exact;
      emit(tool, id, proc.id, scope, d.location, r, std::nullopt);
    }
  }

  void call_site(StmtIndex s) {
    const Statement &st = prog_.stmt(s);
    const CallSite &cs = *st.call;
    Language lang = prog_.unit_of(st.procedure).language;
    std::string m = cs.method_name();
    auto pos = positional(cs);
    if (m == "add_tool" && variant("py.add_tool", lang) && !pos.empty()) {
      Resolution h = resolve_handler(prog_, st.procedure, pos[0]);
      std::string tool = h.resolved() ? last_segment(prog_.proc(h.procs[0]).name) : "";
      if (auto k = keyword(cs, "name"))
        if (auto v = string_value(prog_, st.procedure, *k)) tool = *v;
      if (!tool.empty()) emit(tool, "py.add_tool", st.id, st.procedure, st.location, h, std::nullopt);
      return;
    }
    if (m == "from_function" && cs.callee.find("Tool") != std::string::npos &&
        variant("py.tool.from_function", lang) && !pos.empty()) {
      Resolution h = resolve_handler(prog_, st.procedure, pos[0]);
      std::string tool = h.resolved() ? last_segment(prog_.proc(h.procs[0]).name) : "";
      if (auto k = keyword(cs, "name"))
        if (auto v = string_value(prog_, st.procedure, *k)) tool = *v;
      if (!tool.empty())
        emit(tool, "py.tool.from_function", st.id, st.procedure, st.location, h, std::nullopt);
      return;
    }
    if (m == "Tool" && variant("py.tool.declaration", lang)) {
      auto k = keyword(cs, "name");
      if (!k && !pos.empty()) k = pos[0];
      if (!k) return;
      auto tool = string_value(prog_, st.procedure, *k);
      if (!tool) return;
      std::optional<ValueRef> schema;
      for (const auto &f : {"inputSchema", "input_schema"})
        if (auto v = keyword(cs, f)) schema = v;
      Resolution none;
      none.reason = "declaration only; handler bound by dispatch";
      emit(*tool, "py.tool.declaration", st.id, st.procedure, st.location, none, schema);
      return;
    }
    // A bare alias of a method (`const t = server.tool`) counts as a member call.
    bool member_like = cs.form == CalleeForm::member ||
                       (cs.form == CalleeForm::name && cs.qualified.find('.') != std::string::npos);
    if (!member_like) return;
    if (m == "tool" && variant("js.server.tool", lang) && cs.args.size() >= 2) {
      auto tool = string_value(prog_, st.procedure, cs.args[0]);
      if (!tool) return;
      std::optional<ValueRef> schema;
      for (std::size_t i = 1; i + 1 < cs.args.size(); ++i)
        if (object_literal(prog_, st.procedure, cs.args[i])) schema = cs.args[i];
      Resolution h = resolve_handler(prog_, st.procedure, cs.args.back());
      emit(*tool, "js.server.tool", st.id, st.procedure, st.location, h, schema);
      return;
    }
    if (m == "registerTool" && variant("js.register_tool", lang) && cs.args.size() >= 2) {
      auto tool = string_value(prog_, st.procedure, cs.args[0]);
      if (!tool) return;
      std::optional<ValueRef> schema;
      if (cs.args.size() >= 3)
        if (const Statement *cfg = object_literal(prog_, st.procedure, cs.args[1]))
          for (const auto &f : kSchemaFields)
            if (auto v = component(*cfg, f)) schema = v;
      Resolution h = resolve_handler(prog_, st.procedure, cs.args.back());
      emit(*tool, "js.register_tool", st.id, st.procedure, st.location, h, schema);
      return;
    }
    if (m == "addTool" && variant("js.add_tool", lang) && !cs.args.empty()) {
      const Statement *obj = object_literal(prog_, st.procedure, cs.args[0]);
      if (!obj) return;
      consumed_.insert(static_cast<StmtIndex>(obj - prog_.statements.data()));
      object_fact(*obj, "js.add_tool", st.id, st.procedure, st.location);
    }
  }

  bool object_fact(const Statement &obj, const std::string &variant_id, const std::string &site,
                   ProcIndex site_proc, const SourceLocation &loc) {
    auto name = component(obj, "name");
    if (!name) return false;
    auto tool = string_value(prog_, obj.procedure, *name);
    if (!tool) return false;
    std::optional<ValueRef> schema;
    for (const auto &f : kSchemaFields)
      if (auto v = component(obj, f)) {
        schema = v;
        break;
      }
    std::optional<ValueRef> handler;
    for (const auto &f : kHandlerFields)
      if (auto v = component(obj, f)) {
        handler = v;
        break;
      }
    if (!handler && variant_id == "any.tool_object") return false;
    Resolution h;
    if (handler) h = resolve_handler(prog_, obj.procedure, *handler);
    else h.reason = "declaration only; handler bound by dispatch";
    emit(*tool, variant_id, site, site_proc, loc, h, schema);
    return true;
  }

  void tool_object(StmtIndex s) {
    const Statement &st = prog_.stmt(s);
    Language lang = prog_.unit_of(st.procedure).language;
    if (!component(st, "name")) return;
    bool has_handler = std::any_of(kHandlerFields.begin(), kHandlerFields.end(),
                                   [&](const std::string &f) { return component(st, f).has_value(); });
    if (has_handler) {
      if (variant("any.tool_object", lang)) object_fact(st, "any.tool_object", st.id, st.procedure, st.location);
      return;
    }
    bool declares = component(st, "inputSchema") || component(st, "input_schema") ||
                    (component(st, "description") && component(st, "parameters"));
    if (declares && variant("js.tool.declaration", lang))
      object_fact(st, "js.tool.declaration", st.id, st.procedure, st.location);
  }

  const Program &prog_;
  const PatternCatalog &cat_;
  std::vector<PublicationFact> out_;
  std::set<StmtIndex> consumed_;
};

// --- dispatch ------------------------------------------------------------------------

struct RegistryEntry {
  std::string key;
  ValueRef value;
  ProcIndex scope = 0;
  std::string variant; ///< literal / indexed / update
};

class DispatchCollector {
public:
  DispatchCollector(const Program &prog, const PatternCatalog &cat,
                    const std::set<std::string> &published, std::vector<EntrypointGap> *gaps)
      : prog_(prog), cat_(cat), published_(published), gaps_(gaps) {}

  std::vector<DispatchFact> run() {
    protocol_roots();
    published_name_roots();
    for (ProcIndex p = 0; p < prog_.procedures.size(); ++p) {
      registry_sites(p, {}, "", false, nullptr);
      reflective_sites(p);
    }
    std::sort(facts_.begin(), facts_.end(), [](const DispatchFact &a, const DispatchFact &b) {
      std::string sa = a.scope ? a.scope->id : "", sb = b.scope ? b.scope->id : "";
      return std::tie(a.tool, a.site, sa, a.witness.variant) < std::tie(b.tool, b.site, sb, b.witness.variant);
    });
    std::vector<DispatchFact> out;
    for (auto &f : facts_) {
      bool dup = std::any_of(out.begin(), out.end(), [&](const DispatchFact &o) {
        return o.tool == f.tool && o.handler == f.handler && (o.scope ? o.scope->id : "") == (f.scope ? f.scope->id : "");
      });
      if (!dup) out.push_back(std::move(f));
    }
    return out;
  }

private:
  const PatternVariant *variant(const std::string &id, Language lang) const {
    const PatternVariant *v = cat_.find(id);
    return language_ok(v, lang) ? v : nullptr;
  }

  Language lang_of(ProcIndex p) const { return prog_.unit_of(p).language; }

  void protocol_roots() {
    for (StmtIndex s = 0; s < prog_.statements.size(); ++s) {
      const Statement &st = prog_.stmt(s);
      if (st.call && st.call->method_name() == "setRequestHandler" && st.call->args.size() >= 2 &&
          variant("js.set_request_handler", lang_of(st.procedure))) {
        const ValueRef &schema = st.call->args[0];
        std::string text = schema.is_literal() ? schema.literal : schema.str();
        if (text.find("CallTool") == std::string::npos && text != "tools/call") continue;
        Resolution root = resolve_value(prog_, st.procedure, st.call->args.back());
        for (ProcIndex r : root.procs) {
          const Procedure &rp = prog_.proc(r);
          if (rp.params.empty()) continue;
          ValueRef routing = ValueRef::param(rp.params[0].name);
          routing = routing.with_field("params").with_field("name");
          analyze(r, {routing}, nullptr, st.id, 0);
        }
      }
      if (st.kind == StmtKind::branch && variant("any.jsonrpc.router", lang_of(st.procedure))) {
        const Condition &c = st.condition;
        bool method_test = (c.form == ConditionForm::equality || c.form == ConditionForm::membership) &&
                           std::find(c.literals.begin(), c.literals.end(), "tools/call") != c.literals.end();
        if (!method_test || !c.subject || c.subject->fields.empty() || c.subject->fields.back() != "method")
          continue;
        ValueRef msg = *c.subject;
        msg.fields.pop_back();
        ValueRef routing = msg.with_field("params").with_field("name");
        if (msg.fields.empty()) routing.kind = c.subject->kind;
        auto region = arm_closure(prog_, st.arms[c.negated ? 1 : 0]);
        analyze(st.procedure, {routing}, &region, st.id, 0);
      }
    }
    for (ProcIndex p = 0; p < prog_.procedures.size(); ++p) {
      const Procedure &proc = prog_.proc(p);
      for (const auto &d : proc.decorators) {
        if (last_segment(d.qualified.empty() ? d.callee : d.qualified) != "call_tool") continue;
        if (!variant("py.call_tool.decorator", lang_of(p))) continue;
        std::size_t idx = proc.has_receiver ? 1 : 0;
        if (proc.params.size() <= idx) continue;
        analyze(p, {ValueRef::param(proc.params[idx].name)}, nullptr, proc.id, 0);
      }
    }
  }

  /// Procedures branching on a value against published tool names.
  void published_name_roots() {
    if (published_.empty()) return;
    for (ProcIndex p = 0; p < prog_.procedures.size(); ++p) {
      for (StmtIndex s : prog_.proc(p).statements) {
        const Statement &st = prog_.stmt(s);
        if (st.kind != StmtKind::branch || !st.condition.subject) continue;
        const Condition &c = st.condition;
        if (c.form != ConditionForm::equality && c.form != ConditionForm::membership &&
            c.form != ConditionForm::inequality)
          continue;
        bool hit = std::any_of(c.literals.begin(), c.literals.end(),
                               [&](const std::string &l) { return published_.count(l) > 0; });
        if (hit) analyze(p, {*c.subject}, nullptr, prog_.proc(p).id, 0);
      }
    }
  }

  bool in_region(const std::set<StmtIndex> *region, StmtIndex s) const {
    return !region || region->count(s);
  }

  /// Tool-name branches, forwarded routing values and registry lookups
  /// inside one dispatcher procedure.
  void analyze(ProcIndex d, std::vector<ValueRef> routing, const std::set<StmtIndex> *region,
               const std::string &site, int depth) {
    if (depth > kDefaultResolveDepth) return;
    std::string key = std::to_string(d) + "|" + site;
    for (const auto &r : routing) key += "|" + r.str();
    if (!visited_.insert(key).second) return;
    const Procedure &proc = prog_.proc(d);

    // Aliases of the routing value.
    for (bool changed = true; changed;) {
      changed = false;
      for (StmtIndex s : proc.statements) {
        const Statement &st = prog_.stmt(s);
        if (!in_region(region, s) || !st.target || st.target->is_literal()) continue;
        if (st.kind != StmtKind::assign && st.kind != StmtKind::field_load) continue;
        bool from_routing = false, other = false;
        for (const auto &v : st.sources) {
          if (v.is_literal()) continue;
          if (contains_location(routing, v)) from_routing = true;
          else other = true;
        }
        if (from_routing && !other && !contains_location(routing, *st.target)) {
          routing.push_back(*st.target);
          changed = true;
        }
      }
    }

    for (StmtIndex s : proc.statements) {
      const Statement &st = prog_.stmt(s);
      if (!in_region(region, s)) continue;
      if (st.kind == StmtKind::branch) branch_fact(d, s, routing, site);
      if (st.kind == StmtKind::call && st.call) {
        // Routing forwarded into a helper.
        Resolution callee;
        bool resolved = false;
        for (std::size_t i = 0; i < st.call->args.size(); ++i) {
          if (!contains_location(routing, st.call->args[i])) continue;
          if (!resolved) {
            callee = resolve_call(prog_, s);
            resolved = true;
          }
          for (ProcIndex q : callee.procs) {
            const Procedure &qp = prog_.proc(q);
            std::size_t offset = qp.has_receiver && st.call->form == CalleeForm::member ? 1 : 0;
            if (i + offset < qp.params.size())
              analyze(q, {ValueRef::param(qp.params[i + offset].name)}, nullptr, site, depth + 1);
          }
        }
      }
    }
    registry_sites(d, routing, site, depth > 0, region);
  }

  void branch_fact(ProcIndex d, StmtIndex s, const std::vector<ValueRef> &routing, const std::string &site) {
    const Statement &st = prog_.stmt(s);
    const Condition &c = st.condition;
    if (!c.subject || !contains_location(routing, *c.subject) || c.literals.empty()) return;
    int arm;
    if (c.form == ConditionForm::equality || c.form == ConditionForm::membership) arm = c.negated ? 1 : 0;
    else if (c.form == ConditionForm::inequality) arm = c.negated ? 0 : 1;
    else return;
    if (st.arms.size() < 2 || st.arms[arm].empty()) return;
    std::string vid;
    if (st.branch_form == BranchForm::switch_case) vid = "js.branch.switch";
    else if (st.branch_form == BranchForm::match_case) vid = "py.branch.match";
    else if (c.form == ConditionForm::membership && c.literals.size() > 1) vid = "any.branch.membership";
    else if (st.branch_form == BranchForm::if_chain) vid = "any.branch.elif";
    else vid = "any.branch.equality";
    if (!variant(vid, lang_of(d))) return;
    BranchScope scope;
    scope.id = st.id + (arm ? ":else" : ":then");
    scope.procedure = d;
    scope.statements = arm_closure(prog_, st.arms[arm]);
    scope.branch = s;
    scope.arm = arm;
    auto handler = forwarded_handler(d, scope.statements);
    for (const auto &lit : c.literals) {
      DispatchFact f;
      f.tool = lit;
      f.site = site;
      f.handler = handler.value_or(d);
      f.scope = scope;
      f.witness = make_witness(prog_, vid, st.location);
      f.family = DispatchFamily::branch;
      f.confidence = Confidence::exact;
      f.routing = routing;
      facts_.push_back(std::move(f));
    }
  }

  /// Helper the branch forwards to: a first-party callee whose result is
  /// returned, else the first first-party callee.
  std::optional<ProcIndex> forwarded_handler(ProcIndex d, const std::set<StmtIndex> &scope) {
    std::optional<ProcIndex> first, returned;
    std::set<std::string> returned_values;
    for (StmtIndex s : prog_.proc(d).statements)
      if (scope.count(s) && prog_.stmt(s).kind == StmtKind::ret)
        for (const auto &v : prog_.stmt(s).sources) returned_values.insert(v.str());
    for (StmtIndex s : prog_.proc(d).statements) {
      if (!scope.count(s)) continue;
      const Statement &st = prog_.stmt(s);
      if (st.kind != StmtKind::call || !st.call || st.call->callee == "<callback>") continue;
      Resolution r = resolve_call(prog_, s);
      std::optional<ProcIndex> pick;
      for (ProcIndex q : r.procs)
        if (!prog_.proc(q).is_lambda) {
          pick = q;
          break;
        }
      if (!pick) continue;
      if (!first) first = pick;
      if (!returned && st.target && returned_values.count(st.target->str())) returned = pick;
    }
    return returned ? returned : first;
  }

  // -- registries --

  void entries_of(ProcIndex scope, const ValueRef &table, int depth, std::vector<RegistryEntry> &out) {
    if (depth > kDefaultResolveDepth || table.is_literal()) return;
    std::vector<ProcIndex> procs;
    for (std::optional<ProcIndex> cur = scope; cur; cur = prog_.proc(*cur).parent) procs.push_back(*cur);
    if (table.base == "this" || table.base == "self") {
      std::string cls;
      for (std::optional<ProcIndex> cur = scope; cur && cls.empty(); cur = prog_.proc(*cur).parent)
        cls = prog_.proc(*cur).class_name;
      for (ProcIndex p = 0; p < prog_.procedures.size() && !cls.empty(); ++p)
        if (prog_.proc(p).class_name == cls && prog_.proc(p).unit == prog_.proc(scope).unit &&
            std::find(procs.begin(), procs.end(), p) == procs.end())
          procs.push_back(p);
    }
    std::size_t before = out.size();
    for (ProcIndex p : procs) {
      for (StmtIndex s : prog_.proc(p).statements) {
        const Statement &st = prog_.stmt(s);
        if (st.procedure != p) continue;
        if (st.target && st.target->same_location(table)) {
          if (st.kind == StmtKind::assemble) {
            for (std::size_t i = 0; i < st.sources.size() && i < st.keys.size(); ++i) {
              const std::string &k = st.keys[i];
              if (k == "...") entries_of(p, st.sources[i], depth + 1, out);
              else if (!k.empty() && k != kElementField) out.push_back({k, st.sources[i], p, "any.registry.literal"});
            }
          } else if ((st.kind == StmtKind::assign || st.kind == StmtKind::field_load) && st.sources.size() == 1) {
            entries_of(p, st.sources[0], depth + 1, out);
          } else if (st.kind == StmtKind::call && st.call) {
            map_constructor(p, *st.call, out);
            Resolution r = resolve_call(prog_, s);
            for (ProcIndex q : r.procs)
              for (StmtIndex rs : prog_.proc(q).statements)
                if (prog_.stmt(rs).kind == StmtKind::ret && prog_.stmt(rs).procedure == q &&
                    !prog_.stmt(rs).sources.empty())
                  entries_of(q, prog_.stmt(rs).sources[0], depth + 1, out);
          }
        }
        if (st.kind == StmtKind::field_store && st.target && st.sources.size() == 1 &&
            st.target->base == table.base && st.target->fields.size() == table.fields.size() + 1 &&
            std::equal(table.fields.begin(), table.fields.end(), st.target->fields.begin()) &&
            st.target->fields.back() != kElementField)
          out.push_back({st.target->fields.back(), st.sources[0], p, "any.registry.indexed"});
        if (st.kind == StmtKind::call && st.call) {
          const CallSite &cs = *st.call;
          std::string m = cs.method_name();
          if (cs.object && cs.object->same_location(table) && !cs.args.empty()) {
            if (m == "update") {
              std::vector<RegistryEntry> tmp;
              entries_of_object(p, cs.args[0], depth + 1, tmp);
              for (auto &e : tmp) out.push_back({e.key, e.value, e.scope, "any.registry.update"});
            } else if ((m == "set" || m == "setdefault") && cs.args.size() >= 2) {
              if (auto k = string_value(prog_, p, cs.args[0]))
                out.push_back({*k, cs.args[1], p, "any.registry.update"});
            }
          } else if (cs.callee == "Object.assign" && cs.args.size() >= 2 && cs.args[0].same_location(table)) {
            for (std::size_t i = 1; i < cs.args.size(); ++i) {
              std::vector<RegistryEntry> tmp;
              entries_of_object(p, cs.args[i], depth + 1, tmp);
              for (auto &e : tmp) out.push_back({e.key, e.value, e.scope, "any.registry.update"});
            }
          }
        }
      }
      if (out.size() > before) break; // innermost defining scope wins
    }
    if (out.size() == before && table.fields.empty()) {
      UnitIndex unit = prog_.proc(scope).unit;
      if (const ImportBinding *b = find_import(prog_, unit, table.base))
        if (b->target && !b->namespace_import && prog_.units[*b->target].module_procedure)
          entries_of(*prog_.units[*b->target].module_procedure, ValueRef::local(b->imported), depth + 1, out);
    }
  }

  void entries_of_object(ProcIndex scope, const ValueRef &v, int depth, std::vector<RegistryEntry> &out) {
    if (const Statement *obj = object_literal(prog_, scope, v)) {
      for (std::size_t i = 0; i < obj->sources.size() && i < obj->keys.size(); ++i)
        if (!obj->keys[i].empty() && obj->keys[i] != "..." && obj->keys[i] != kElementField)
          out.push_back({obj->keys[i], obj->sources[i], obj->procedure, "any.registry.literal"});
      return;
    }
    entries_of(scope, v, depth, out);
  }

  /// `new Map([["a", fa], ...])`
  void map_constructor(ProcIndex scope, const CallSite &cs, std::vector<RegistryEntry> &out) {
    if (cs.method_name() != "Map" || cs.args.empty()) return;
    const Statement *outer = object_literal(prog_, scope, cs.args[0]);
    if (!outer) return;
    for (const auto &pair : outer->sources) {
      const Statement *inner = object_literal(prog_, outer->procedure, pair);
      if (!inner || inner->sources.size() != 2) continue;
      if (auto k = string_value(prog_, inner->procedure, inner->sources[0]))
        out.push_back({*k, inner->sources[1], inner->procedure, "any.registry.literal"});
    }
  }

  void registry_sites(ProcIndex d, const std::vector<ValueRef> &routing, const std::string &site,
                      bool helper, const std::set<StmtIndex> *region) {
    bool routed = !routing.empty();
    for (StmtIndex s : prog_.proc(d).statements) {
      if (!in_region(region, s)) continue;
      const Statement &st = prog_.stmt(s);
      std::optional<ValueRef> table;
      std::string access;
      if (st.kind == StmtKind::call && st.call) {
        const CallSite &cs = *st.call;
        if (cs.form == CalleeForm::computed && cs.callee_value && !cs.callee_value->fields.empty() &&
            cs.callee_value->fields.back() == kElementField) {
          if (cs.callee_key && template_of(prog_, d, *cs.callee_key)) continue; // reflective
          table = *cs.callee_value;
          table->fields.pop_back();
          access = "index";
        } else if (cs.form == CalleeForm::member && cs.object && !cs.object->fields.empty() &&
                   cs.object->fields.back() == kElementField &&
                   std::find(kHandlerFields.begin(), kHandlerFields.end(), cs.method_name()) != kHandlerFields.end()) {
          table = *cs.object;
          table->fields.pop_back();
          access = "tool_object";
        } else if (cs.form == CalleeForm::member && cs.object && cs.method_name() == "get" && !cs.args.empty() &&
                   !cs.args[0].is_string_literal() && (routed || !cs.args[0].is_literal())) {
          table = *cs.object;
          access = "get";
        }
      } else if (routed && st.kind == StmtKind::field_load && !st.sources.empty() &&
                 !st.sources[0].fields.empty() && st.sources[0].fields.back() == kElementField) {
        table = st.sources[0];
        table->fields.pop_back();
        access = "index";
      }
      if (!table || table->is_literal()) continue;
      if (table->base == "this" || table->base == "self") {
        if (table->fields.empty()) continue; // reflective index on the receiver
      }
      std::vector<RegistryEntry> entries;
      entries_of(d, *table, 0, entries);
      if (entries.empty()) continue;
      std::size_t resolved = 0;
      std::vector<DispatchFact> found;
      for (const auto &e : entries) {
        std::string vid = e.variant;
        if (access == "tool_object") vid = "any.registry.tool_object";
        else if (access == "get") vid = helper ? "any.registry.getter" : "any.registry.get";
        else if (helper) vid = "any.registry.getter";
        if (!variant(vid, lang_of(d))) continue;
        Resolution h = resolve_handler(prog_, e.scope, e.value);
        DispatchFact f;
        f.tool = e.key;
        f.site = site.empty() ? st.id : site;
        if (h.resolved()) {
          f.handler = h.procs.front();
          ++resolved;
        } else {
          f.unresolved_reason = h.reason.empty() ? "registry entry unresolved" : h.reason;
        }
        f.witness = make_witness(prog_, vid, st.location);
        f.family = DispatchFamily::registry;
        f.confidence = Confidence::heuristic;
        f.routing = routing;
        found.push_back(std::move(f));
      }
      // A table none of whose entries is callable is data, not a registry.
      if (resolved == 0) continue;
      for (auto &f : found) facts_.push_back(std::move(f));
    }
  }

  // -- reflective --

  void reflective_sites(ProcIndex d) {
    for (StmtIndex s : prog_.proc(d).statements) {
      const Statement &st = prog_.stmt(s);
      if (st.kind != StmtKind::call || !st.call) continue;
      const CallSite &cs = *st.call;
      std::optional<ValueRef> obj;
      std::optional<std::string> pattern;
      std::string vid;
      if (cs.form == CalleeForm::name && cs.callee == "getattr" && cs.args.size() >= 2) {
        obj = cs.args[0];
        pattern = template_of(prog_, d, cs.args[1]);
        vid = "py.reflective.getattr";
      } else if (cs.form == CalleeForm::computed && cs.callee_key && cs.callee_value &&
                 !cs.callee_value->fields.empty() && cs.callee_value->fields.back() == kElementField) {
        pattern = template_of(prog_, d, *cs.callee_key);
        obj = *cs.callee_value;
        obj->fields.pop_back();
        vid = "js.reflective.index";
      }
      if (!obj || !pattern || !variant(vid, lang_of(d))) continue;
      auto cls = resolve_class(prog_, d, *obj, kDefaultResolveDepth);
      std::size_t n = 0;
      if (cls) {
        const auto &methods = prog_.units[cls->first].classes.at(cls->second);
        for (const auto &[name, proc] : methods) {
          std::string tool;
          if (!template_matches(*pattern, name, &tool)) continue;
          DispatchFact f;
          f.tool = tool;
          f.site = st.id;
          f.handler = proc;
          f.witness = make_witness(prog_, vid, st.location);
          f.family = DispatchFamily::reflective;
          f.confidence = Confidence::heuristic;
          facts_.push_back(std::move(f));
          ++n;
        }
      }
      if (n == 0 && gaps_)
        gaps_->push_back({"*", "reflective dispatch with no statically known target for template '" + *pattern + "'",
                          st.location});
    }
  }

  const Program &prog_;
  const PatternCatalog &cat_;
  const std::set<std::string> &published_;
  std::vector<EntrypointGap> *gaps_;
  std::vector<DispatchFact> facts_;
  std::set<std::string> visited_;
};

std::string entrypoint_id(const Program &prog, const std::string &tool, ProcIndex handler,
                          const std::optional<BranchScope> &scope) {
  const Procedure &h = prog.proc(handler);
  return stable_id(h.location.path, h.location.begin, h.location.end,
                   "entrypoint:" + tool + ":" + h.id + ":" + (scope ? scope->id : "top"));
}

} // namespace

Resolution resolve_handler(const Program &program, ProcIndex scope, const ValueRef &reference,
                           int depth_limit) {
  Resolution r = resolve_value(program, scope, reference, depth_limit);
  if (r.resolved() || r.reason == "depth-exceeded") return r;
  // A tool object: follow its handler field.
  if (object_literal(program, scope, reference)) {
    for (const auto &f : kHandlerFields) {
      Resolution h = resolve_value(program, scope, reference.with_field(f), depth_limit);
      if (h.resolved()) return h;
    }
  }
  return r;
}

std::vector<PublicationFact> collect_publication_facts(const Program &program,
                                                       const PatternCatalog &catalog) {
  return PublicationCollector(program, catalog).run();
}

std::vector<DispatchFact> collect_dispatch_facts(const Program &program, const PatternCatalog &catalog,
                                                 std::vector<EntrypointGap> *gaps) {
  std::set<std::string> published;
  for (const auto &p : collect_publication_facts(program, catalog)) published.insert(p.tool);
  return DispatchCollector(program, catalog, published, gaps).run();
}

Specialization specialize_entrypoints(const Program &program,
                                      const std::vector<PublicationFact> &publications,
                                      const std::vector<DispatchFact> &dispatches) {
  Specialization out;
  std::map<std::string, std::vector<const PublicationFact *>> by_tool_p;
  std::map<std::string, std::vector<const DispatchFact *>> by_tool_d;
  for (const auto &p : publications) by_tool_p[p.tool].push_back(&p);
  for (const auto &d : dispatches) by_tool_d[d.tool].push_back(&d);
  std::set<std::string> tools;
  for (const auto &[t, _] : by_tool_p) tools.insert(t);
  for (const auto &[t, _] : by_tool_d) tools.insert(t);

  // Union of tool scopes per dispatcher procedure, for exclusion.
  std::map<ProcIndex, std::map<std::string, std::set<StmtIndex>>> scopes_by_proc;
  for (const auto &d : dispatches)
    if (d.scope) scopes_by_proc[d.scope->procedure][d.scope->id] = d.scope->statements;

  for (const auto &t : tools) {
    auto &ds = by_tool_d[t];
    auto &ps = by_tool_p[t];
    std::set<std::string> made;
    bool any = false;
    for (const DispatchFact *d : ds) {
      if (!d->handler) {
        out.gaps.push_back({t, "dispatch handler unresolved: " + d->unresolved_reason, d->witness.location});
        continue;
      }
      Entrypoint e;
      e.tool = t;
      e.handler = *d->handler;
      e.scope = d->scope;
      e.provenance = Provenance::from_dispatch;
      e.variant = d->witness.variant;
      e.family = d->family;
      e.assumed = d->family == DispatchFamily::reflective;
      e.routing = d->routing;
      e.id = entrypoint_id(program, t, e.handler, e.scope);
      if (!made.insert(e.id).second) continue;
      if (d->scope) {
        for (const auto &[sid, stmts] : scopes_by_proc[d->scope->procedure]) {
          if (sid == d->scope->id) continue;
          for (StmtIndex s : stmts)
            if (!d->scope->statements.count(s)) e.excluded.insert(s);
        }
      }
      for (const PublicationFact *p : ps) {
        if (p->schema && !e.schema) e.schema = p->schema;
        if (p->handler && *p->handler != e.handler)
          e.secondary_witnesses.push_back(p->witness.variant + "@" + program.proc(*p->handler).name);
      }
      out.entrypoints.push_back(std::move(e));
      any = true;
    }
    if (any) continue;
    for (const PublicationFact *p : ps) {
      if (!p->handler) continue;
      Entrypoint e;
      e.tool = t;
      e.handler = *p->handler;
      e.provenance = Provenance::from_publication_fallback;
      e.variant = p->witness.variant;
      e.schema = p->schema;
      e.id = entrypoint_id(program, t, e.handler, std::nullopt);
      if (!made.insert(e.id).second) continue;
      out.entrypoints.push_back(std::move(e));
      any = true;
    }
    if (!any && ds.empty()) {
      const PublicationFact *p = ps.empty() ? nullptr : ps.front();
      out.gaps.push_back({t, "publication without resolvable handler or dispatch" +
                                 (p && !p->unresolved_reason.empty() ? ": " + p->unresolved_reason : std::string()),
                          p ? p->witness.location : SourceLocation{}});
    }
  }
  std::sort(out.entrypoints.begin(), out.entrypoints.end(), [](const Entrypoint &a, const Entrypoint &b) {
    return std::tie(a.tool, a.id) < std::tie(b.tool, b.id);
  });
  return out;
}

Specialization recover_entrypoints(const Program &program, const PatternCatalog &catalog) {
  auto pubs = collect_publication_facts(program, catalog);
  std::vector<EntrypointGap> gaps;
  std::set<std::string> published;
  for (const auto &p : pubs) published.insert(p.tool);
  auto disp = DispatchCollector(program, catalog, published, &gaps).run();
  Specialization s = specialize_entrypoints(program, pubs, disp);
  s.gaps.insert(s.gaps.begin(), gaps.begin(), gaps.end());
  return s;
}

} // namespace mcpflow
