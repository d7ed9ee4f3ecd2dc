#include "mcpflow/resolve.hpp"

#include <algorithm>
#include <set>

namespace mcpflow {

namespace {

bool is_receiver_name(const std::string &n) { return n == "this" || n == "self" || n == "cls"; }

/// Enclosing class name of a procedure (methods and lambdas nested in them).
std::string class_of(const Program &prog, ProcIndex p) {
  std::optional<ProcIndex> cur = p;
  while (cur) {
    const Procedure &proc = prog.proc(*cur);
    if (!proc.class_name.empty()) return proc.class_name;
    cur = proc.parent;
  }
  return {};
}

void merge(Resolution &into, const Resolution &r) {
  for (ProcIndex p : r.procs)
    if (std::find(into.procs.begin(), into.procs.end(), p) == into.procs.end()) into.procs.push_back(p);
  if (into.reason.empty() || r.reason == "depth-exceeded") into.reason = r.reason;
  if (r.external) into.external = true;
  if (into.external_name.empty()) into.external_name = r.external_name;
}

Resolution exact(ProcIndex p) {
  Resolution r;
  r.procs = {p};
  r.confidence = Confidence::exact;
  return r;
}

Resolution failed(std::string reason) {
  Resolution r;
  r.reason = std::move(reason);
  return r;
}

class Resolver {
public:
  Resolver(const Program &prog, int limit) : prog_(prog), limit_(limit) {}

  Resolution value(ProcIndex scope, const ValueRef &v, int depth) {
    if (depth > limit_) return failed("depth-exceeded");
    if (v.function) return exact(*v.function);
    if (v.is_literal()) return failed("literal");
    if (!v.fields.empty()) {
      ValueRef obj = v;
      std::string field = obj.fields.back();
      obj.fields.pop_back();
      if (obj.fields.empty() && obj.kind == ValueKind::field_path) obj.kind = ValueKind::local;
      return member(scope, obj, field, depth);
    }
    const std::string &name = v.base;
    UnitIndex unit = prog_.proc(scope).unit;
    auto defs = definitions_of(prog_, scope, name);
    if (!defs.empty()) {
      Resolution out;
      bool all_exact = true;
      for (StmtIndex d : defs) {
        Resolution r = through_definition(d, depth + 1);
        if (r.resolved() && r.confidence != Confidence::exact) all_exact = false;
        merge(out, r);
      }
      if (out.resolved()) {
        out.confidence = all_exact && out.procs.size() == 1 ? Confidence::exact : Confidence::heuristic;
        out.reason.clear();
        return out;
      }
      if (out.reason == "depth-exceeded") return out;
    }
    const SourceUnit &u = prog_.units[unit];
    if (auto it = u.definitions.find(name); it != u.definitions.end()) return exact(it->second);
    if (auto it = u.classes.find(name); it != u.classes.end()) return constructor(it->second);
    if (const ImportBinding *b = find_import(prog_, unit, name)) return imported(*b, depth);
    // A parameter of the enclosing procedure: a callable supplied at runtime.
    for (std::optional<ProcIndex> cur = scope; cur; cur = prog_.proc(*cur).parent)
      for (const auto &p : prog_.proc(*cur).params)
        if (p.name == name) return failed("parameter");
    Resolution r = failed("not-found");
    r.external = true;
    r.external_name = name;
    return r;
  }

  Resolution member(ProcIndex scope, const ValueRef &obj, const std::string &field, int depth) {
    if (depth > limit_) return failed("depth-exceeded");
    if (obj.is_literal()) return failed("literal");
    UnitIndex unit = prog_.proc(scope).unit;
    Resolution out;
    if (obj.fields.empty()) {
      if (is_receiver_name(obj.base)) {
        std::string cls = class_of(prog_, scope);
        if (!cls.empty()) {
          if (auto r = method(unit, cls, field)) return *r;
        }
      }
      const SourceUnit &u = prog_.units[unit];
      if (auto it = u.classes.find(obj.base); it != u.classes.end() &&
                                              definitions_of(prog_, scope, obj.base).empty()) {
        if (auto r = method(unit, obj.base, field)) return *r;
      }
      if (const ImportBinding *b = find_import(prog_, unit, obj.base)) {
        if (b->target) {
          const SourceUnit &t = prog_.units[*b->target];
          if (b->namespace_import || b->imported.empty()) {
            if (auto it = t.definitions.find(field); it != t.definitions.end()) return exact(it->second);
            if (t.module_procedure) {
              Resolution r = value(*t.module_procedure, ValueRef::local(field), depth + 1);
              if (r.resolved()) return r;
            }
          } else if (t.classes.count(b->imported)) {
            if (auto r = method(*b->target, b->imported, field)) return *r;
          } else if (t.module_procedure) {
            Resolution r = member(*t.module_procedure, ValueRef::local(b->imported), field, depth + 1);
            if (r.resolved()) return r;
          }
        } else {
          Resolution r = failed("external");
          r.external = true;
          r.confidence = Confidence::exact;
          r.external_name = qualify_name(prog_, scope, obj.str() + "." + field);
          return r;
        }
      }
    }
    // Field stores `obj.field = f` / `obj[k] = f`.
    for (ProcIndex p : search_procs(scope, obj)) {
      for (StmtIndex s : prog_.proc(p).statements) {
        const Statement &st = prog_.stmt(s);
        if (st.kind != StmtKind::field_store || !st.target || st.sources.size() != 1) continue;
        const ValueRef &t = *st.target;
        if (t.base != obj.base || t.fields.size() != obj.fields.size() + 1) continue;
        if (!std::equal(obj.fields.begin(), obj.fields.end(), t.fields.begin())) continue;
        if (field != kElementField && t.fields.back() != field) continue;
        Resolution r = value(p, st.sources[0], depth + 1);
        if (r.resolved() && field == kElementField) r.confidence = Confidence::heuristic;
        merge(out, r);
      }
    }
    // Definitions of the object itself.
    for (StmtIndex d : object_definitions(scope, obj)) {
      const Statement &st = prog_.stmt(d);
      if (st.kind == StmtKind::assemble) {
        for (std::size_t i = 0; i < st.sources.size(); ++i) {
          const std::string &key = i < st.keys.size() ? st.keys[i] : "";
          if (key == "...") {
            merge(out, member(st.procedure, st.sources[i], field, depth + 1));
            continue;
          }
          if (field != kElementField && key != field) continue;
          Resolution r = value(st.procedure, st.sources[i], depth + 1);
          if (r.resolved() && field == kElementField) r.confidence = Confidence::heuristic;
          merge(out, r);
        }
      } else if ((st.kind == StmtKind::assign || st.kind == StmtKind::field_load ||
                  st.kind == StmtKind::field_store) &&
                 st.sources.size() == 1) {
        merge(out, member(st.procedure, st.sources[0], field, depth + 1));
      } else if (st.kind == StmtKind::call && st.call) {
        if (auto cls = constructed_class(st, depth)) {
          if (auto r = method(cls->first, cls->second, field)) {
            Resolution h = *r;
            merge(out, h);
          }
        }
      }
    }
    // Registry updates: obj.update({...}), obj.set(k, f), Object.assign(obj, {...}).
    for (ProcIndex p : search_procs(scope, obj)) {
      for (StmtIndex s : prog_.proc(p).statements) {
        const Statement &st = prog_.stmt(s);
        if (st.kind != StmtKind::call || !st.call) continue;
        const CallSite &cs = *st.call;
        std::string m = cs.method_name();
        if (cs.object && cs.object->same_location(obj) && !cs.args.empty()) {
          if (m == "update" || m == "extend") {
            merge(out, member(p, cs.args[0], field, depth + 1));
          } else if ((m == "set" || m == "setdefault") && cs.args.size() >= 2) {
            bool key_ok = field == kElementField || !cs.args[0].is_string_literal() ||
                          cs.args[0].literal == field;
            if (key_ok) merge(out, value(p, cs.args[1], depth + 1));
          }
        } else if (cs.callee == "Object.assign" && cs.args.size() >= 2 &&
                   cs.args[0].same_location(obj)) {
          for (std::size_t i = 1; i < cs.args.size(); ++i) merge(out, member(p, cs.args[i], field, depth + 1));
        }
      }
    }
    if (out.resolved()) {
      if (field == kElementField || out.procs.size() > 1) out.confidence = Confidence::heuristic;
      else if (out.confidence == Confidence::unresolved) out.confidence = Confidence::exact;
      out.reason.clear();
      return out;
    }
    if (out.reason.empty()) out.reason = "not-found";
    return out;
  }

  /// Resolution through one definition of a name.
  Resolution through_definition(StmtIndex d, int depth) {
    if (depth > limit_) return failed("depth-exceeded");
    const Statement &st = prog_.stmt(d);
    if ((st.kind == StmtKind::assign || st.kind == StmtKind::field_load) && st.sources.size() == 1)
      return value(st.procedure, st.sources[0], depth);
    if (st.kind == StmtKind::call && st.call) return through_call(d, depth);
    return failed("not-callable");
  }

  /// The callable produced by a call: forwarding wrappers, registry lookups
  /// (`table.get(name)`), and reflective `getattr(obj, template)`.
  Resolution through_call(StmtIndex d, int depth) {
    if (depth > limit_) return failed("depth-exceeded");
    const Statement &st = prog_.stmt(d);
    const CallSite &cs = *st.call;
    std::string m = cs.method_name();
    if (cs.form == CalleeForm::member && cs.object && (m == "get" || m == "__getitem__") &&
        !cs.args.empty()) {
      std::string key = cs.args[0].is_string_literal() ? cs.args[0].literal : kElementField;
      Resolution r = member(st.procedure, *cs.object, key, depth);
      if (r.resolved()) r.confidence = Confidence::heuristic;
      return r;
    }
    if (cs.form == CalleeForm::name && cs.callee == "getattr" && cs.args.size() >= 2) {
      return reflective(st.procedure, cs.args[0], cs.args[1], depth);
    }
    Resolution callee = call_target(d, depth);
    if (!callee.resolved()) return failed(callee.reason == "depth-exceeded" ? callee.reason : "dynamic");
    Resolution out;
    for (ProcIndex w : callee.procs) {
      const Procedure &wp = prog_.proc(w);
      std::size_t offset = wp.has_receiver && cs.form == CalleeForm::member ? 1 : 0;
      for (StmtIndex s : wp.statements) {
        const Statement &r = prog_.stmt(s);
        if (r.kind != StmtKind::ret || r.procedure != w || r.sources.empty()) continue;
        const ValueRef &rv = r.sources[0];
        if (rv.function) {
          // A returned closure that forwards to one of the wrapper's params
          // denotes the wrapped callable.
          auto fwd = forwarded_param(*rv.function, wp);
          if (fwd && *fwd >= offset && *fwd - offset < cs.args.size())
            merge(out, value(st.procedure, cs.args[*fwd - offset], depth + 1));
          else
            merge(out, exact(*rv.function));
          continue;
        }
        if (rv.fields.empty() && !rv.is_literal()) {
          auto idx = param_index(wp, rv.base);
          if (idx && *idx >= offset && *idx - offset < cs.args.size()) {
            merge(out, value(st.procedure, cs.args[*idx - offset], depth + 1));
            continue;
          }
          merge(out, value(w, rv, depth + 1));
        }
      }
    }
    if (out.resolved()) {
      out.confidence = callee.confidence == Confidence::exact && out.procs.size() == 1
                           ? Confidence::exact
                           : Confidence::heuristic;
      out.reason.clear();
    }
    return out;
  }

  Resolution reflective(ProcIndex scope, const ValueRef &obj, const ValueRef &name, int depth) {
    UnitIndex unit = prog_.proc(scope).unit;
    std::string cls;
    if (obj.fields.empty() && is_receiver_name(obj.base)) cls = class_of(prog_, scope);
    if (cls.empty()) {
      if (auto c = resolve_class(prog_, scope, obj, limit_ - depth)) cls = c->second;
    }
    if (cls.empty()) return failed("dynamic");
    auto it = prog_.units[unit].classes.find(cls);
    if (it == prog_.units[unit].classes.end()) return failed("dynamic");
    if (name.is_string_literal()) {
      if (auto m = it->second.find(name.literal); m != it->second.end()) return exact(m->second);
      return failed("not-found");
    }
    auto pattern = name_template(scope, name);
    if (!pattern) return failed("dynamic");
    Resolution out;
    for (const auto &[mname, p] : it->second)
      if (template_matches(*pattern, mname)) out.procs.push_back(p);
    if (out.resolved()) out.confidence = Confidence::heuristic;
    else out.reason = "dynamic";
    return out;
  }

  Resolution call_target(StmtIndex site, int depth) {
    const Statement &st = prog_.stmt(site);
    const CallSite &cs = *st.call;
    switch (cs.form) {
    case CalleeForm::name:
      return value(st.procedure, ValueRef::local(cs.callee), depth);
    case CalleeForm::member: {
      if (!cs.object) return failed("dynamic");
      Resolution r = member(st.procedure, *cs.object, cs.method_name(), depth);
      if (!r.resolved() && r.reason != "depth-exceeded") {
        r.external = !receiver_is_first_party(st.procedure, *cs.object);
        if (r.external_name.empty()) r.external_name = qualify_name(prog_, st.procedure, cs.callee);
      }
      return r;
    }
    case CalleeForm::computed:
      if (!cs.callee_value) return failed("dynamic");
      return value(st.procedure, *cs.callee_value, depth);
    }
    return failed("dynamic");
  }

  std::optional<std::pair<UnitIndex, std::string>> constructed_class(const Statement &st, int depth) {
    const CallSite &cs = *st.call;
    if (cs.form == CalleeForm::computed) return std::nullopt;
    std::string name = cs.callee;
    UnitIndex unit = prog_.proc(st.procedure).unit;
    if (cs.form == CalleeForm::name) {
      if (prog_.units[unit].classes.count(name) && definitions_of(prog_, st.procedure, name).empty())
        return std::make_pair(unit, name);
      if (const ImportBinding *b = find_import(prog_, unit, name)) {
        if (b->target && prog_.units[*b->target].classes.count(b->imported))
          return std::make_pair(*b->target, b->imported);
      }
      return std::nullopt;
    }
    // ns.Class(...)
    if (cs.object && cs.object->fields.empty()) {
      if (const ImportBinding *b = find_import(prog_, unit, cs.object->base)) {
        std::string m = cs.method_name();
        if (b->target && prog_.units[*b->target].classes.count(m)) return std::make_pair(*b->target, m);
      }
    }
    (void)depth;
    return std::nullopt;
  }

private:
  std::optional<Resolution> method(UnitIndex unit, const std::string &cls, const std::string &field) {
    auto it = prog_.units[unit].classes.find(cls);
    if (it == prog_.units[unit].classes.end()) return std::nullopt;
    if (auto m = it->second.find(field); m != it->second.end()) return exact(m->second);
    return std::nullopt;
  }

  Resolution constructor(const std::map<std::string, ProcIndex> &methods) {
    for (const char *n : {"constructor", "__init__"})
      if (auto it = methods.find(n); it != methods.end()) return exact(it->second);
    return failed("class");
  }

  Resolution imported(const ImportBinding &b, int depth) {
    if (!b.target) {
      Resolution r = failed("external");
      r.external = true;
      r.confidence = Confidence::exact;
      r.external_name = b.imported.empty() || b.imported == "default" || b.namespace_import
                            ? b.module
                            : b.module + "." + b.imported;
      return r;
    }
    const SourceUnit &t = prog_.units[*b.target];
    if (b.namespace_import) return failed("namespace");
    std::string name = b.imported.empty() ? "default" : b.imported;
    if (auto it = t.definitions.find(name); it != t.definitions.end()) return exact(it->second);
    if (auto it = t.classes.find(name); it != t.classes.end()) return constructor(it->second);
    if (t.module_procedure) return value(*t.module_procedure, ValueRef::local(name), depth + 1);
    return failed("not-found");
  }

  std::vector<ProcIndex> search_procs(ProcIndex scope, const ValueRef &obj) {
    std::vector<ProcIndex> out;
    for (std::optional<ProcIndex> cur = scope; cur; cur = prog_.proc(*cur).parent) out.push_back(*cur);
    if (is_receiver_name(obj.base)) {
      std::string cls = class_of(prog_, scope);
      UnitIndex unit = prog_.proc(scope).unit;
      if (!cls.empty())
        for (ProcIndex p = 0; p < prog_.procedures.size(); ++p)
          if (prog_.proc(p).unit == unit && class_of(prog_, p) == cls &&
              std::find(out.begin(), out.end(), p) == out.end())
            out.push_back(p);
    }
    return out;
  }

  /// Statements defining the object location `obj` (exact path match).
  std::vector<StmtIndex> object_definitions(ProcIndex scope, const ValueRef &obj) {
    if (obj.fields.empty()) return definitions_of(prog_, scope, obj.base);
    std::vector<StmtIndex> out;
    for (ProcIndex p : search_procs(scope, obj))
      for (StmtIndex s : prog_.proc(p).statements) {
        const Statement &st = prog_.stmt(s);
        if (st.kind != StmtKind::branch && st.kind != StmtKind::ret && st.target &&
            st.target->same_location(obj))
          out.push_back(s);
      }
    return out;
  }

  bool receiver_is_first_party(ProcIndex scope, const ValueRef &obj) {
    if (obj.is_literal()) return false;
    if (is_receiver_name(obj.base) && !class_of(prog_, scope).empty()) return true;
    UnitIndex unit = prog_.proc(scope).unit;
    if (prog_.units[unit].classes.count(obj.base)) return true;
    if (const ImportBinding *b = find_import(prog_, unit, obj.base)) return b->target.has_value();
    return false;
  }

  static std::optional<std::size_t> param_index(const Procedure &p, const std::string &name) {
    for (std::size_t i = 0; i < p.params.size(); ++i)
      if (p.params[i].name == name) return i;
    return std::nullopt;
  }

  std::optional<std::size_t> forwarded_param(ProcIndex closure, const Procedure &wrapper) {
    for (StmtIndex s : prog_.proc(closure).statements) {
      const Statement &st = prog_.stmt(s);
      if (st.kind != StmtKind::call || !st.call || st.call->form != CalleeForm::name) continue;
      if (auto idx = param_index(wrapper, st.call->callee)) return idx;
    }
    return std::nullopt;
  }

  /// Name template with "{}" holes from a template-string definition.
  std::optional<std::string> name_template(ProcIndex scope, const ValueRef &v) {
    if (!v.fields.empty() || v.is_literal()) return std::nullopt;
    for (StmtIndex d : definitions_of(prog_, scope, v.base)) {
      const Statement &st = prog_.stmt(d);
      if (st.template_pattern) return st.template_pattern;
    }
    return std::nullopt;
  }

  static bool template_matches(const std::string &pattern, const std::string &name) {
    std::size_t hole = pattern.find("{}");
    if (hole == std::string::npos) return pattern == name;
    std::string prefix = pattern.substr(0, hole);
    std::string suffix = pattern.substr(hole + 2);
    if (suffix.find("{}") != std::string::npos) return false;
    return name.size() > prefix.size() + suffix.size() && name.rfind(prefix, 0) == 0 &&
           name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  }

  const Program &prog_;
  int limit_;
};

} // namespace

std::vector<StmtIndex> definitions_of(const Program &program, ProcIndex scope,
                                      const std::string &name) {
  std::vector<StmtIndex> out;
  for (std::optional<ProcIndex> cur = scope; cur; cur = program.proc(*cur).parent) {
    for (StmtIndex s : program.proc(*cur).statements) {
      const Statement &st = program.stmt(s);
      if (st.kind == StmtKind::branch || st.kind == StmtKind::ret || !st.target) continue;
      if (st.target->fields.empty() && st.target->base == name) out.push_back(s);
    }
    if (!out.empty()) return out;
    // Parameters shadow outer definitions.
    for (const auto &p : program.proc(*cur).params)
      if (p.name == name) return out;
  }
  return out;
}

const ImportBinding *find_import(const Program &program, UnitIndex unit, const std::string &local) {
  if (unit >= program.module_graph.imports.size()) return nullptr;
  for (const auto &b : program.module_graph.imports[unit])
    if (b.local == local) return &b;
  return nullptr;
}

Resolution resolve_value(const Program &program, ProcIndex scope, const ValueRef &value,
                         int depth_limit) {
  Resolver r(program, depth_limit);
  return r.value(scope, value, 0);
}

Resolution resolve_call(const Program &program, StmtIndex site, int depth_limit) {
  Resolver r(program, depth_limit);
  return r.call_target(site, 0);
}

std::optional<std::pair<UnitIndex, std::string>>
resolve_class(const Program &program, ProcIndex scope, const ValueRef &value, int depth_limit) {
  if (value.is_literal() || depth_limit < 0) return std::nullopt;
  UnitIndex unit = program.proc(scope).unit;
  if (value.fields.empty()) {
    if (is_receiver_name(value.base)) {
      std::string cls = class_of(program, scope);
      if (!cls.empty()) return std::make_pair(unit, cls);
    }
    if (program.units[unit].classes.count(value.base) &&
        definitions_of(program, scope, value.base).empty())
      return std::make_pair(unit, value.base);
  }
  Resolver r(program, depth_limit);
  std::vector<StmtIndex> defs = value.fields.empty() ? definitions_of(program, scope, value.base)
                                                     : std::vector<StmtIndex>{};
  for (StmtIndex d : defs) {
    const Statement &st = program.stmt(d);
    if (st.kind == StmtKind::call && st.call) {
      if (auto c = r.constructed_class(st, 0)) return c;
    } else if (st.kind == StmtKind::assign && st.sources.size() == 1) {
      if (auto c = resolve_class(program, st.procedure, st.sources[0], depth_limit - 1)) return c;
    }
  }
  return std::nullopt;
}

std::string qualify_name(const Program &program, ProcIndex scope, const std::string &dotted) {
  std::size_t dot = dotted.find('.');
  std::string head = dotted.substr(0, dot);
  std::string rest = dot == std::string::npos ? "" : dotted.substr(dot);
  ProcIndex cur_scope = scope;
  for (int hop = 0; hop < kDefaultResolveDepth; ++hop) {
    auto defs = definitions_of(program, cur_scope, head);
    if (defs.size() != 1) break;
    const Statement &st = program.stmt(defs[0]);
    if ((st.kind != StmtKind::assign && st.kind != StmtKind::field_load) || st.sources.size() != 1) break;
    const ValueRef &src = st.sources[0];
    if (src.is_literal() || src.base.empty() || src.base[0] == '$') break;
    // `const t = server.registerTool` aliases the dotted path.
    if (std::find(src.fields.begin(), src.fields.end(), kElementField) != src.fields.end()) break;
    std::string prefix;
    for (const auto &f : src.fields) prefix += "." + f;
    head = src.base;
    rest = prefix + rest;
    cur_scope = st.procedure;
  }
  UnitIndex unit = program.proc(cur_scope).unit;
  if (const ImportBinding *b = find_import(program, unit, head)) {
    std::string q = b->module;
    if (!b->namespace_import && !b->imported.empty() && b->imported != "default") q += "." + b->imported;
    return q + rest;
  }
  return head + rest;
}

CallGraph build_call_graph(const Program &program) {
  CallGraph g;
  for (ProcIndex p = 0; p < program.procedures.size(); ++p) g.nodes.push_back(p);
  for (ProcIndex p = 0; p < program.procedures.size(); ++p) {
    for (StmtIndex s : program.proc(p).statements) {
      const Statement &st = program.stmt(s);
      if (st.kind != StmtKind::call || !st.call) continue;
      Resolution r = resolve_call(program, s);
      if (r.resolved()) {
        for (ProcIndex callee : r.procs) {
          CallEdge e;
          e.site = s;
          e.caller = p;
          e.callee = callee;
          e.callee_name = program.proc(callee).name;
          e.confidence = r.confidence == Confidence::unresolved ? Confidence::heuristic : r.confidence;
          g.edges.push_back(e);
        }
      } else {
        CallEdge e;
        e.site = s;
        e.caller = p;
        e.callee_name = r.external_name.empty() ? st.call->callee : r.external_name;
        e.external = r.external;
        e.confidence = r.external && r.confidence == Confidence::exact ? Confidence::exact
                                                                        : Confidence::unresolved;
        g.edges.push_back(e);
      }
    }
  }
  return g;
}

} // namespace mcpflow
