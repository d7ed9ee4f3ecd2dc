#include "mcpflow/model.hpp"

#include <algorithm>
#include <sstream>

namespace mcpflow {

std::string to_string(Language lang) { return lang == Language::python ? "python" : "js_ts"; }

std::string to_string(const SourceLocation &loc) {
  std::ostringstream os;
  os << loc.path << ':' << loc.start_line << ':' << loc.start_col;
  return os.str();
}

std::string to_string(ValueKind kind) {
  switch (kind) {
  case ValueKind::param: return "param";
  case ValueKind::local: return "local";
  case ValueKind::field_path: return "field_path";
  case ValueKind::literal: return "literal";
  case ValueKind::call_result: return "call_result";
  }
  return "local";
}

std::string to_string(StmtKind kind) {
  switch (kind) {
  case StmtKind::assign: return "assign";
  case StmtKind::field_store: return "field_store";
  case StmtKind::field_load: return "field_load";
  case StmtKind::call: return "call";
  case StmtKind::ret: return "return";
  case StmtKind::branch: return "branch";
  case StmtKind::assemble: return "assemble";
  case StmtKind::exit: return "exit";
  }
  return "assign";
}

std::string to_string(Confidence c) {
  switch (c) {
  case Confidence::exact: return "exact";
  case Confidence::heuristic: return "heuristic";
  case Confidence::unresolved: return "unresolved";
  }
  return "unresolved";
}

bool ValueRef::is_string_literal() const {
  return kind == ValueKind::literal && !function && base == "str";
}

std::string ValueRef::str() const {
  if (kind == ValueKind::literal) {
    if (function) return "<function>";
    if (base == "str") return '"' + literal + '"';
    return literal;
  }
  std::string out = base;
  for (const auto &f : fields) out += '.' + f;
  return out;
}

ValueRef ValueRef::local(std::string name) {
  ValueRef v;
  v.kind = ValueKind::local;
  v.base = std::move(name);
  return v;
}

ValueRef ValueRef::param(std::string name) {
  ValueRef v;
  v.kind = ValueKind::param;
  v.base = std::move(name);
  return v;
}

ValueRef ValueRef::temp(std::string name, bool call_result) {
  ValueRef v;
  v.kind = call_result ? ValueKind::call_result : ValueKind::local;
  v.base = std::move(name);
  return v;
}

ValueRef ValueRef::string_literal(std::string value) {
  ValueRef v;
  v.kind = ValueKind::literal;
  v.base = "str";
  v.literal = std::move(value);
  return v;
}

ValueRef ValueRef::other_literal(std::string text) {
  ValueRef v;
  v.kind = ValueKind::literal;
  v.base = "lit";
  v.literal = std::move(text);
  return v;
}

ValueRef ValueRef::function_literal(ProcIndex proc) {
  ValueRef v;
  v.kind = ValueKind::literal;
  v.base = "fn";
  v.function = proc;
  return v;
}

ValueRef ValueRef::with_field(const std::string &field) const {
  ValueRef v = *this;
  if (v.kind == ValueKind::literal) return v;
  if (v.fields.size() < kFieldDepthLimit) v.fields.push_back(field);
  v.function.reset();
  v.kind = ValueKind::field_path;
  return v;
}

std::string Location::str() const {
  std::string out = base;
  for (const auto &f : fields) out += '.' + f;
  return out;
}

bool Location::is_prefix_of(const Location &other) const {
  if (base != other.base || fields.size() > other.fields.size()) return false;
  return std::equal(fields.begin(), fields.end(), other.fields.begin());
}

std::string CallSite::method_name() const {
  const std::string &name = qualified.empty() ? callee : qualified;
  auto dot = name.rfind('.');
  return dot == std::string::npos ? name : name.substr(dot + 1);
}

std::vector<StmtIndex> CFG::successors(StmtIndex node) const {
  std::vector<StmtIndex> out;
  for (const auto &[from, to] : edges)
    if (from == node) out.push_back(to);
  return out;
}

std::vector<const CallEdge *> CallGraph::edges_at(StmtIndex site) const {
  std::vector<const CallEdge *> out;
  for (const auto &e : edges)
    if (e.site == site) out.push_back(&e);
  return out;
}

std::vector<const CallEdge *> CallGraph::edges_from(ProcIndex caller) const {
  std::vector<const CallEdge *> out;
  for (const auto &e : edges)
    if (e.caller == caller) out.push_back(&e);
  return out;
}

std::optional<StmtIndex> Program::find_statement(const std::string &id) const {
  for (StmtIndex i = 0; i < statements.size(); ++i)
    if (statements[i].id == id) return i;
  return std::nullopt;
}

std::optional<ProcIndex> Program::find_procedure(const std::string &id) const {
  for (ProcIndex i = 0; i < procedures.size(); ++i)
    if (procedures[i].id == id) return i;
  return std::nullopt;
}

std::optional<ProcIndex> Program::find_procedure_by_name(const std::string &name) const {
  for (ProcIndex i = 0; i < procedures.size(); ++i)
    if (procedures[i].name == name) return i;
  return std::nullopt;
}

std::string Program::excerpt(const SourceLocation &loc) const {
  const SourceUnit *unit = unit_by_path(loc.path);
  if (!unit || loc.begin > loc.end || loc.end > unit->text.size()) return {};
  return unit->text.substr(loc.begin, loc.end - loc.begin);
}

const SourceUnit *Program::unit_by_path(const std::string &path) const {
  for (const auto &u : units)
    if (u.path == path) return &u;
  return nullptr;
}

std::string stable_id(const std::string &path, std::size_t begin, std::size_t end,
                      const std::string &kind, std::size_t ordinal) {
  // FNV-1a over the identifying tuple.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const std::string &s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  };
  mix(path);
  mix(std::to_string(begin));
  mix(std::to_string(end));
  mix(kind);
  mix(std::to_string(ordinal));
  static const char *digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

namespace {

void link_sequence(const Program &program, const std::vector<StmtIndex> &seq,
                   std::optional<StmtIndex> next, CFG &cfg,
                   std::optional<StmtIndex> &first_out) {
  std::optional<StmtIndex> cur = next;
  for (auto it = seq.rbegin(); it != seq.rend(); ++it) {
    const StmtIndex s = *it;
    const Statement &st = program.stmt(s);
    if (st.kind == StmtKind::ret || st.kind == StmtKind::exit) {
      cfg.exits.push_back(s);
    } else if (st.kind == StmtKind::branch) {
      bool any = false;
      for (const auto &arm : st.arms) {
        std::optional<StmtIndex> arm_first;
        link_sequence(program, arm, cur, cfg, arm_first);
        if (arm_first) {
          cfg.edges.emplace_back(s, *arm_first);
          any = true;
        }
      }
      // A missing else-arm falls through to the join.
      if (st.arms.size() < 2 && cur) {
        cfg.edges.emplace_back(s, *cur);
        any = true;
      }
      if (!any) cfg.exits.push_back(s);
    } else if (cur) {
      cfg.edges.emplace_back(s, *cur);
    } else {
      cfg.exits.push_back(s);
    }
    cur = s;
  }
  first_out = seq.empty() ? next : std::optional<StmtIndex>(seq.front());
}

void collect_nested(const Program &program, const std::vector<StmtIndex> &seq,
                    std::vector<StmtIndex> &out, const std::string &owner) {
  for (StmtIndex s : seq) {
    if (s >= program.statements.size())
      throw Error("malformed_body", "statement " + owner + " has a dangling scope entry");
    out.push_back(s);
    for (const auto &arm : program.stmt(s).arms) collect_nested(program, arm, out, program.stmt(s).id);
  }
}

} // namespace

CFG build_cfg(const Program &program, ProcIndex proc) {
  const Procedure &p = program.proc(proc);
  CFG cfg;
  collect_nested(program, p.body, cfg.nodes, p.name);
  std::vector<StmtIndex> sorted = cfg.nodes;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw Error("malformed_body", "procedure " + p.name + " reuses a statement in two scopes");
  for (StmtIndex s : cfg.nodes) {
    const Statement &st = program.stmt(s);
    if (st.procedure != proc)
      throw Error("malformed_body", "statement " + st.id + " is in the scope of " + p.name +
                                        " but belongs to another procedure");
  }
  std::optional<StmtIndex> first;
  link_sequence(program, p.body, std::nullopt, cfg, first);
  cfg.entry = first;
  std::sort(cfg.exits.begin(), cfg.exits.end());
  cfg.exits.erase(std::unique(cfg.exits.begin(), cfg.exits.end()), cfg.exits.end());
  return cfg;
}

Dominators::Dominators(const CFG &cfg) {
  if (!cfg.entry) return;
  std::map<StmtIndex, std::vector<StmtIndex>> preds;
  for (const auto &[a, b] : cfg.edges) preds[b].push_back(a);
  std::vector<StmtIndex> all = cfg.nodes;
  std::sort(all.begin(), all.end());
  for (StmtIndex n : all) dom_[n] = (n == *cfg.entry) ? std::vector<StmtIndex>{n} : all;
  bool changed = true;
  while (changed) {
    changed = false;
    for (StmtIndex n : cfg.nodes) {
      if (n == *cfg.entry) continue;
      std::vector<StmtIndex> acc;
      bool first = true;
      for (StmtIndex p : preds[n]) {
        const auto &pd = dom_[p];
        if (first) {
          acc = pd;
          first = false;
        } else {
          std::vector<StmtIndex> tmp;
          std::set_intersection(acc.begin(), acc.end(), pd.begin(), pd.end(),
                                std::back_inserter(tmp));
          acc.swap(tmp);
        }
      }
      if (first) acc.clear(); // unreachable
      if (std::find(acc.begin(), acc.end(), n) == acc.end()) {
        acc.push_back(n);
        std::sort(acc.begin(), acc.end());
      }
      if (acc != dom_[n]) {
        dom_[n] = std::move(acc);
        changed = true;
      }
    }
  }
}

bool Dominators::dominates(StmtIndex a, StmtIndex b) const {
  auto it = dom_.find(b);
  if (it == dom_.end()) return false;
  return std::binary_search(it->second.begin(), it->second.end(), a);
}

CodeSlice slice_around(const Program &program, const std::string &focus_stmt_id, int window) {
  auto idx = program.find_statement(focus_stmt_id);
  if (!idx) throw Error("unknown_focus", "no statement with id " + focus_stmt_id);
  return slice_around(program, *idx, window);
}

CodeSlice slice_around(const Program &program, StmtIndex focus, int window) {
  if (focus >= program.statements.size())
    throw Error("unknown_focus", "statement index out of range");
  if (window < 0) window = 0;
  const Statement &st = program.stmt(focus);
  const Procedure &proc = program.proc(st.procedure);
  const SourceUnit &unit = program.units.at(proc.unit);
  int first = std::max(st.location.start_line - window, proc.location.start_line);
  int last = std::min(st.location.end_line + window, proc.location.end_line);
  first = std::min(first, st.location.start_line);
  last = std::max(last, st.location.end_line);

  // Byte range of [first, last] lines.
  std::size_t begin = 0;
  int line = 1;
  while (line < first && begin < unit.text.size()) {
    if (unit.text[begin] == '\n') ++line;
    ++begin;
  }
  std::size_t end = begin;
  while (end < unit.text.size()) {
    if (unit.text[end] == '\n') {
      if (line == last) break;
      ++line;
    }
    ++end;
  }
  CodeSlice slice;
  slice.focus = st.id;
  slice.text = unit.text.substr(begin, end - begin);
  slice.procedure = proc.name;
  slice.first_line = first;
  slice.last_line = last;
  slice.path = unit.path;
  return slice;
}

namespace {

std::string join_values(const std::vector<ValueRef> &values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += values[i].str();
  }
  return out;
}

} // namespace

std::string dump_program(const Program &program) {
  std::ostringstream os;
  for (const auto &u : program.units)
    os << "unit\t" << u.path << '\t' << to_string(u.language) << '\n';
  for (ProcIndex p = 0; p < program.procedures.size(); ++p) {
    const Procedure &proc = program.procedures[p];
    os << "proc\t" << proc.id << '\t' << proc.name << '\t' << program.units[proc.unit].path
       << '\t';
    for (std::size_t i = 0; i < proc.params.size(); ++i) os << (i ? "," : "") << proc.params[i].name;
    os << '\n';
    for (const auto &d : proc.decorators)
      os << "deco\t" << proc.id << '\t' << d.qualified << (d.called ? "(" + join_values(d.args) + ")" : "")
         << '\n';
    for (StmtIndex s : proc.statements) {
      const Statement &st = program.stmt(s);
      os << "stmt\t" << st.id << '\t' << proc.id << '\t' << to_string(st.kind) << '\t'
         << (st.target ? st.target->str() : std::string("-")) << '\t' << join_values(st.sources)
         << '\t';
      if (st.call) os << st.call->qualified << '(' << join_values(st.call->args) << ')';
      else os << '-';
      os << '\t';
      for (std::size_t a = 0; a < st.arms.size(); ++a) {
        if (a) os << '|';
        for (std::size_t k = 0; k < st.arms[a].size(); ++k)
          os << (k ? "," : "") << program.stmt(st.arms[a][k]).id;
      }
      if (st.kind == StmtKind::assemble) {
        os << "{";
        for (std::size_t k = 0; k < st.keys.size(); ++k) os << (k ? "," : "") << st.keys[k];
        os << "}";
      }
      os << '\t' << st.location.start_line << '\n';
    }
  }
  for (const auto &e : program.call_graph.edges) {
    os << "edge\t" << program.stmt(e.site).id << '\t' << program.proc(e.caller).id << '\t'
       << (e.callee ? program.proc(*e.callee).id : ("ext:" + e.callee_name)) << '\t'
       << to_string(e.confidence) << '\n';
  }
  return os.str();
}

std::vector<std::string> check_invariants(const Program &program) {
  std::vector<std::string> issues;
  std::map<std::string, int> paths;
  for (const auto &u : program.units)
    if (++paths[u.path] > 1) issues.push_back("duplicate unit path " + u.path);
  std::map<std::string, int> stmt_ids;
  for (ProcIndex p = 0; p < program.procedures.size(); ++p) {
    const Procedure &proc = program.procedures[p];
    if (proc.unit >= program.units.size()) issues.push_back("procedure without unit " + proc.name);
    std::map<std::string, int> names;
    for (const auto &param : proc.params)
      if (++names[param.name] > 1) issues.push_back("duplicate param in " + proc.name);
    for (StmtIndex s : proc.statements) {
      const Statement &st = program.stmt(s);
      if (++stmt_ids[st.id] > 1) issues.push_back("duplicate statement id " + st.id);
      if (st.procedure != p) issues.push_back("statement " + st.id + " owner mismatch");
      if (st.location.start_line > st.location.end_line ||
          (st.location.start_line == st.location.end_line &&
           st.location.start_col > st.location.end_col))
        issues.push_back("statement " + st.id + " has inverted location");
      for (const auto *v : {&st.target}) {
        if (*v && (*v)->fields.size() > kFieldDepthLimit)
          issues.push_back("statement " + st.id + " exceeds field depth");
      }
    }
  }
  for (const auto &e : program.call_graph.edges) {
    if (e.caller >= program.procedures.size() ||
        (e.callee && *e.callee >= program.procedures.size()))
      issues.push_back("call edge references a missing procedure");
  }
  return issues;
}

} // namespace mcpflow
