// Lowering from the shared syntax tree into the Program model.

#include "lower.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

namespace mcpflow::frontend {

using ast::Expr;
using ast::ExprKind;
using ast::Pattern;
using ast::PatternKind;

namespace {

/// Array methods whose function argument is invoked with the elements.
const std::set<std::string> kElementCallbacks = {"forEach", "map",   "filter", "flatMap",
                                                 "some",    "every", "find",   "findIndex",
                                                 "findLast"};

bool is_comparison(const std::string &op) {
  static const std::set<std::string> ops = {"==", "!=", "===", "!==", "<",      ">",
                                            "<=", ">=", "in", "not in", "is", "is not",
                                            "instanceof"};
  return ops.count(op) > 0;
}

bool is_assignment(const std::string &op) {
  return op == ":=" || (op.size() >= 1 && op.back() == '=' && op != "==" && op != "!=" &&
                        op != "===" && op != "!==" && op != "<=" && op != ">=");
}

} // namespace

std::string render_callee(const Expr &e) {
  switch (e.kind) {
  case ExprKind::name:
    return e.text;
  case ExprKind::member:
    return render_callee(*e.kids[0]) + "." + e.text;
  case ExprKind::call:
  case ExprKind::new_call:
    return render_callee(*e.kids[0]) + "()";
  case ExprKind::index:
    if (e.kids[1]->kind == ExprKind::string) return render_callee(*e.kids[0]) + "." + e.kids[1]->text;
    return render_callee(*e.kids[0]) + "[]";
  case ExprKind::await:
    return render_callee(*e.kids[0]);
  case ExprKind::string:
    return "\"" + e.text + "\"";
  default:
    return "<expr>";
  }
}

UnitLowerer::UnitLowerer(Program &program, UnitIndex unit, ast::Module &module)
    : prog_(program), unit_(unit), module_(module) {
  const std::string &text = prog_.units[unit_].text;
  line_starts_.push_back(0);
  for (std::size_t i = 0; i < text.size(); ++i)
    if (text[i] == '\n') line_starts_.push_back(i + 1);
  lang_ = prog_.units[unit_].language;
}

SourceLocation UnitLowerer::loc(ast::Span span) const {
  SourceLocation l;
  l.path = prog_.units[unit_].path;
  const std::string &text = prog_.units[unit_].text;
  std::size_t b = std::min(span.begin, text.size());
  std::size_t e = std::max(b, std::min(span.end, text.size()));
  l.begin = b;
  l.end = e;
  auto line_of = [&](std::size_t off) {
    auto it = std::upper_bound(line_starts_.begin(), line_starts_.end(), off);
    std::size_t line = static_cast<std::size_t>(it - line_starts_.begin());
    return std::pair<int, int>(static_cast<int>(line),
                               static_cast<int>(off - line_starts_[line - 1]) + 1);
  };
  auto [sl, sc] = line_of(b);
  auto [el, ec] = line_of(e > b ? e - 1 : b);
  l.start_line = sl;
  l.start_col = sc;
  l.end_line = el;
  l.end_col = ec + (e > b ? 1 : 0);
  return l;
}

std::string UnitLowerer::excerpt(ast::Span span) const {
  const std::string &text = prog_.units[unit_].text;
  std::size_t b = std::min(span.begin, text.size());
  std::size_t e = std::max(b, std::min(span.end, text.size()));
  return text.substr(b, e - b);
}

// --- procedures and statements --------------------------------------------------

ProcIndex UnitLowerer::new_procedure(const std::string &name, ast::Span span,
                                     std::optional<ProcIndex> parent) {
  Procedure p;
  p.unit = unit_;
  p.location = loc(span);
  p.parent = parent;
  std::string qualified = name;
  if (parent && !prog_.procedures[*parent].is_module)
    qualified = prog_.procedures[*parent].name + "." + name;
  p.name = qualified;
  p.id = stable_id(p.location.path, span.begin, span.end, "proc:" + qualified,
                   ordinal_[{span.begin, span.end, "proc"}]++);
  prog_.procedures.push_back(std::move(p));
  return prog_.procedures.size() - 1;
}

StmtIndex UnitLowerer::emit(Statement st, ast::Span span) {
  Scope &sc = scopes_.back();
  st.procedure = sc.proc;
  st.location = loc(span);
  std::string kind = to_string(st.kind);
  st.id = stable_id(st.location.path, span.begin, span.end, kind,
                    ordinal_[{span.begin, span.end, kind}]++);
  prog_.statements.push_back(std::move(st));
  StmtIndex idx = prog_.statements.size() - 1;
  sc.seq->push_back(idx);
  prog_.procedures[sc.proc].statements.push_back(idx);
  return idx;
}

ValueRef UnitLowerer::new_temp(bool call_result) {
  Scope &sc = scopes_.back();
  return ValueRef::temp("$t" + std::to_string(sc.temps++), call_result);
}

ValueRef UnitLowerer::ref(const std::string &name) const {
  const Scope &sc = scopes_.back();
  if (sc.params.count(name)) return ValueRef::param(name);
  return ValueRef::local(name);
}

void UnitLowerer::emit_copy(const ValueRef &target, const ValueRef &value, ast::Span span) {
  Statement st;
  if (!target.fields.empty()) st.kind = StmtKind::field_store;
  else if (!value.is_literal() && !value.fields.empty()) st.kind = StmtKind::field_load;
  else st.kind = StmtKind::assign;
  st.target = target;
  st.sources = {value};
  emit(std::move(st), span);
}

void UnitLowerer::with_sequence(std::vector<StmtIndex> &seq, const std::function<void()> &fn) {
  std::vector<StmtIndex> *saved = scopes_.back().seq;
  scopes_.back().seq = &seq;
  fn();
  scopes_.back().seq = saved;
}

// --- entry --------------------------------------------------------------------------

void UnitLowerer::run() {
  SourceUnit &u = prog_.units[unit_];
  ast::Span whole{0, u.text.size()};
  ProcIndex mod = new_procedure("<module:" + u.path + ">", whole, std::nullopt);
  prog_.procedures[mod].is_module = true;
  prog_.units[unit_].module_procedure = mod;
  std::vector<StmtIndex> body;
  scopes_.push_back({mod, &body, 0, {}, ""});
  lower_block(module_.body, true);
  scopes_.pop_back();
  prog_.procedures[mod].body = std::move(body);
}

void UnitLowerer::lower_block(const ast::StmtList &stmts, bool module_level) {
  for (const auto &s : stmts) lower_stmt(*s, module_level);
}

// --- functions ------------------------------------------------------------------------

ProcIndex UnitLowerer::lower_function(const ast::Function &fn, const std::string &name,
                                      const std::string &class_name, bool method) {
  ProcIndex parent = scopes_.back().proc;
  std::string proc_name = name;
  std::optional<ProcIndex> parent_opt = parent;
  if (!class_name.empty()) {
    proc_name = class_name + "." + name;
    if (prog_.procedures[parent].is_module) parent_opt = parent;
  }
  ProcIndex p = new_procedure(proc_name, fn.span, parent_opt);
  Procedure &proc = prog_.procedures[p];
  proc.class_name = class_name;
  proc.is_lambda = !method && (fn.is_arrow || name.rfind("<", 0) == 0);
  proc.is_generator = fn.is_generator;
  if (fn.is_generator) module_.unsupported["generator"]++;

  std::vector<StmtIndex> body;
  scopes_.push_back({p, &body, 0, {}, class_name});
  bool receiver = false;
  if (method && !fn.is_static) {
    if (lang_ == Language::js_ts) {
      prog_.procedures[p].params.push_back({"this", false, std::nullopt});
      scopes_.back().params.insert("this");
      receiver = true;
    } else if (!fn.params.empty()) {
      receiver = true;
    }
  }
  prog_.procedures[p].has_receiver = receiver;

  // Decorators are evaluated in the enclosing scope.
  std::vector<Decorator> decorators;
  {
    Scope inner = scopes_.back();
    scopes_.pop_back();
    for (const auto &d : fn.decorators) decorators.push_back(lower_decorator(d));
    scopes_.push_back(inner);
    scopes_.back().seq = &body;
  }
  prog_.procedures[p].decorators = std::move(decorators);

  std::vector<std::pair<std::size_t, const ast::Param *>> destructured;
  for (std::size_t i = 0; i < fn.params.size(); ++i) {
    const ast::Param &ap = fn.params[i];
    Param param;
    param.rest = ap.rest || ap.kwrest;
    if (ap.pattern.kind == PatternKind::name) {
      param.name = ap.pattern.name;
    } else {
      param.name = "$arg" + std::to_string(i);
      destructured.emplace_back(i, &ap);
    }
    if (ap.pattern.default_value) param.default_text = excerpt(ap.pattern.default_value->span);
    scopes_.back().params.insert(param.name);
    prog_.procedures[p].params.push_back(std::move(param));
  }
  for (std::size_t i = 0; i < fn.params.size(); ++i) {
    const ast::Param &ap = fn.params[i];
    if (ap.pattern.kind == PatternKind::name && ap.pattern.default_value &&
        !is_literal_expr(*ap.pattern.default_value)) {
      ValueRef v = lower_expr(*ap.pattern.default_value);
      emit_copy(ValueRef::param(ap.pattern.name), v, ap.pattern.span);
    }
  }
  for (const auto &[i, ap] : destructured) {
    std::string pname = prog_.procedures[p].params[i + (receiver && lang_ == Language::js_ts ? 1 : 0)].name;
    bind_pattern(ap->pattern, ValueRef::param(pname), ap->pattern.span);
  }

  if (fn.expr_body) {
    ValueRef v = lower_expr(*fn.expr_body);
    Statement ret;
    ret.kind = StmtKind::ret;
    ret.target = ValueRef::local(kReturnSlot);
    ret.sources = {v};
    emit(std::move(ret), fn.expr_body->span);
  } else {
    lower_block(fn.body, false);
  }
  scopes_.pop_back();
  prog_.procedures[p].body = std::move(body);
  return p;
}

Decorator UnitLowerer::lower_decorator(const ast::Decorator &d) {
  Decorator out;
  out.location = loc(d.span);
  const Expr &e = *d.expr;
  if (e.kind == ExprKind::call) {
    out.called = true;
    out.callee = render_callee(*e.kids[0]);
    for (std::size_t k = 1; k < e.kids.size(); ++k) {
      out.args.push_back(lower_expr(*e.kids[k]));
      out.arg_names.push_back(k - 1 < e.arg_names.size() ? e.arg_names[k - 1] : "");
    }
  } else {
    out.callee = render_callee(e);
  }
  return out;
}

ValueRef UnitLowerer::lower_lambda(const Expr &e, const std::string &hint) {
  std::string name = hint;
  if (name.empty()) {
    if (e.fn && !e.fn->name.empty() && e.fn->name[0] != '<') name = e.fn->name;
    else name = "<lambda:" + std::to_string(loc(e.span).start_line) + ">";
  }
  ProcIndex p = lower_function(*e.fn, name, "", e.fn->is_method);
  return ValueRef::function_literal(p);
}

void UnitLowerer::lower_class(const ast::ClassDef &cls, bool module_level) {
  SourceUnit *unit = &prog_.units[unit_];
  (void)unit;
  for (const auto &m : cls.methods) {
    ProcIndex p = lower_function(*m, m->name, cls.name, true);
    prog_.units[unit_].classes[cls.name][m->name] = p;
    if (module_level) prog_.units[unit_].definitions[cls.name + "." + m->name] = p;
  }
  if (cls.methods.empty()) prog_.units[unit_].classes[cls.name];
  // Class-level statements (attributes, field initialisers) run in the
  // enclosing scope.
  lower_block(cls.body, false);
}

// --- patterns -----------------------------------------------------------------------------

void UnitLowerer::bind_pattern(const Pattern &p, const ValueRef &value, ast::Span span) {
  switch (p.kind) {
  case PatternKind::name: {
    emit_copy(ref(p.name), value, span);
    if (p.default_value && !is_literal_expr(*p.default_value)) {
      ValueRef d = lower_expr(*p.default_value);
      emit_copy(ref(p.name), d, p.default_value->span);
    }
    break;
  }
  case PatternKind::object:
    for (const auto &prop : p.props) {
      if (prop.key == "...") {
        bind_pattern(*prop.value->rest_of, value, prop.value->span);
        continue;
      }
      ValueRef field = value.is_literal() ? value : value.with_field(prop.key);
      const Pattern &sub = *prop.value;
      if (sub.kind == PatternKind::name) {
        bind_pattern(sub, field, sub.span.end > sub.span.begin ? sub.span : span);
      } else {
        ValueRef t = new_temp(false);
        emit_copy(t, field, sub.span);
        bind_pattern(sub, t, sub.span);
      }
    }
    break;
  case PatternKind::array:
    for (const auto &el : p.elems) {
      if (el->kind == PatternKind::skip) continue;
      if (el->kind == PatternKind::rest) {
        bind_pattern(*el->rest_of, value, el->span);
        continue;
      }
      ValueRef elem = value.is_literal() ? value : value.with_field(kElementField);
      if (el->kind == PatternKind::name || el->kind == PatternKind::target) {
        bind_pattern(*el, elem, el->span.end > el->span.begin ? el->span : span);
      } else {
        ValueRef t = new_temp(false);
        emit_copy(t, elem, el->span);
        bind_pattern(*el, t, el->span);
      }
    }
    break;
  case PatternKind::target: {
    ValueRef target = lower_target(*p.target);
    emit_copy(target, value, span);
    break;
  }
  case PatternKind::rest:
    if (p.rest_of) bind_pattern(*p.rest_of, value, span);
    break;
  case PatternKind::skip:
    break;
  }
}

ValueRef UnitLowerer::lower_target(const Expr &e) {
  if (e.kind == ExprKind::name) return ref(e.text);
  if (e.kind == ExprKind::member || e.kind == ExprKind::index) return lower_path(e);
  return lower_expr(e);
}

// --- expressions ------------------------------------------------------------------------

bool UnitLowerer::is_literal_expr(const Expr &e) {
  return e.kind == ExprKind::string || e.kind == ExprKind::number ||
         e.kind == ExprKind::constant ||
         (e.kind == ExprKind::templ && e.kids.empty());
}

ValueRef UnitLowerer::lower_expr(const Expr &e, const std::string &hint) {
  switch (e.kind) {
  case ExprKind::name:
    if (e.text == "None" || e.text == "undefined") return ValueRef::other_literal(e.text);
    return ref(e.text);
  case ExprKind::string:
    return ValueRef::string_literal(e.text);
  case ExprKind::number:
  case ExprKind::constant:
    return ValueRef::other_literal(e.text);
  case ExprKind::templ:
    if (e.kids.empty()) {
      std::string s;
      for (const auto &p : e.parts) s += p;
      return ValueRef::string_literal(s);
    }
    break;
  case ExprKind::member:
  case ExprKind::index:
    return lower_path(e);
  case ExprKind::await:
  case ExprKind::spread:
    return lower_expr(*e.kids[0], hint);
  case ExprKind::unary:
    if (e.text == "-" || e.text == "+" || e.text == "~" || e.text == "++" || e.text == "--")
      return lower_expr(*e.kids[0]);
    lower_expr(*e.kids[0]);
    return ValueRef::other_literal(e.text == "typeof" ? "typeof" : "bool");
  case ExprKind::lambda:
    return lower_lambda(e, hint);
  default:
    break;
  }
  ValueRef t = new_temp(e.kind == ExprKind::call || e.kind == ExprKind::new_call);
  lower_into(e, t, e.span);
  return t;
}

ValueRef UnitLowerer::lower_path(const Expr &e) {
  ValueRef base = lower_expr(*e.kids[0]);
  if (base.is_literal()) {
    ValueRef t = new_temp(false);
    emit_copy(t, base, e.kids[0]->span);
    base = t;
  }
  if (e.kind == ExprKind::member) return base.with_field(e.text);
  const Expr &key = *e.kids[1];
  if (key.kind == ExprKind::string) return base.with_field(key.text);
  if (!is_literal_expr(key)) lower_expr(key);
  return base.with_field(kElementField);
}

void UnitLowerer::lower_into(const Expr &e, const ValueRef &target, ast::Span span) {
  switch (e.kind) {
  case ExprKind::call:
  case ExprKind::new_call:
    lower_call(e, target, span);
    return;
  case ExprKind::await:
  case ExprKind::spread:
    lower_into(*e.kids[0], target, span);
    return;
  case ExprKind::object: {
    Statement st;
    st.kind = StmtKind::assemble;
    st.target = target;
    for (const auto &prop : e.props) {
      std::string key = prop.spread ? "..." : prop.key;
      if (prop.computed_key) {
        if (!is_literal_expr(*prop.computed_key)) lower_expr(*prop.computed_key);
        key = prop.computed_key->kind == ExprKind::string ? prop.computed_key->text : kElementField;
      }
      st.sources.push_back(lower_expr(*prop.value, prop.spread ? "" : key));
      st.keys.push_back(key);
    }
    emit(std::move(st), span);
    return;
  }
  case ExprKind::array: {
    Statement st;
    st.kind = StmtKind::assemble;
    st.target = target;
    for (const auto &k : e.kids) {
      if (k->kind == ExprKind::constant && k->text == "<hole>") continue;
      st.sources.push_back(lower_expr(*k));
      st.keys.push_back(k->kind == ExprKind::spread ? "..." : "");
    }
    emit(std::move(st), span);
    return;
  }
  case ExprKind::templ: {
    Statement st;
    st.kind = StmtKind::assign;
    st.target = target;
    for (const auto &k : e.kids) st.sources.push_back(lower_expr(*k));
    if (st.sources.empty()) {
      std::string s;
      for (const auto &p : e.parts) s += p;
      st.sources.push_back(ValueRef::string_literal(s));
    } else {
      std::string pattern;
      for (std::size_t i = 0; i < e.parts.size(); ++i) {
        if (i) pattern += "{}";
        pattern += e.parts[i];
      }
      st.template_head = e.parts.empty() ? "" : e.parts[0];
      st.template_pattern = pattern;
    }
    emit(std::move(st), span);
    return;
  }
  case ExprKind::binary:
    lower_binary_into(e, target, span);
    return;
  case ExprKind::conditional: {
    lower_expr(*e.kids[0]);
    Statement st;
    st.kind = StmtKind::assign;
    st.target = target;
    st.sources = {lower_expr(*e.kids[1]), lower_expr(*e.kids[2])};
    emit(std::move(st), span);
    return;
  }
  case ExprKind::comprehension: {
    // kids: element, then (iterable | condition)* tagged by arg_names.
    for (std::size_t k = 1; k < e.kids.size(); ++k) {
      const std::string &tag = e.arg_names[k];
      if (tag.rfind("iter:", 0) == 0) {
        ValueRef it = lower_expr(*e.kids[k]);
        std::stringstream names(tag.substr(5));
        std::string n;
        while (std::getline(names, n, ',')) {
          if (n.empty()) continue;
          emit_copy(ref(n), it.is_literal() ? it : it.with_field(kElementField), e.kids[k]->span);
        }
      } else {
        lower_expr(*e.kids[k]);
      }
    }
    Statement st;
    st.kind = StmtKind::assemble;
    st.target = target;
    st.sources = {lower_expr(*e.kids[0])};
    st.keys = {""};
    emit(std::move(st), span);
    return;
  }
  case ExprKind::opaque: {
    Statement st;
    st.kind = StmtKind::assign;
    st.target = target;
    for (const auto &k : e.kids) st.sources.push_back(lower_expr(*k));
    if (st.sources.empty()) st.sources.push_back(ValueRef::other_literal(e.text));
    emit(std::move(st), span);
    return;
  }
  default: {
    ValueRef v = lower_expr(e, target.fields.empty() && target.base[0] != '$' ? target.base : "");
    emit_copy(target, v, span);
    return;
  }
  }
}

void UnitLowerer::flatten_plus(const Expr &e, std::vector<const Expr *> &out) {
  if (e.kind == ExprKind::binary && e.text == "+") {
    flatten_plus(*e.kids[0], out);
    flatten_plus(*e.kids[1], out);
    return;
  }
  out.push_back(&e);
}

void UnitLowerer::lower_binary_into(const Expr &e, const ValueRef &target, ast::Span span) {
  const std::string &op = e.text;
  if (is_assignment(op)) {
    ValueRef v = lower_assignment_expr(e);
    emit_copy(target, v, span);
    return;
  }
  if (op == ",") {
    lower_expr(*e.kids[0]);
    lower_into(*e.kids[1], target, span);
    return;
  }
  if (is_comparison(op)) {
    lower_expr(*e.kids[0]);
    lower_expr(*e.kids[1]);
    emit_copy(target, ValueRef::other_literal("bool"), span);
    return;
  }
  Statement st;
  st.kind = StmtKind::assign;
  st.target = target;
  if (op == "+") {
    std::vector<const Expr *> operands;
    flatten_plus(e, operands);
    bool literal_head = operands[0]->kind == ExprKind::string;
    std::string pattern;
    for (const Expr *x : operands) {
      ValueRef v = lower_expr(*x);
      if (x->kind == ExprKind::string) pattern += x->text;
      else pattern += "{}";
      st.sources.push_back(v);
    }
    if (literal_head && operands.size() > 1) {
      st.template_head = operands[0]->text;
      st.template_pattern = pattern;
    }
  } else {
    st.sources = {lower_expr(*e.kids[0]), lower_expr(*e.kids[1])};
  }
  emit(std::move(st), span);
}

ValueRef UnitLowerer::lower_assignment_expr(const Expr &e) {
  const Expr &lhs = *e.kids[0];
  const Expr &rhs = *e.kids[1];
  const std::string &op = e.text;
  if (op == "=" || op == ":=") {
    if (lhs.kind == ExprKind::object || lhs.kind == ExprKind::array) {
      ValueRef v = lower_expr(rhs);
      Pattern p = expr_to_pattern(lhs);
      bind_pattern(p, v, e.span);
      return v;
    }
    ValueRef target = lower_target(lhs);
    lower_into(rhs, target, e.span);
    return target;
  }
  ValueRef target = lower_target(lhs);
  ValueRef v = lower_expr(rhs);
  Statement st;
  st.kind = target.fields.empty() ? StmtKind::assign : StmtKind::field_store;
  st.target = target;
  st.sources = {target, v};
  emit(std::move(st), e.span);
  return target;
}

Pattern UnitLowerer::expr_to_pattern(const Expr &e) {
  Pattern p;
  p.span = e.span;
  switch (e.kind) {
  case ExprKind::name:
    p.kind = PatternKind::name;
    p.name = e.text;
    break;
  case ExprKind::array:
    p.kind = PatternKind::array;
    for (const auto &k : e.kids) p.elems.push_back(std::make_unique<Pattern>(expr_to_pattern(*k)));
    break;
  case ExprKind::object:
    p.kind = PatternKind::object;
    for (const auto &prop : e.props)
      p.props.push_back({prop.key, std::make_unique<Pattern>(expr_to_pattern(*prop.value))});
    break;
  default:
    p.kind = PatternKind::skip;
    break;
  }
  return p;
}

void UnitLowerer::lower_call(const Expr &e, std::optional<ValueRef> target, ast::Span span) {
  const Expr &c = *e.kids[0];
  CallSite cs;
  cs.is_new = e.kind == ExprKind::new_call;
  cs.callee = render_callee(c);
  if (c.kind == ExprKind::name) {
    cs.form = CalleeForm::name;
  } else if (c.kind == ExprKind::member) {
    cs.form = CalleeForm::member;
    cs.object = lower_expr(*c.kids[0]);
  } else {
    cs.form = CalleeForm::computed;
    if (c.kind == ExprKind::index) {
      const Expr &key = *c.kids[1];
      if (key.kind == ExprKind::name || key.kind == ExprKind::member || key.kind == ExprKind::index) {
        cs.callee_key = lower_expr(key);
      }
      ValueRef table = lower_expr(*c.kids[0]);
      if (table.is_literal()) {
        ValueRef t = new_temp(false);
        emit_copy(t, table, c.kids[0]->span);
        table = t;
      }
      cs.callee_value = key.kind == ExprKind::string ? table.with_field(key.text)
                                                     : table.with_field(kElementField);
    } else {
      cs.callee_value = lower_expr(c);
    }
  }
  std::vector<std::pair<ValueRef, const Expr *>> fn_args;
  for (std::size_t k = 1; k < e.kids.size(); ++k) {
    const Expr &a = *e.kids[k];
    std::string name = k - 1 < e.arg_names.size() ? e.arg_names[k - 1] : "";
    if (a.kind == ExprKind::spread && name.empty()) name = a.text == "**" ? "**" : "*";
    ValueRef v = lower_expr(a);
    if (v.function) fn_args.emplace_back(v, &a);
    cs.args.push_back(v);
    cs.arg_names.push_back(name);
  }
  std::string method = cs.form == CalleeForm::member ? c.text : "";
  std::optional<ValueRef> receiver = cs.object;

  Statement st;
  st.kind = StmtKind::call;
  st.call = std::move(cs);
  st.target = target;
  emit(std::move(st), span);

  // Callbacks handed to well-known higher-order methods are invoked
  // explicitly so their parameters receive the element values.
  if (!fn_args.empty() && receiver && !receiver->is_literal() &&
      (kElementCallbacks.count(method) || method == "reduce" || method == "then")) {
    for (const auto &[fnv, fe] : fn_args) {
      CallSite cb;
      cb.form = CalleeForm::computed;
      cb.callee = "<callback>";
      cb.callee_value = fnv;
      ValueRef elem = receiver->with_field(kElementField);
      if (method == "reduce") {
        cb.args = {target ? *target : elem, elem};
        cb.arg_names = {"", ""};
      } else if (method == "then") {
        cb.args = {*receiver};
        cb.arg_names = {""};
      } else {
        cb.args = {elem};
        cb.arg_names = {""};
      }
      ValueRef out = new_temp(true);
      Statement cst;
      cst.kind = StmtKind::call;
      cst.call = std::move(cb);
      cst.target = out;
      emit(std::move(cst), fe->span);
      if (target) {
        Statement merge;
        merge.kind = target->fields.empty() ? StmtKind::assign : StmtKind::field_store;
        merge.target = target;
        merge.sources = {out};
        emit(std::move(merge), span);
      }
    }
  }
}

// --- conditions -----------------------------------------------------------------------------

std::optional<ValueRef> UnitLowerer::pure_path(const Expr &e) const {
  switch (e.kind) {
  case ExprKind::name:
    if (e.text == "None" || e.text == "undefined") return std::nullopt;
    return ref(e.text);
  case ExprKind::member: {
    auto base = pure_path(*e.kids[0]);
    if (!base) return std::nullopt;
    return base->with_field(e.text);
  }
  case ExprKind::index: {
    auto base = pure_path(*e.kids[0]);
    if (!base) return std::nullopt;
    const Expr &k = *e.kids[1];
    return base->with_field(k.kind == ExprKind::string ? k.text : kElementField);
  }
  case ExprKind::await:
    return pure_path(*e.kids[0]);
  default:
    return std::nullopt;
  }
}

void UnitLowerer::collect_reads(const Expr &e, Condition &c) const {
  if (auto p = pure_path(e)) {
    bool seen = std::any_of(c.reads.begin(), c.reads.end(),
                            [&](const ValueRef &r) { return r.same_location(*p); });
    if (!seen) c.reads.push_back(*p);
    if (e.kind == ExprKind::index && e.kids[1]->kind != ExprKind::string)
      collect_reads(*e.kids[1], c);
    return;
  }
  if (e.kind == ExprKind::call || e.kind == ExprKind::new_call) {
    c.calls.push_back(render_callee(*e.kids[0]));
    if (e.kids[0]->kind == ExprKind::member) collect_reads(*e.kids[0]->kids[0], c);
    for (std::size_t k = 1; k < e.kids.size(); ++k) collect_reads(*e.kids[k], c);
    return;
  }
  if (e.kind == ExprKind::lambda) return;
  for (const auto &k : e.kids) collect_reads(*k, c);
  for (const auto &p : e.props)
    if (p.value) collect_reads(*p.value, c);
}

namespace {

bool string_items(const Expr &e, std::vector<std::string> &out) {
  if (e.kind != ExprKind::array) return false;
  for (const auto &k : e.kids) {
    if (k->kind != ExprKind::string) return false;
    out.push_back(k->text);
  }
  return true;
}

} // namespace

void UnitLowerer::classify_condition(const Expr &e, Condition &c, bool negated) const {
  if (e.kind == ExprKind::unary && (e.text == "not" || e.text == "!")) {
    classify_condition(*e.kids[0], c, !negated);
    return;
  }
  c.negated = negated;
  if (e.kind == ExprKind::binary) {
    const std::string &op = e.text;
    const Expr &l = *e.kids[0];
    const Expr &r = *e.kids[1];
    if (op == "==" || op == "===" || op == "!=" || op == "!==") {
      const Expr *lit = l.kind == ExprKind::string ? &l : r.kind == ExprKind::string ? &r : nullptr;
      const Expr *other = lit == &l ? &r : &l;
      c.form = (op == "==" || op == "===") ? ConditionForm::equality : ConditionForm::inequality;
      if (lit) c.literals.push_back(lit->text);
      if (auto p = pure_path(*other)) c.subject = p;
      return;
    }
    if (op == "in" || op == "not in") {
      c.form = ConditionForm::membership;
      if (op == "not in") c.negated = !c.negated;
      if (auto p = pure_path(l)) c.subject = p;
      if (!string_items(r, c.literals)) {
        if (r.kind == ExprKind::object) {
          for (const auto &p : r.props)
            if (!p.computed_key && !p.spread) c.literals.push_back(p.key);
        } else {
          c.collection = render_callee(r);
        }
      }
      return;
    }
    if (op == "||" || op == "or") {
      // a == "x" || a == "y" reads as membership in {"x", "y"}
      Condition lc, rc;
      classify_condition(l, lc, false);
      classify_condition(r, rc, false);
      bool same = (lc.form == ConditionForm::equality || lc.form == ConditionForm::membership) &&
                  (rc.form == ConditionForm::equality || rc.form == ConditionForm::membership) &&
                  !lc.negated && !rc.negated && lc.subject && rc.subject &&
                  lc.subject->same_location(*rc.subject) && lc.collection.empty() &&
                  rc.collection.empty();
      if (same) {
        c.form = ConditionForm::membership;
        c.subject = lc.subject;
        c.literals = lc.literals;
        c.literals.insert(c.literals.end(), rc.literals.begin(), rc.literals.end());
        return;
      }
      c.form = ConditionForm::other;
      return;
    }
    c.form = ConditionForm::other;
    return;
  }
  if (e.kind == ExprKind::call && e.kids[0]->kind == ExprKind::member) {
    const Expr &callee = *e.kids[0];
    if ((callee.text == "includes" || callee.text == "has" || callee.text == "__contains__") &&
        e.kids.size() == 2) {
      c.form = ConditionForm::membership;
      if (auto p = pure_path(*e.kids[1])) c.subject = p;
      if (!string_items(*callee.kids[0], c.literals)) c.collection = render_callee(*callee.kids[0]);
      return;
    }
  }
  if (pure_path(e) || e.kind == ExprKind::call) {
    c.form = ConditionForm::truthy;
    if (auto p = pure_path(e)) c.subject = p;
    return;
  }
  c.form = ConditionForm::other;
}

Condition UnitLowerer::make_condition(const Expr &e) const {
  Condition c;
  collect_reads(e, c);
  classify_condition(e, c, false);
  c.text = excerpt(e.span);
  return c;
}

StmtIndex UnitLowerer::emit_branch(ast::Span span, BranchForm form, Condition cond,
                                   const std::function<void()> &then_fn,
                                   const std::function<void()> &else_fn) {
  Statement st;
  st.kind = StmtKind::branch;
  st.branch_form = form;
  st.sources = cond.reads;
  st.condition = std::move(cond);
  StmtIndex idx = emit(std::move(st), span);
  std::vector<StmtIndex> a, b;
  if (then_fn) with_sequence(a, then_fn);
  if (else_fn) with_sequence(b, else_fn);
  prog_.statements[idx].arms = {std::move(a), std::move(b)};
  return idx;
}

// --- statements ---------------------------------------------------------------------------------

void UnitLowerer::record_require(const Pattern &target, const Expr &value, ast::Span span) {
  const Expr *v = &value;
  while (v->kind == ExprKind::await) v = v->kids[0].get();
  if (v->kind != ExprKind::call || v->kids.size() != 2 || v->kids[0]->kind != ExprKind::name ||
      v->kids[0]->text != "require" || v->kids[1]->kind != ExprKind::string)
    return;
  const std::string &module = v->kids[1]->text;
  auto &imports = prog_.module_graph.imports[unit_];
  if (target.kind == PatternKind::name) {
    ImportBinding b;
    b.local = target.name;
    b.module = module;
    b.namespace_import = true;
    b.location = loc(span);
    imports.push_back(b);
  } else if (target.kind == PatternKind::object) {
    for (const auto &prop : target.props) {
      if (prop.key == "..." || !prop.value || prop.value->kind != PatternKind::name) continue;
      ImportBinding b;
      b.local = prop.value->name;
      b.module = module;
      b.imported = prop.key;
      b.location = loc(span);
      imports.push_back(b);
    }
  }
}

void UnitLowerer::lower_import(const ast::Import &imp, ast::Span span) {
  auto &imports = prog_.module_graph.imports[unit_];
  std::string module = std::string(static_cast<std::size_t>(imp.level), '.') + imp.module;
  if (!imp.namespace_local.empty()) {
    ImportBinding b;
    b.local = imp.namespace_local;
    b.module = module;
    b.namespace_import = true;
    b.location = loc(span);
    imports.push_back(b);
  }
  if (!imp.default_local.empty()) {
    ImportBinding b;
    b.local = imp.default_local;
    b.module = module;
    b.imported = "default";
    b.location = loc(span);
    imports.push_back(b);
  }
  for (const auto &n : imp.names) {
    ImportBinding b;
    b.local = n.local;
    b.module = module;
    b.imported = n.imported;
    b.namespace_import = n.imported == "*";
    b.location = loc(span);
    imports.push_back(b);
  }
}

void UnitLowerer::lower_assign_stmt(const ast::Stmt &s, bool module_level) {
  const Expr &value = *s.value;
  // `a, b = x, y` pairs up element-wise.
  if (s.targets.size() == 1 && s.targets[0]->kind == PatternKind::array &&
      value.kind == ExprKind::array && value.kids.size() == s.targets[0]->elems.size() &&
      std::none_of(value.kids.begin(), value.kids.end(),
                   [](const ast::ExprPtr &k) { return k->kind == ExprKind::spread; })) {
    std::vector<ValueRef> vals;
    for (const auto &k : value.kids) vals.push_back(lower_expr(*k));
    for (std::size_t i = 0; i < vals.size(); ++i) bind_pattern(*s.targets[0]->elems[i], vals[i], s.span);
    return;
  }
  if (s.targets.size() == 1) {
    const Pattern &t = *s.targets[0];
    record_require(t, value, s.span);
    if (t.kind == PatternKind::name) {
      ValueRef target = ref(t.name);
      if (value.kind == ExprKind::lambda) {
        ValueRef fnv = lower_lambda(value, t.name);
        if (module_level) prog_.units[unit_].definitions[t.name] = *fnv.function;
        emit_copy(target, fnv, s.span);
        return;
      }
      lower_into(value, target, s.span);
      return;
    }
    if (t.kind == PatternKind::target) {
      ValueRef target = lower_target(*t.target);
      std::string hint = t.target->kind == ExprKind::member ? t.target->text : "";
      if (value.kind == ExprKind::lambda) {
        emit_copy(target, lower_lambda(value, hint), s.span);
        return;
      }
      lower_into(value, target, s.span);
      return;
    }
  }
  ValueRef v = lower_expr(value);
  if (v.is_literal() && s.targets.size() == 1 && s.targets[0]->kind != PatternKind::name) {
    ValueRef t = new_temp(false);
    emit_copy(t, v, value.span);
    v = t;
  }
  for (const auto &t : s.targets) bind_pattern(*t, v, s.span);
}

void UnitLowerer::lower_cases(const ast::Stmt &s, BranchForm form, const ValueRef &subject,
                              std::size_t index) {
  // Default cases lower into the final else arm regardless of position.
  std::vector<const ast::Case *> ordered, defaults;
  for (const auto &c : s.cases) (c.is_default ? defaults : ordered).push_back(&c);
  std::function<void(std::size_t)> chain = [&](std::size_t k) {
    if (k >= ordered.size()) {
      for (const ast::Case *d : defaults) lower_block(d->body, false);
      return;
    }
    const ast::Case &c = *ordered[k];
    Condition cond;
    cond.form = ConditionForm::equality;
    if (!subject.is_literal()) {
      cond.subject = subject;
      cond.reads.push_back(subject);
    }
    std::string text = "case";
    for (const auto &t : c.tests) {
      if (t->kind == ExprKind::string) cond.literals.push_back(t->text);
      text += " " + excerpt(t->span);
    }
    if (c.guard) {
      Condition g = make_condition(*c.guard);
      for (const auto &r : g.reads) cond.reads.push_back(r);
      cond.calls = g.calls;
      lower_expr(*c.guard);
    }
    cond.text = text;
    ast::Span span = c.span;
    emit_branch(span, form, std::move(cond), [&] { lower_block(c.body, false); },
                [&] { chain(k + 1); });
  };
  (void)index;
  chain(0);
}

void UnitLowerer::lower_if(const ast::Stmt &s) {
  lower_expr(*s.cond);
  Condition cond = make_condition(*s.cond);
  bool chained = s.is_elif || (s.orelse.size() == 1 && s.orelse[0]->is_elif);
  emit_branch(s.span, chained ? BranchForm::if_chain : BranchForm::plain, std::move(cond),
              [&] { lower_block(s.body, false); }, [&] { lower_block(s.orelse, false); });
}

void UnitLowerer::lower_stmt(const ast::Stmt &s, bool module_level) {
  switch (s.kind) {
  case ast::StmtKind::expr: {
    const Expr &v = *s.value;
    if (v.kind == ExprKind::call || v.kind == ExprKind::new_call) {
      lower_call(v, std::nullopt, s.span);
    } else if (v.kind == ExprKind::await && (v.kids[0]->kind == ExprKind::call ||
                                             v.kids[0]->kind == ExprKind::new_call)) {
      lower_call(*v.kids[0], std::nullopt, s.span);
    } else if (v.kind == ExprKind::binary && is_assignment(v.text)) {
      lower_assignment_expr(v);
    } else {
      lower_expr(v);
    }
    break;
  }
  case ast::StmtKind::assign:
    lower_assign_stmt(s, module_level);
    break;
  case ast::StmtKind::aug_assign: {
    const Pattern &t = *s.targets[0];
    ValueRef target = t.kind == PatternKind::target ? lower_target(*t.target) : ref(t.name);
    ValueRef v = lower_expr(*s.value);
    Statement st;
    st.kind = target.fields.empty() ? StmtKind::assign : StmtKind::field_store;
    st.target = target;
    st.sources = {target, v};
    emit(std::move(st), s.span);
    break;
  }
  case ast::StmtKind::ret: {
    Statement st;
    st.kind = StmtKind::ret;
    st.target = ValueRef::local(kReturnSlot);
    if (s.value) st.sources = {lower_expr(*s.value)};
    emit(std::move(st), s.span);
    break;
  }
  case ast::StmtKind::throw_: {
    Statement st;
    st.kind = StmtKind::exit;
    if (s.value) st.sources = {lower_expr(*s.value)};
    emit(std::move(st), s.span);
    break;
  }
  case ast::StmtKind::if_:
    lower_if(s);
    break;
  case ast::StmtKind::switch_:
  case ast::StmtKind::match_: {
    ValueRef subject = lower_expr(*s.value);
    lower_cases(s, s.kind == ast::StmtKind::switch_ ? BranchForm::switch_case : BranchForm::match_case,
                subject, 0);
    break;
  }
  case ast::StmtKind::while_: {
    lower_expr(*s.cond);
    Condition cond = make_condition(*s.cond);
    emit_branch(s.span, BranchForm::loop, std::move(cond), [&] { lower_block(s.body, false); },
                [&] { lower_block(s.orelse, false); });
    break;
  }
  case ast::StmtKind::for_: {
    ValueRef it = lower_expr(*s.value);
    Condition cond;
    cond.form = ConditionForm::other;
    if (!it.is_literal()) {
      cond.subject = it;
      cond.reads.push_back(it);
    }
    cond.text = excerpt(s.value->span);
    emit_branch(s.span, BranchForm::loop, std::move(cond),
                [&] {
                  ValueRef elem = it.is_literal() ? it : it.with_field(kElementField);
                  for (const auto &t : s.targets) bind_pattern(*t, elem, t->span);
                  lower_block(s.body, false);
                },
                [&] { lower_block(s.orelse, false); });
    break;
  }
  case ast::StmtKind::try_: {
    lower_block(s.body, false);
    for (const auto &h : s.handlers) {
      Condition cond;
      cond.form = ConditionForm::none;
      cond.text = "except";
      emit_branch(h.span, BranchForm::handler, std::move(cond),
                  [&] {
                    if (h.binding && h.binding->kind == PatternKind::name)
                      emit_copy(ref(h.binding->name), ValueRef::other_literal("exception"), h.span);
                    lower_block(h.body, false);
                  },
                  nullptr);
    }
    lower_block(s.orelse, false);
    lower_block(s.finalbody, false);
    break;
  }
  case ast::StmtKind::with_: {
    for (const auto &[ctx, bind] : s.with_items) {
      ValueRef v = lower_expr(*ctx);
      if (bind) {
        if (v.is_literal()) {
          ValueRef t = new_temp(false);
          emit_copy(t, v, ctx->span);
          v = t;
        }
        bind_pattern(*bind, v, bind->span);
      }
    }
    lower_block(s.body, false);
    break;
  }
  case ast::StmtKind::func_def: {
    bool nested = !module_level;
    ProcIndex p = lower_function(*s.fn, s.fn->name.empty() ? "default" : s.fn->name, "", false);
    if (module_level) {
      prog_.units[unit_].definitions[s.fn->name.empty() ? "default" : s.fn->name] = p;
      if (s.is_default_export) prog_.units[unit_].definitions["default"] = p;
    }
    if (nested) emit_copy(ref(s.fn->name), ValueRef::function_literal(p), s.span);
    break;
  }
  case ast::StmtKind::class_def:
    lower_class(*s.cls, module_level);
    break;
  case ast::StmtKind::import:
    lower_import(s.import, s.span);
    break;
  case ast::StmtKind::block:
    lower_block(s.body, module_level);
    break;
  case ast::StmtKind::pass:
  case ast::StmtKind::other:
    break;
  }
}

} // namespace mcpflow::frontend
