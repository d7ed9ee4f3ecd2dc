#pragma once

// Syntax tree shared by the Python and JS/TS parsers. It covers only the
// subset the lowering understands; anything else is parsed into `opaque`
// nodes so the surrounding code still lowers.

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace mcpflow::ast {

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct Expr;
struct Stmt;
struct Function;
struct ClassDef;
using ExprPtr = std::unique_ptr<Expr>;
using StmtPtr = std::unique_ptr<Stmt>;
using StmtList = std::vector<StmtPtr>;

enum class ExprKind {
  name,
  string,   ///< text = decoded contents
  number,
  constant, ///< true / false / null / None / undefined
  templ,    ///< template literal or f-string; kids = interpolations, parts = literal chunks
  member,   ///< kids[0].text
  index,    ///< kids[0][kids[1]]
  call,     ///< kids[0](kids[1..])
  new_call,
  object,   ///< props
  array,    ///< kids (list / tuple / set literals)
  lambda,   ///< fn
  binary,   ///< text = operator, kids = [lhs, rhs]
  unary,    ///< text = operator, kids = [operand]
  conditional,
  await,
  spread,
  comprehension, ///< kids = element and iterables, opaque otherwise
  opaque,        ///< unsupported expression; kids = sub-expressions seen
};

struct Property {
  std::string key;       ///< literal key (identifier or string)
  ExprPtr computed_key;  ///< non-literal key
  ExprPtr value;
  bool spread = false;
  Span span;
};

struct Expr {
  ExprKind kind = ExprKind::opaque;
  Span span;
  std::string text;
  std::vector<ExprPtr> kids;
  std::vector<std::string> arg_names; ///< call keyword names, parallel to args
  std::vector<std::string> parts;     ///< template literal chunks
  std::vector<Property> props;
  std::shared_ptr<Function> fn;
};

enum class PatternKind { name, object, array, target, rest, skip };

struct Pattern;
struct PatternProp {
  std::string key;
  std::unique_ptr<Pattern> value;
};

/// Binding or assignment target.
struct Pattern {
  PatternKind kind = PatternKind::name;
  std::string name;
  std::vector<PatternProp> props;              ///< object pattern
  std::vector<std::unique_ptr<Pattern>> elems; ///< array pattern
  std::unique_ptr<Pattern> rest_of;            ///< rest pattern payload
  ExprPtr default_value;
  ExprPtr target; ///< member / index assignment target
  Span span;
};

struct Param {
  Pattern pattern;
  bool rest = false;
  bool kwrest = false;
  std::string annotation;
};

struct Decorator {
  ExprPtr expr;
  Span span;
};

struct Function {
  std::string name;
  std::vector<Param> params;
  StmtList body;
  ExprPtr expr_body; ///< arrow / lambda with an expression body
  std::vector<Decorator> decorators;
  bool is_async = false;
  bool is_generator = false;
  bool is_arrow = false;
  bool is_method = false;
  bool is_static = false;
  Span span;
};

struct ClassDef {
  std::string name;
  std::vector<ExprPtr> bases;
  std::vector<std::shared_ptr<Function>> methods;
  StmtList body; ///< non-method statements in the class body
  std::vector<Decorator> decorators;
  Span span;
};

struct ImportName {
  std::string imported;
  std::string local;
};

struct Import {
  std::string module;
  std::vector<ImportName> names;
  std::string default_local;
  std::string namespace_local;
  int level = 0; ///< python relative import level
  bool is_require = false;
};

enum class StmtKind {
  expr,
  assign,   ///< targets = value (also var declarations)
  aug_assign,
  ret,
  if_,
  switch_,
  match_,
  func_def,
  class_def,
  import,
  throw_,
  try_,
  for_,
  while_,
  with_,
  block,
  pass,
  other,
};

struct Case {
  std::vector<ExprPtr> tests; ///< empty + is_default for default/wildcard
  bool is_default = false;
  ExprPtr guard;
  StmtList body;
  Span span;
};

struct Handler {
  std::unique_ptr<Pattern> binding;
  StmtList body;
  Span span;
};

struct Stmt {
  StmtKind kind = StmtKind::other;
  Span span;
  std::vector<std::unique_ptr<Pattern>> targets;
  ExprPtr value;
  ExprPtr cond;
  StmtList body;
  StmtList orelse;
  StmtList finalbody;
  std::vector<Case> cases;
  std::vector<Handler> handlers;
  std::shared_ptr<Function> fn;
  std::shared_ptr<ClassDef> cls;
  Import import;
  std::string op;
  bool is_elif = false;
  bool exported = false;
  bool is_default_export = false;
  /// with-statement items: value = context expr, targets = bindings
  std::vector<std::pair<ExprPtr, std::unique_ptr<Pattern>>> with_items;
};

struct ParseIssue {
  std::string message;
  std::size_t offset = 0;
};

struct Module {
  StmtList body;
  std::vector<ParseIssue> issues;
  /// Constructs recognised but outside the supported subset.
  std::map<std::string, int> unsupported;
};

} // namespace mcpflow::ast
