#pragma once

#include "mcpflow/frontend/ast.hpp"
#include "mcpflow/model.hpp"

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace mcpflow::frontend {

/// Dotted rendering of a callee expression, e.g. "this.server.tool".
std::string render_callee(const ast::Expr &e);

/// Lowers one parsed unit into the program (procedures and statements).
class UnitLowerer {
public:
  UnitLowerer(Program &program, UnitIndex unit, ast::Module &module);
  void run();

private:
  struct Scope {
    ProcIndex proc;
    std::vector<StmtIndex> *seq;
    int temps = 0;
    std::set<std::string> params;
    std::string class_name;
  };

  SourceLocation loc(ast::Span span) const;
  std::string excerpt(ast::Span span) const;

  ProcIndex new_procedure(const std::string &name, ast::Span span, std::optional<ProcIndex> parent);
  StmtIndex emit(Statement st, ast::Span span);
  ValueRef new_temp(bool call_result);
  ValueRef ref(const std::string &name) const;
  void emit_copy(const ValueRef &target, const ValueRef &value, ast::Span span);
  void with_sequence(std::vector<StmtIndex> &seq, const std::function<void()> &fn);

  void lower_block(const ast::StmtList &stmts, bool module_level);
  void lower_stmt(const ast::Stmt &s, bool module_level);
  void lower_assign_stmt(const ast::Stmt &s, bool module_level);
  void lower_if(const ast::Stmt &s);
  void lower_cases(const ast::Stmt &s, BranchForm form, const ValueRef &subject, std::size_t index);
  void lower_import(const ast::Import &imp, ast::Span span);
  void record_require(const ast::Pattern &target, const ast::Expr &value, ast::Span span);
  void lower_class(const ast::ClassDef &cls, bool module_level);
  ProcIndex lower_function(const ast::Function &fn, const std::string &name,
                           const std::string &class_name, bool method);
  Decorator lower_decorator(const ast::Decorator &d);
  ValueRef lower_lambda(const ast::Expr &e, const std::string &hint);

  void bind_pattern(const ast::Pattern &p, const ValueRef &value, ast::Span span);
  ValueRef lower_target(const ast::Expr &e);
  ast::Pattern expr_to_pattern(const ast::Expr &e);

  static bool is_literal_expr(const ast::Expr &e);
  ValueRef lower_expr(const ast::Expr &e, const std::string &hint = "");
  ValueRef lower_path(const ast::Expr &e);
  void lower_into(const ast::Expr &e, const ValueRef &target, ast::Span span);
  void lower_binary_into(const ast::Expr &e, const ValueRef &target, ast::Span span);
  static void flatten_plus(const ast::Expr &e, std::vector<const ast::Expr *> &out);
  ValueRef lower_assignment_expr(const ast::Expr &e);
  void lower_call(const ast::Expr &e, std::optional<ValueRef> target, ast::Span span);

  std::optional<ValueRef> pure_path(const ast::Expr &e) const;
  void collect_reads(const ast::Expr &e, Condition &c) const;
  void classify_condition(const ast::Expr &e, Condition &c, bool negated) const;
  Condition make_condition(const ast::Expr &e) const;
  StmtIndex emit_branch(ast::Span span, BranchForm form, Condition cond,
                        const std::function<void()> &then_fn,
                        const std::function<void()> &else_fn);

  Program &prog_;
  UnitIndex unit_;
  ast::Module &module_;
  Language lang_;
  std::vector<std::size_t> line_starts_;
  std::vector<Scope> scopes_;
  std::map<std::tuple<std::size_t, std::size_t, std::string>, std::size_t> ordinal_;
};

} // namespace mcpflow::frontend
