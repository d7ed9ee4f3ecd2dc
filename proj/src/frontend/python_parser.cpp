// Recursive-descent parser for the supported Python subset.

#include "parsers.hpp"

#include <algorithm>
#include <functional>

namespace mcpflow::frontend {

using namespace mcpflow::ast;

namespace {

const std::vector<std::string> kPyPuncts = {
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "<<", ">>", "<=", ">=", "==",
    "!=",  "+=",  "-=",  "*=",  "/=",  "%=", "&=", "|=", "^=", "@=", "+",  "-",  "*",  "/",
    "%",   "@",   "&",   "|",   "^",   "~",  "<",  ">",  "(",  ")",  "[",  "]",  "{",  "}",
    ",",   ":",   ".",   ";",   "=",   "!"};

bool is_string_prefix(const std::string &s) {
  if (s.empty() || s.size() > 2) return false;
  for (char c : s) {
    char l = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (l != 'r' && l != 'b' && l != 'u' && l != 'f') return false;
  }
  return true;
}

class PyLexer {
public:
  PyLexer(const std::string &src, std::size_t begin, std::size_t end, bool expr_mode)
      : src_(src), pos_(begin), end_(end), expr_mode_(expr_mode) {}

  std::vector<Token> run() {
    std::vector<std::size_t> indents{0};
    bool line_start = !expr_mode_;
    int depth = 0;
    bool pending_nl = false;
    while (pos_ < end_) {
      if (line_start && depth == 0) {
        std::size_t p = pos_;
        int col = 0;
        while (p < end_ && (src_[p] == ' ' || src_[p] == '\t' || src_[p] == '\f')) {
          col = src_[p] == '\t' ? (col / 8 + 1) * 8 : col + 1;
          ++p;
        }
        if (p >= end_) {
          pos_ = p;
          break;
        }
        if (src_[p] == '\n' || src_[p] == '\r' || src_[p] == '#') {
          // blank or comment-only line
          while (p < end_ && src_[p] != '\n') ++p;
          pos_ = p < end_ ? p + 1 : p;
          continue;
        }
        pos_ = p;
        line_start = false;
        if (static_cast<std::size_t>(col) > indents.back()) {
          indents.push_back(static_cast<std::size_t>(col));
          push(Tok::indent, "", pos_, pos_);
        } else {
          while (static_cast<std::size_t>(col) < indents.back()) {
            indents.pop_back();
            push(Tok::dedent, "", pos_, pos_);
          }
        }
        pending_nl = false;
      }
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\f' || c == '\r') {
        ++pos_;
        continue;
      }
      if (c == '#') {
        while (pos_ < end_ && src_[pos_] != '\n') ++pos_;
        continue;
      }
      if (c == '\\' && pos_ + 1 < end_ && (src_[pos_ + 1] == '\n' || src_[pos_ + 1] == '\r')) {
        pos_ += 2;
        if (pos_ < end_ && src_[pos_ - 1] == '\r' && src_[pos_] == '\n') ++pos_;
        continue;
      }
      if (c == '\n') {
        if (depth == 0 && !expr_mode_ && !toks_.empty() && toks_.back().kind != Tok::newline &&
            toks_.back().kind != Tok::indent && toks_.back().kind != Tok::dedent)
          push(Tok::newline, "", pos_, pos_ + 1);
        ++pos_;
        // Inside brackets a newline is whitespace; indentation resumes after the closer.
        line_start = !expr_mode_ && depth == 0;
        continue;
      }
      (void)pending_nl;
      if (is_ident_start(static_cast<unsigned char>(c))) {
        std::size_t b = pos_;
        while (pos_ < end_ && is_ident_char(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        std::string word = src_.substr(b, pos_ - b);
        if (pos_ < end_ && (src_[pos_] == '"' || src_[pos_] == '\'') && is_string_prefix(word)) {
          lex_string(b, word);
          continue;
        }
        push(Tok::name, word, b, pos_);
        continue;
      }
      if ((c >= '0' && c <= '9') || (c == '.' && pos_ + 1 < end_ && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        std::size_t b = pos_;
        while (pos_ < end_) {
          char d = src_[pos_];
          if (std::isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '.') {
            ++pos_;
          } else if ((d == '+' || d == '-') && (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E') &&
                     !(src_[b] == '0' && b + 1 < end_ && (src_[b + 1] == 'x' || src_[b + 1] == 'X'))) {
            ++pos_;
          } else {
            break;
          }
        }
        push(Tok::number, src_.substr(b, pos_ - b), b, pos_);
        continue;
      }
      if (c == '"' || c == '\'') {
        lex_string(pos_, "");
        continue;
      }
      std::size_t n = match_punct(src_, pos_, kPyPuncts);
      if (n == 0 || pos_ + n > end_) throw SyntaxError(std::string("unexpected character '") + c + "'", pos_);
      std::string p = src_.substr(pos_, n);
      if (p == "(" || p == "[" || p == "{") ++depth;
      if ((p == ")" || p == "]" || p == "}") && depth > 0) --depth;
      push(Tok::punct, p, pos_, pos_ + n);
      pos_ += n;
    }
    if (!expr_mode_) {
      if (!toks_.empty() && toks_.back().kind != Tok::newline && toks_.back().kind != Tok::dedent)
        push(Tok::newline, "", pos_, pos_);
      while (indents.size() > 1) {
        indents.pop_back();
        push(Tok::dedent, "", pos_, pos_);
      }
    }
    push(Tok::eof, "", pos_, pos_);
    return std::move(toks_);
  }

private:
  void push(Tok k, std::string text, std::size_t b, std::size_t e) {
    Token t;
    t.kind = k;
    t.text = std::move(text);
    t.begin = b;
    t.end = e;
    toks_.push_back(std::move(t));
  }

  void lex_string(std::size_t tok_begin, const std::string &prefix) {
    bool raw = false, fstr = false;
    for (char ch : prefix) {
      char l = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      raw |= l == 'r';
      fstr |= l == 'f';
    }
    char q = src_[pos_];
    bool triple = pos_ + 2 < end_ && src_[pos_ + 1] == q && src_[pos_ + 2] == q;
    std::size_t body = pos_ + (triple ? 3 : 1);
    std::size_t p = body;
    while (true) {
      if (p >= end_) throw SyntaxError("unterminated string", tok_begin);
      char ch = src_[p];
      if (ch == '\\') {
        p += 2;
        continue;
      }
      if (!triple && ch == '\n') throw SyntaxError("unterminated string", tok_begin);
      if (ch == q) {
        if (!triple) break;
        if (p + 2 < end_ + 1 && src_[p + 1] == q && src_[p + 2] == q) break;
      }
      ++p;
    }
    std::size_t body_end = p;
    pos_ = p + (triple ? 3 : 1);
    Token t;
    t.kind = fstr ? Tok::templ : Tok::string;
    t.is_fstring = fstr;
    t.begin = tok_begin;
    t.end = pos_;
    t.text = src_.substr(tok_begin, pos_ - tok_begin);
    std::string rawbody = src_.substr(body, body_end - body);
    if (!fstr) {
      t.value = raw ? rawbody : decode_escapes(rawbody);
    } else {
      split_fstring(body, body_end, raw, t);
    }
    toks_.push_back(std::move(t));
  }

  void split_fstring(std::size_t b, std::size_t e, bool raw, Token &t) {
    std::string chunk;
    std::size_t p = b;
    while (p < e) {
      char ch = src_[p];
      if (ch == '{' && p + 1 < e && src_[p + 1] == '{') {
        chunk += '{';
        p += 2;
        continue;
      }
      if (ch == '}' && p + 1 < e && src_[p + 1] == '}') {
        chunk += '}';
        p += 2;
        continue;
      }
      if (ch == '{') {
        t.parts.push_back(raw ? chunk : decode_escapes(chunk));
        chunk.clear();
        std::size_t eb = p + 1;
        int d = 0;
        std::size_t q = eb;
        std::size_t expr_end = std::string::npos;
        char in_str = 0;
        while (q < e) {
          char c2 = src_[q];
          if (in_str) {
            if (c2 == in_str) in_str = 0;
            ++q;
            continue;
          }
          if (c2 == '\'' || c2 == '"') {
            in_str = c2;
          } else if (c2 == '(' || c2 == '[' || c2 == '{') {
            ++d;
          } else if (c2 == ')' || c2 == ']' || (c2 == '}' && d > 0)) {
            --d;
          } else if (d == 0 && (c2 == '}' || c2 == ':' ||
                                (c2 == '!' && q + 1 < e && src_[q + 1] != '='))) {
            if (expr_end == std::string::npos) expr_end = q;
            if (c2 == '}') break;
          } else if (d == 0 && c2 == '=' && q + 1 < e && src_[q + 1] == '}' &&
                     expr_end == std::string::npos) {
            expr_end = q;
          }
          ++q;
        }
        if (expr_end == std::string::npos) expr_end = q;
        // skip a nested format spec {..} until the closing brace
        int spec_depth = 0;
        while (q < e && !(src_[q] == '}' && spec_depth == 0)) {
          if (src_[q] == '{') ++spec_depth;
          if (src_[q] == '}') --spec_depth;
          ++q;
        }
        t.holes.emplace_back(eb, expr_end);
        p = q + 1;
        continue;
      }
      chunk += ch;
      ++p;
    }
    t.parts.push_back(raw ? chunk : decode_escapes(chunk));
  }

  const std::string &src_;
  std::size_t pos_;
  std::size_t end_;
  bool expr_mode_;
  std::vector<Token> toks_;
};

ExprPtr make(ExprKind k, std::size_t b, std::size_t e, std::string text = {}) {
  auto x = std::make_unique<Expr>();
  x->kind = k;
  x->span = {b, e};
  x->text = std::move(text);
  return x;
}

class PyParser {
public:
  PyParser(const std::string &src, std::vector<Token> toks, Module &module)
      : src_(src), toks_(std::move(toks)), module_(module) {}

  StmtList parse_file() {
    StmtList out;
    while (!at(Tok::eof)) {
      if (at(Tok::newline) || at(Tok::indent) || at(Tok::dedent)) {
        ++i_;
        continue;
      }
      parse_statement_into(out);
    }
    return out;
  }

  ExprPtr parse_expression_only() {
    ExprPtr e = parse_testlist();
    return e;
  }

private:
  // --- token helpers --------------------------------------------------------
  const Token &cur() const { return toks_[i_]; }
  const Token &peek(std::size_t n = 1) const {
    return toks_[std::min(i_ + n, toks_.size() - 1)];
  }
  bool at(Tok k) const { return cur().kind == k; }
  bool at_p(const char *p) const { return cur().punct(p); }
  bool at_n(const char *n) const { return cur().name(n); }
  const Token &take() { return toks_[i_ < toks_.size() - 1 ? i_++ : i_]; }
  bool accept_p(const char *p) {
    if (!at_p(p)) return false;
    ++i_;
    return true;
  }
  bool accept_n(const char *n) {
    if (!at_n(n)) return false;
    ++i_;
    return true;
  }
  const Token &expect_p(const char *p) {
    if (!at_p(p)) fail(std::string("expected '") + p + "'");
    return take();
  }
  std::string expect_name() {
    if (!at(Tok::name)) fail("expected identifier");
    return take().text;
  }
  [[noreturn]] void fail(const std::string &msg) const { throw SyntaxError(msg, cur().begin); }
  std::size_t prev_end() const { return i_ > 0 ? toks_[i_ - 1].end : 0; }

  static bool is_keyword(const std::string &s) {
    static const char *kws[] = {"and", "or", "not", "in", "is", "if", "else", "elif", "for",
                                "while", "def", "class", "return", "lambda", "yield", "import",
                                "from", "as", "with", "try", "except", "finally", "raise",
                                "pass", "break", "continue", "global", "nonlocal", "del",
                                "assert", "async", "await"};
    return std::any_of(std::begin(kws), std::end(kws), [&](const char *k) { return s == k; });
  }

  // --- statements -------------------------------------------------------------
  void recover() {
    int nest = 0;
    while (!at(Tok::eof)) {
      if (at(Tok::indent)) ++nest;
      if (at(Tok::dedent)) {
        if (nest == 0) return;
        --nest;
      }
      if (at(Tok::newline) && nest == 0) {
        ++i_;
        if (at(Tok::indent)) {
          // skip the whole nested block
          int d = 0;
          do {
            if (at(Tok::indent)) ++d;
            if (at(Tok::dedent)) --d;
            ++i_;
          } while (d > 0 && !at(Tok::eof));
        }
        return;
      }
      ++i_;
    }
  }

  void parse_statement_into(StmtList &out) {
    std::size_t start = i_;
    try {
      parse_statement(out);
    } catch (const SyntaxError &err) {
      module_.issues.push_back({err.what(), err.offset});
      module_.unsupported["parse_error"]++;
      if (i_ == start) ++i_;
      recover();
    }
  }

  StmtList parse_block() {
    expect_p(":");
    StmtList out;
    if (!at(Tok::newline)) {
      parse_simple_line(out);
      return out;
    }
    ++i_;
    if (!at(Tok::indent)) fail("expected an indented block");
    ++i_;
    while (!at(Tok::dedent) && !at(Tok::eof)) {
      if (at(Tok::newline)) {
        ++i_;
        continue;
      }
      parse_statement_into(out);
    }
    if (at(Tok::dedent)) ++i_;
    return out;
  }

  void parse_statement(StmtList &out) {
    if (at_p("@")) {
      std::vector<Decorator> decorators;
      while (at_p("@")) {
        std::size_t b = cur().begin;
        ++i_;
        Decorator d;
        d.expr = parse_test();
        d.span = {b, prev_end()};
        decorators.push_back(std::move(d));
        if (at(Tok::newline)) ++i_;
      }
      bool is_async = accept_n("async");
      if (at_n("def")) {
        auto st = parse_def(is_async);
        st->fn->decorators = std::move(decorators);
        out.push_back(std::move(st));
      } else if (at_n("class")) {
        auto st = parse_class();
        st->cls->decorators = std::move(decorators);
        out.push_back(std::move(st));
      } else {
        fail("decorator must precede def or class");
      }
      return;
    }
    if (at_n("async") && (peek().name("def") || peek().name("for") || peek().name("with"))) {
      ++i_;
      if (at_n("def")) {
        out.push_back(parse_def(true));
        return;
      }
    }
    if (at_n("def")) {
      out.push_back(parse_def(false));
      return;
    }
    if (at_n("class")) {
      out.push_back(parse_class());
      return;
    }
    if (at_n("if")) {
      out.push_back(parse_if());
      return;
    }
    if (at_n("while")) {
      std::size_t b = take().begin;
      auto st = std::make_unique<Stmt>();
      st->kind = StmtKind::while_;
      st->cond = parse_namedexpr();
      st->body = parse_block();
      if (accept_n("else")) st->orelse = parse_block();
      st->span = {b, prev_end()};
      out.push_back(std::move(st));
      return;
    }
    if (at_n("for")) {
      std::size_t b = take().begin;
      auto st = std::make_unique<Stmt>();
      st->kind = StmtKind::for_;
      auto target = parse_target_list();
      st->targets.push_back(std::move(target));
      if (!accept_n("in")) fail("expected 'in'");
      st->value = parse_testlist();
      st->body = parse_block();
      if (accept_n("else")) st->orelse = parse_block();
      st->span = {b, prev_end()};
      out.push_back(std::move(st));
      return;
    }
    if (at_n("try")) {
      out.push_back(parse_try());
      return;
    }
    if (at_n("with")) {
      std::size_t b = take().begin;
      auto st = std::make_unique<Stmt>();
      st->kind = StmtKind::with_;
      bool paren = false;
      if (at_p("(") && looks_like_paren_with()) {
        paren = true;
        ++i_;
      }
      do {
        if (paren && at_p(")")) break;
        ExprPtr ctx = parse_test();
        std::unique_ptr<Pattern> bind;
        if (accept_n("as")) bind = parse_target_atom_pattern();
        st->with_items.emplace_back(std::move(ctx), std::move(bind));
      } while (accept_p(","));
      if (paren) expect_p(")");
      st->body = parse_block();
      st->span = {b, prev_end()};
      out.push_back(std::move(st));
      return;
    }
    if (at_n("match") && looks_like_match()) {
      out.push_back(parse_match());
      return;
    }
    parse_simple_line(out);
  }

  bool looks_like_paren_with() const {
    // `with (a as b, c as d):` vs `with (expr) as x:`
    int depth = 0;
    for (std::size_t k = i_; k < toks_.size(); ++k) {
      const Token &t = toks_[k];
      if (t.punct("(") || t.punct("[") || t.punct("{")) ++depth;
      if (t.punct(")") || t.punct("]") || t.punct("}")) {
        if (--depth == 0) return toks_[k + 1].punct(":");
      }
      if (t.kind == Tok::newline || t.kind == Tok::eof) return false;
    }
    return false;
  }

  bool looks_like_match() const {
    const Token &n = peek();
    if (n.punct("=") || n.punct(".") || n.punct(",") || n.punct(")") || n.kind == Tok::newline ||
        (n.kind == Tok::punct && n.text.size() >= 2 && n.text.back() == '='))
      return false;
    int depth = 0;
    std::size_t k = i_ + 1;
    for (; k < toks_.size(); ++k) {
      const Token &t = toks_[k];
      if (t.punct("(") || t.punct("[") || t.punct("{")) ++depth;
      if (t.punct(")") || t.punct("]") || t.punct("}")) --depth;
      if (t.kind == Tok::newline) break;
      if (t.kind == Tok::eof) return false;
    }
    if (k == 0 || !toks_[k - 1].punct(":")) return false;
    return k + 2 < toks_.size() && toks_[k + 1].kind == Tok::indent && toks_[k + 2].name("case");
  }

  std::unique_ptr<Stmt> parse_match() {
    std::size_t b = take().begin;
    auto st = std::make_unique<Stmt>();
    st->kind = StmtKind::match_;
    st->value = parse_testlist();
    expect_p(":");
    if (!at(Tok::newline)) fail("expected newline after match");
    ++i_;
    if (!at(Tok::indent)) fail("expected case block");
    ++i_;
    while (at_n("case")) {
      Case c;
      std::size_t cb = take().begin;
      parse_case_pattern(c);
      if (accept_n("if")) c.guard = parse_namedexpr();
      c.body = parse_block();
      c.span = {cb, prev_end()};
      st->cases.push_back(std::move(c));
      while (at(Tok::newline)) ++i_;
    }
    if (at(Tok::dedent)) ++i_;
    st->span = {b, prev_end()};
    return st;
  }

  void parse_case_pattern(Case &c) {
    bool any_capture = false;
    bool opaque = false;
    do {
      if (at(Tok::string)) {
        std::size_t b = cur().begin;
        std::string v;
        while (at(Tok::string)) v += take().value;
        c.tests.push_back(make(ExprKind::string, b, prev_end(), v));
      } else if (at(Tok::number)) {
        const Token &t = take();
        c.tests.push_back(make(ExprKind::number, t.begin, t.end, t.text));
      } else if (at(Tok::name) && !peek().punct(".") && !peek().punct("(")) {
        const Token &t = take();
        if (t.text == "None" || t.text == "True" || t.text == "False")
          c.tests.push_back(make(ExprKind::constant, t.begin, t.end, t.text));
        else
          any_capture = true; // `_` or a capture binding
      } else {
        // class / sequence / mapping / value patterns: skip to the next | or :
        int depth = 0;
        while (!at(Tok::eof)) {
          if (depth == 0 && (at_p("|") || at_p(":") || at_n("if"))) break;
          if (at_p("(") || at_p("[") || at_p("{")) ++depth;
          if (at_p(")") || at_p("]") || at_p("}")) --depth;
          ++i_;
        }
        opaque = true;
      }
      if (accept_n("as")) expect_name();
    } while (accept_p("|"));
    if (any_capture && !opaque) c.is_default = true;
  }

  std::unique_ptr<Stmt> parse_if() {
    std::size_t b = take().begin; // if / elif
    auto st = std::make_unique<Stmt>();
    st->kind = StmtKind::if_;
    st->cond = parse_namedexpr();
    st->body = parse_block();
    if (at_n("elif")) {
      auto nested = parse_if();
      nested->is_elif = true;
      st->orelse.push_back(std::move(nested));
    } else if (accept_n("else")) {
      st->orelse = parse_block();
    }
    st->span = {b, prev_end()};
    return st;
  }

  std::unique_ptr<Stmt> parse_try() {
    std::size_t b = take().begin;
    auto st = std::make_unique<Stmt>();
    st->kind = StmtKind::try_;
    st->body = parse_block();
    while (at_n("except")) {
      Handler h;
      std::size_t hb = take().begin;
      accept_p("*");
      if (!at_p(":")) {
        parse_test();
        if (accept_n("as")) {
          auto p = std::make_unique<Pattern>();
          p->kind = PatternKind::name;
          p->span = {cur().begin, cur().end};
          p->name = expect_name();
          h.binding = std::move(p);
        } else if (accept_p(",")) {
          parse_test();
        }
      }
      h.body = parse_block();
      h.span = {hb, prev_end()};
      st->handlers.push_back(std::move(h));
    }
    if (accept_n("else")) st->orelse = parse_block();
    if (accept_n("finally")) st->finalbody = parse_block();
    st->span = {b, prev_end()};
    return st;
  }

  std::unique_ptr<Stmt> parse_def(bool is_async) {
    std::size_t b = take().begin; // def
    auto fn = std::make_shared<Function>();
    fn->is_async = is_async;
    fn->name = expect_name();
    if (at_p("[")) skip_balanced("[", "]"); // PEP 695 type params
    expect_p("(");
    fn->params = parse_params(")", true);
    expect_p(")");
    if (accept_p("->")) parse_test();
    fn_stack_.push_back(fn.get());
    fn->body = parse_block();
    fn_stack_.pop_back();
    fn->span = {b, prev_end()};
    auto st = std::make_unique<Stmt>();
    st->kind = StmtKind::func_def;
    st->fn = fn;
    st->span = fn->span;
    return st;
  }

  void skip_balanced(const char *open, const char *close) {
    int depth = 0;
    do {
      if (at_p(open)) ++depth;
      if (at_p(close)) --depth;
      ++i_;
    } while (depth > 0 && !at(Tok::eof));
  }

  std::vector<Param> parse_params(const char *closer, bool annotations) {
    std::vector<Param> params;
    while (!at_p(closer) && !at(Tok::eof)) {
      Param p;
      if (accept_p("/")) {
        if (!accept_p(",")) break;
        continue;
      }
      if (accept_p("**")) {
        p.kwrest = true;
      } else if (accept_p("*")) {
        p.rest = true;
        if (at_p(",") || at_p(closer)) { // bare `*`
          accept_p(",");
          continue;
        }
      }
      p.pattern.kind = PatternKind::name;
      p.pattern.span = {cur().begin, cur().end};
      p.pattern.name = expect_name();
      if (annotations && accept_p(":")) {
        std::size_t ab = cur().begin;
        parse_test();
        p.annotation = src_.substr(ab, prev_end() - ab);
      }
      if (accept_p("=")) p.pattern.default_value = parse_test();
      params.push_back(std::move(p));
      if (!accept_p(",")) break;
    }
    return params;
  }

  std::unique_ptr<Stmt> parse_class() {
    std::size_t b = take().begin;
    auto cls = std::make_shared<ClassDef>();
    cls->name = expect_name();
    if (at_p("[")) skip_balanced("[", "]");
    if (accept_p("(")) {
      while (!at_p(")") && !at(Tok::eof)) {
        if (at(Tok::name) && peek().punct("=")) {
          i_ += 2;
          parse_test();
        } else {
          accept_p("*");
          accept_p("**");
          cls->bases.push_back(parse_test());
        }
        if (!accept_p(",")) break;
      }
      expect_p(")");
    }
    StmtList body = parse_block();
    for (auto &s : body) {
      if (s->kind == StmtKind::func_def) {
        s->fn->is_method = true;
        for (const auto &d : s->fn->decorators)
          if (d.expr && d.expr->kind == ExprKind::name &&
              (d.expr->text == "staticmethod" || d.expr->text == "classmethod"))
            s->fn->is_static = d.expr->text == "staticmethod";
        cls->methods.push_back(s->fn);
      } else {
        cls->body.push_back(std::move(s));
      }
    }
    cls->span = {b, prev_end()};
    auto st = std::make_unique<Stmt>();
    st->kind = StmtKind::class_def;
    st->cls = cls;
    st->span = cls->span;
    return st;
  }

  void parse_simple_line(StmtList &out) {
    out.push_back(parse_small());
    while (accept_p(";")) {
      if (at(Tok::newline) || at(Tok::eof)) break;
      out.push_back(parse_small());
    }
    if (at(Tok::newline)) {
      ++i_;
    } else if (!at(Tok::eof) && !at(Tok::dedent)) {
      fail("expected end of statement");
    }
  }

  std::unique_ptr<Stmt> simple(StmtKind k, std::size_t b) {
    auto st = std::make_unique<Stmt>();
    st->kind = k;
    st->span = {b, prev_end()};
    return st;
  }

  std::unique_ptr<Stmt> parse_small() {
    std::size_t b = cur().begin;
    if (accept_n("pass") || accept_n("break") || accept_n("continue")) return simple(StmtKind::pass, b);
    if (at_n("global") || at_n("nonlocal")) {
      ++i_;
      do {
        expect_name();
      } while (accept_p(","));
      return simple(StmtKind::pass, b);
    }
    if (accept_n("del")) {
      parse_testlist();
      return simple(StmtKind::pass, b);
    }
    if (accept_n("assert")) {
      parse_test();
      if (accept_p(",")) parse_test();
      return simple(StmtKind::pass, b);
    }
    if (accept_n("return")) {
      auto st = std::make_unique<Stmt>();
      st->kind = StmtKind::ret;
      if (!at(Tok::newline) && !at_p(";") && !at(Tok::eof) && !at(Tok::dedent))
        st->value = parse_testlist_star();
      st->span = {b, prev_end()};
      return st;
    }
    if (accept_n("raise")) {
      auto st = std::make_unique<Stmt>();
      st->kind = StmtKind::throw_;
      if (!at(Tok::newline) && !at_p(";") && !at(Tok::eof)) {
        st->value = parse_test();
        if (accept_n("from")) parse_test();
      }
      st->span = {b, prev_end()};
      return st;
    }
    if (at_n("import")) {
      ++i_;
      auto block = std::make_unique<Stmt>();
      block->kind = StmtKind::block;
      do {
        std::size_t ib = cur().begin;
        std::string mod = dotted_name();
        auto st = std::make_unique<Stmt>();
        st->kind = StmtKind::import;
        st->import.module = mod;
        if (accept_n("as")) {
          st->import.namespace_local = expect_name();
        } else {
          st->import.namespace_local = mod.substr(0, mod.find('.'));
          if (mod.find('.') != std::string::npos) st->import.module = st->import.namespace_local;
        }
        st->span = {ib, prev_end()};
        block->body.push_back(std::move(st));
      } while (accept_p(","));
      block->span = {b, prev_end()};
      return block;
    }
    if (at_n("from")) {
      ++i_;
      auto st = std::make_unique<Stmt>();
      st->kind = StmtKind::import;
      int level = 0;
      while (at_p(".") || at_p("...")) level += static_cast<int>(take().text.size());
      if (!at_n("import")) st->import.module = dotted_name();
      st->import.level = level;
      if (!accept_n("import")) fail("expected 'import'");
      bool paren = accept_p("(");
      do {
        if (paren && at_p(")")) break;
        ImportName n;
        if (accept_p("*")) {
          n.imported = n.local = "*";
        } else {
          n.imported = expect_name();
          n.local = accept_n("as") ? expect_name() : n.imported;
        }
        st->import.names.push_back(n);
      } while (accept_p(","));
      if (paren) expect_p(")");
      st->span = {b, prev_end()};
      return st;
    }
    // expression statement / assignment
    ExprPtr first = parse_testlist_star();
    if (at_p(":") ) {
      // annotated assignment
      ++i_;
      parse_test();
      auto st = std::make_unique<Stmt>();
      if (accept_p("=")) {
        st->kind = StmtKind::assign;
        st->targets.push_back(to_pattern(std::move(first)));
        st->value = parse_testlist_star();
      } else {
        st->kind = StmtKind::pass;
      }
      st->span = {b, prev_end()};
      return st;
    }
    if (at_p("=")) {
      auto st = std::make_unique<Stmt>();
      st->kind = StmtKind::assign;
      std::vector<ExprPtr> chain;
      chain.push_back(std::move(first));
      while (accept_p("=")) {
        if (at_n("yield")) chain.push_back(parse_yield());
        else chain.push_back(parse_testlist_star());
      }
      st->value = std::move(chain.back());
      chain.pop_back();
      for (auto &t : chain) st->targets.push_back(to_pattern(std::move(t)));
      st->span = {b, prev_end()};
      return st;
    }
    if (cur().kind == Tok::punct && cur().text.size() >= 2 && cur().text.back() == '=' &&
        cur().text != "==" && cur().text != "!=" && cur().text != "<=" && cur().text != ">=") {
      auto st = std::make_unique<Stmt>();
      st->kind = StmtKind::aug_assign;
      st->op = take().text;
      st->targets.push_back(to_pattern(std::move(first)));
      st->value = parse_testlist();
      st->span = {b, prev_end()};
      return st;
    }
    auto st = std::make_unique<Stmt>();
    st->kind = StmtKind::expr;
    st->value = std::move(first);
    st->span = {b, prev_end()};
    return st;
  }

  std::string dotted_name() {
    std::string s = expect_name();
    while (at_p(".") && peek().kind == Tok::name) {
      ++i_;
      s += "." + take().text;
    }
    return s;
  }

  std::unique_ptr<Pattern> to_pattern(ExprPtr e) {
    auto p = std::make_unique<Pattern>();
    p->span = e->span;
    switch (e->kind) {
    case ExprKind::name:
      p->kind = PatternKind::name;
      p->name = e->text;
      break;
    case ExprKind::array:
      p->kind = PatternKind::array;
      for (auto &k : e->kids) p->elems.push_back(to_pattern(std::move(k)));
      break;
    case ExprKind::spread:
      p->kind = PatternKind::rest;
      p->rest_of = to_pattern(std::move(e->kids[0]));
      break;
    case ExprKind::member:
    case ExprKind::index:
      p->kind = PatternKind::target;
      p->target = std::move(e);
      break;
    default:
      p->kind = PatternKind::skip;
      break;
    }
    return p;
  }

  std::unique_ptr<Pattern> parse_target_atom_pattern() {
    ExprPtr e = parse_primary_expr();
    return to_pattern(std::move(e));
  }

  std::unique_ptr<Pattern> parse_target_list() {
    std::size_t b = cur().begin;
    std::vector<ExprPtr> items;
    do {
      if (at_n("in")) break;
      if (accept_p("*")) {
        auto s = make(ExprKind::spread, b, 0);
        s->kids.push_back(parse_bitor());
        s->span.end = prev_end();
        items.push_back(std::move(s));
      } else {
        items.push_back(parse_bitor());
      }
    } while (accept_p(","));
    if (items.size() == 1) return to_pattern(std::move(items[0]));
    auto arr = make(ExprKind::array, b, prev_end());
    arr->kids = std::move(items);
    return to_pattern(std::move(arr));
  }

  // --- expressions ------------------------------------------------------------
  ExprPtr parse_yield() {
    std::size_t b = take().begin;
    if (!fn_stack_.empty()) fn_stack_.back()->is_generator = true;
    auto e = make(ExprKind::opaque, b, 0, "yield");
    accept_n("from");
    if (!at(Tok::newline) && !at_p(")") && !at_p(";") && !at_p("=") && !at(Tok::eof))
      e->kids.push_back(parse_testlist());
    e->span.end = prev_end();
    return e;
  }

  ExprPtr parse_testlist_star() {
    if (at_n("yield")) return parse_yield();
    std::size_t b = cur().begin;
    std::vector<ExprPtr> items;
    bool trailing = false;
    do {
      trailing = false;
      if (at(Tok::newline) || at_p("=") || at_p(")") || at(Tok::eof) || at_p(";") ||
          (at_p(":") && !items.empty()))
        break;
      if (accept_p("*")) {
        auto s = make(ExprKind::spread, b, 0);
        s->kids.push_back(parse_bitor());
        s->span = {s->kids[0]->span.begin, prev_end()};
        items.push_back(std::move(s));
      } else {
        items.push_back(parse_namedexpr());
      }
      trailing = at_p(",");
    } while (accept_p(","));
    if (items.size() == 1 && !trailing) return std::move(items[0]);
    auto arr = make(ExprKind::array, b, prev_end(), "tuple");
    arr->kids = std::move(items);
    return arr;
  }

  ExprPtr parse_testlist() { return parse_testlist_star(); }

  ExprPtr parse_namedexpr() {
    if (at(Tok::name) && peek().punct(":=")) {
      const Token &n = take();
      ++i_;
      auto e = make(ExprKind::binary, n.begin, 0, ":=");
      e->kids.push_back(make(ExprKind::name, n.begin, n.end, n.text));
      e->kids.push_back(parse_test());
      e->span.end = prev_end();
      return e;
    }
    return parse_test();
  }

  ExprPtr parse_test() {
    if (at_n("lambda")) return parse_lambda();
    std::size_t b = cur().begin;
    ExprPtr e = parse_or();
    if (at_n("if") ) {
      // conditional expression; `if` inside comprehensions is handled by the caller
      std::size_t save = i_;
      ++i_;
      ExprPtr cond = parse_or();
      if (!accept_n("else")) {
        i_ = save;
        return e;
      }
      ExprPtr other = parse_test();
      auto c = make(ExprKind::conditional, b, prev_end());
      c->kids.push_back(std::move(cond));
      c->kids.push_back(std::move(e));
      c->kids.push_back(std::move(other));
      return c;
    }
    return e;
  }

  ExprPtr parse_test_nocond() {
    if (at_n("lambda")) return parse_lambda();
    return parse_or();
  }

  ExprPtr parse_lambda() {
    std::size_t b = take().begin;
    auto fn = std::make_shared<Function>();
    fn->name = "<lambda>";
    fn->params = parse_params(":", false);
    expect_p(":");
    fn->expr_body = parse_test();
    fn->span = {b, prev_end()};
    auto e = make(ExprKind::lambda, b, prev_end());
    e->fn = fn;
    return e;
  }

  ExprPtr binary(std::string op, ExprPtr l, ExprPtr r) {
    auto e = make(ExprKind::binary, l->span.begin, r->span.end, std::move(op));
    e->kids.push_back(std::move(l));
    e->kids.push_back(std::move(r));
    return e;
  }

  ExprPtr parse_or() {
    ExprPtr l = parse_and();
    while (accept_n("or")) l = binary("or", std::move(l), parse_and());
    return l;
  }
  ExprPtr parse_and() {
    ExprPtr l = parse_not();
    while (accept_n("and")) l = binary("and", std::move(l), parse_not());
    return l;
  }
  ExprPtr parse_not() {
    if (at_n("not")) {
      std::size_t b = take().begin;
      auto e = make(ExprKind::unary, b, 0, "not");
      e->kids.push_back(parse_not());
      e->span.end = prev_end();
      return e;
    }
    return parse_comparison();
  }
  ExprPtr parse_comparison() {
    ExprPtr l = parse_bitor();
    while (true) {
      std::string op;
      if (at_p("<") || at_p(">") || at_p("==") || at_p(">=") || at_p("<=") || at_p("!=")) {
        op = take().text;
      } else if (at_n("in")) {
        ++i_;
        op = "in";
      } else if (at_n("not") && peek().name("in")) {
        i_ += 2;
        op = "not in";
      } else if (at_n("is")) {
        ++i_;
        op = accept_n("not") ? "is not" : "is";
      } else {
        break;
      }
      l = binary(op, std::move(l), parse_bitor());
    }
    return l;
  }
  ExprPtr parse_bitor() {
    ExprPtr l = parse_bitxor();
    while (at_p("|")) {
      ++i_;
      l = binary("|", std::move(l), parse_bitxor());
    }
    return l;
  }
  ExprPtr parse_bitxor() {
    ExprPtr l = parse_bitand();
    while (at_p("^")) {
      ++i_;
      l = binary("^", std::move(l), parse_bitand());
    }
    return l;
  }
  ExprPtr parse_bitand() {
    ExprPtr l = parse_shift();
    while (at_p("&")) {
      ++i_;
      l = binary("&", std::move(l), parse_shift());
    }
    return l;
  }
  ExprPtr parse_shift() {
    ExprPtr l = parse_arith();
    while (at_p("<<") || at_p(">>")) {
      std::string op = take().text;
      l = binary(op, std::move(l), parse_arith());
    }
    return l;
  }
  ExprPtr parse_arith() {
    ExprPtr l = parse_term();
    while (at_p("+") || at_p("-")) {
      std::string op = take().text;
      l = binary(op, std::move(l), parse_term());
    }
    return l;
  }
  ExprPtr parse_term() {
    ExprPtr l = parse_factor();
    while (at_p("*") || at_p("/") || at_p("//") || at_p("%") || at_p("@")) {
      std::string op = take().text;
      l = binary(op, std::move(l), parse_factor());
    }
    return l;
  }
  ExprPtr parse_factor() {
    if (at_p("+") || at_p("-") || at_p("~")) {
      const Token &t = take();
      auto e = make(ExprKind::unary, t.begin, 0, t.text);
      e->kids.push_back(parse_factor());
      e->span.end = prev_end();
      return e;
    }
    return parse_power();
  }
  ExprPtr parse_power() {
    ExprPtr base;
    if (at_n("await")) {
      std::size_t b = take().begin;
      auto e = make(ExprKind::await, b, 0);
      e->kids.push_back(parse_primary_expr());
      e->span.end = prev_end();
      base = std::move(e);
    } else {
      base = parse_primary_expr();
    }
    if (at_p("**")) {
      ++i_;
      return binary("**", std::move(base), parse_factor());
    }
    return base;
  }

  ExprPtr parse_primary_expr() {
    ExprPtr e = parse_atom();
    while (true) {
      if (at_p(".")) {
        ++i_;
        std::string name = expect_name();
        auto m = make(ExprKind::member, e->span.begin, prev_end(), name);
        m->kids.push_back(std::move(e));
        e = std::move(m);
      } else if (at_p("(")) {
        e = parse_call(std::move(e));
      } else if (at_p("[")) {
        ++i_;
        auto ix = make(ExprKind::index, e->span.begin, 0);
        ix->kids.push_back(std::move(e));
        ix->kids.push_back(parse_subscript());
        expect_p("]");
        ix->span.end = prev_end();
        e = std::move(ix);
      } else {
        break;
      }
    }
    return e;
  }

  ExprPtr parse_subscript() {
    std::size_t b = cur().begin;
    std::vector<ExprPtr> items;
    bool slice = false;
    do {
      if (at_p("]")) break;
      ExprPtr lo;
      if (!at_p(":")) lo = parse_test();
      if (at_p(":")) {
        slice = true;
        while (accept_p(":")) {
          if (!at_p("]") && !at_p(":") && !at_p(",")) parse_test();
        }
        items.push_back(make(ExprKind::opaque, b, prev_end(), "slice"));
        if (lo) items.back()->kids.push_back(std::move(lo));
      } else {
        items.push_back(std::move(lo));
      }
    } while (accept_p(","));
    (void)slice;
    if (items.size() == 1) return std::move(items[0]);
    auto arr = make(ExprKind::array, b, prev_end(), "tuple");
    arr->kids = std::move(items);
    return arr;
  }

  ExprPtr parse_call(ExprPtr callee) {
    expect_p("(");
    auto call = make(ExprKind::call, callee->span.begin, 0);
    call->kids.push_back(std::move(callee));
    while (!at_p(")") && !at(Tok::eof)) {
      if (accept_p("**")) {
        auto s = make(ExprKind::spread, prev_end(), 0, "**");
        s->kids.push_back(parse_test());
        s->span.end = prev_end();
        call->kids.push_back(std::move(s));
        call->arg_names.push_back("**");
      } else if (accept_p("*")) {
        auto s = make(ExprKind::spread, prev_end(), 0, "*");
        s->kids.push_back(parse_test());
        s->span.end = prev_end();
        call->kids.push_back(std::move(s));
        call->arg_names.push_back("");
      } else if (at(Tok::name) && peek().punct("=")) {
        std::string kw = take().text;
        ++i_;
        call->kids.push_back(parse_test());
        call->arg_names.push_back(kw);
      } else {
        ExprPtr a = parse_namedexpr();
        if (at_n("for") || (at_n("async") && peek().name("for"))) a = parse_comprehension(std::move(a), nullptr, "genexp");
        call->kids.push_back(std::move(a));
        call->arg_names.push_back("");
      }
      if (!accept_p(",")) break;
    }
    expect_p(")");
    call->span.end = prev_end();
    return call;
  }

  ExprPtr parse_comprehension(ExprPtr elt, ExprPtr value, const std::string &kind) {
    auto c = make(ExprKind::comprehension, elt->span.begin, 0, kind);
    if (value) {
      auto pair = make(ExprKind::array, elt->span.begin, value->span.end, "tuple");
      pair->kids.push_back(std::move(elt));
      pair->kids.push_back(std::move(value));
      c->kids.push_back(std::move(pair));
    } else {
      c->kids.push_back(std::move(elt));
    }
    c->arg_names.push_back("elt");
    while (at_n("for") || (at_n("async") && peek().name("for"))) {
      accept_n("async");
      ++i_;
      auto target = parse_target_list();
      if (!accept_n("in")) fail("expected 'in' in comprehension");
      ExprPtr iter = parse_or();
      std::string names;
      collect_names(*target, names);
      c->kids.push_back(std::move(iter));
      c->arg_names.push_back("iter:" + names);
      while (at_n("if")) {
        ++i_;
        c->kids.push_back(parse_test_nocond());
        c->arg_names.push_back("cond");
      }
    }
    c->span.end = prev_end();
    return c;
  }

  static void collect_names(const Pattern &p, std::string &out) {
    if (p.kind == PatternKind::name) {
      if (!out.empty()) out += ',';
      out += p.name;
    }
    for (const auto &e : p.elems) collect_names(*e, out);
    if (p.rest_of) collect_names(*p.rest_of, out);
  }

  ExprPtr parse_atom() {
    const Token &t = cur();
    switch (t.kind) {
    case Tok::name: {
      if (t.text == "None" || t.text == "True" || t.text == "False") {
        ++i_;
        return make(ExprKind::constant, t.begin, t.end, t.text);
      }
      if (t.text == "lambda") return parse_lambda();
      if (t.text == "yield") return parse_yield();
      if (is_keyword(t.text) && t.text != "await") fail("unexpected keyword '" + t.text + "'");
      ++i_;
      return make(ExprKind::name, t.begin, t.end, t.text);
    }
    case Tok::number:
      ++i_;
      return make(ExprKind::number, t.begin, t.end, t.text);
    case Tok::string:
    case Tok::templ:
      return parse_strings();
    case Tok::punct:
      break;
    default:
      fail("unexpected token");
    }
    std::size_t b = t.begin;
    if (accept_p("...")) return make(ExprKind::constant, b, prev_end(), "...");
    if (accept_p("(")) {
      if (accept_p(")")) return make(ExprKind::array, b, prev_end(), "tuple");
      if (at_n("yield")) {
        auto y = parse_yield();
        expect_p(")");
        return y;
      }
      std::vector<ExprPtr> items;
      bool tuple = false;
      ExprPtr first = at_p("*") ? parse_star() : parse_namedexpr();
      if (at_n("for") || (at_n("async") && peek().name("for"))) {
        auto c = parse_comprehension(std::move(first), nullptr, "genexp");
        expect_p(")");
        c->span = {b, prev_end()};
        return c;
      }
      items.push_back(std::move(first));
      while (accept_p(",")) {
        tuple = true;
        if (at_p(")")) break;
        items.push_back(at_p("*") ? parse_star() : parse_namedexpr());
      }
      expect_p(")");
      if (!tuple) {
        items[0]->span = {b, prev_end()};
        return std::move(items[0]);
      }
      auto arr = make(ExprKind::array, b, prev_end(), "tuple");
      arr->kids = std::move(items);
      return arr;
    }
    if (accept_p("[")) {
      auto arr = make(ExprKind::array, b, 0, "list");
      if (!at_p("]")) {
        ExprPtr first = at_p("*") ? parse_star() : parse_namedexpr();
        if (at_n("for") || (at_n("async") && peek().name("for"))) {
          auto c = parse_comprehension(std::move(first), nullptr, "listcomp");
          expect_p("]");
          c->span = {b, prev_end()};
          return c;
        }
        arr->kids.push_back(std::move(first));
        while (accept_p(",")) {
          if (at_p("]")) break;
          arr->kids.push_back(at_p("*") ? parse_star() : parse_namedexpr());
        }
      }
      expect_p("]");
      arr->span.end = prev_end();
      return arr;
    }
    if (accept_p("{")) {
      auto obj = make(ExprKind::object, b, 0);
      if (accept_p("}")) {
        obj->span.end = prev_end();
        return obj;
      }
      // dict or set
      bool is_set = false;
      bool first = true;
      while (!at_p("}") && !at(Tok::eof)) {
        Property p;
        p.span.begin = cur().begin;
        if (accept_p("**")) {
          p.spread = true;
          p.value = parse_bitor();
        } else {
          ExprPtr k = at_p("*") ? parse_star() : parse_test();
          if (first && !at_p(":")) is_set = true;
          if (is_set) {
            if (at_n("for")) {
              auto c = parse_comprehension(std::move(k), nullptr, "setcomp");
              expect_p("}");
              c->span = {b, prev_end()};
              return c;
            }
            p.value = std::move(k);
          } else {
            expect_p(":");
            ExprPtr v = parse_test();
            if (first && at_n("for")) {
              auto c = parse_comprehension(std::move(k), std::move(v), "dictcomp");
              expect_p("}");
              c->span = {b, prev_end()};
              return c;
            }
            if (k->kind == ExprKind::string) p.key = k->text;
            else p.computed_key = std::move(k);
            p.value = std::move(v);
          }
        }
        p.span.end = prev_end();
        obj->props.push_back(std::move(p));
        first = false;
        if (!accept_p(",")) break;
      }
      expect_p("}");
      obj->span.end = prev_end();
      if (is_set) {
        auto arr = make(ExprKind::array, b, prev_end(), "set");
        for (auto &p : obj->props) arr->kids.push_back(std::move(p.value));
        return arr;
      }
      return obj;
    }
    fail("unexpected '" + t.text + "'");
  }

  ExprPtr parse_star() {
    std::size_t b = take().begin;
    auto s = make(ExprKind::spread, b, 0);
    s->kids.push_back(parse_bitor());
    s->span.end = prev_end();
    return s;
  }

  ExprPtr parse_strings() {
    std::size_t b = cur().begin;
    bool any_template = false;
    std::vector<const Token *> toks;
    while (at(Tok::string) || at(Tok::templ)) {
      any_template |= cur().kind == Tok::templ;
      toks.push_back(&take());
    }
    if (!any_template) {
      std::string v;
      for (const auto *t : toks) v += t->value;
      return make(ExprKind::string, b, prev_end(), v);
    }
    auto e = make(ExprKind::templ, b, prev_end());
    std::string pending;
    for (const auto *t : toks) {
      if (t->kind == Tok::string) {
        pending += t->value;
        continue;
      }
      for (std::size_t k = 0; k < t->parts.size(); ++k) {
        pending += t->parts[k];
        if (k < t->holes.size()) {
          e->parts.push_back(pending);
          pending.clear();
          e->kids.push_back(parse_hole(t->holes[k].first, t->holes[k].second));
        }
      }
    }
    e->parts.push_back(pending);
    return e;
  }

  ExprPtr parse_hole(std::size_t b, std::size_t e) {
    PyLexer lex(src_, b, e, true);
    Module scratch;
    PyParser sub(src_, lex.run(), scratch);
    ExprPtr x = sub.parse_expression_only();
    return x;
  }

  const std::string &src_;
  std::vector<Token> toks_;
  std::size_t i_ = 0;
  Module &module_;
  std::vector<Function *> fn_stack_;
};

} // namespace

Module parse_python(const std::string &text) {
  Module module;
  std::vector<Token> toks;
  try {
    toks = PyLexer(text, 0, text.size(), false).run();
  } catch (const SyntaxError &err) {
    module.issues.push_back({err.what(), err.offset});
    module.unsupported["parse_error"]++;
    // Lex the prefix that is well-formed so the rest of the file still counts.
    std::size_t cut = text.rfind('\n', err.offset);
    if (cut == std::string::npos) return module;
    try {
      toks = PyLexer(text, 0, cut, false).run();
    } catch (const SyntaxError &) {
      return module;
    }
  }
  PyParser parser(text, std::move(toks), module);
  module.body = parser.parse_file();
  return module;
}

} // namespace mcpflow::frontend
