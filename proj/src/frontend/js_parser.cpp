// Recursive-descent parser for JavaScript and TypeScript. Type syntax is
// recognised and skipped; only the value-level program is kept.

#include "parsers.hpp"

#include <algorithm>
#include <set>

namespace mcpflow::frontend {

using namespace mcpflow::ast;

namespace {

const std::vector<std::string> kJsPuncts = {
    ">>>=", "...", "===", "!==", "**=", "<<=", ">>=", ">>>", "&&=", "||=", "?\?=", "=>", "==",
    "!=",   "<=",  ">=",  "&&",  "||",  "??",  "?.",  "++",  "--",  "+=",  "-=",  "*=", "/=",
    "%=",   "&=",  "|=",  "^=",  "**",  "<<",  ">>",  "{",   "}",   "(",   ")",   "[",  "]",
    ";",    ",",   "<",   ">",   "+",   "-",   "*",   "/",   "%",   "&",   "|",   "^",  "!",
    "~",    "?",   ":",   "=",   ".",   "@"};

const std::set<std::string> kRegexAfterWords = {"return", "typeof", "instanceof", "in",
                                                "of",     "new",    "delete",     "void",
                                                "throw",  "case",   "do",         "else",
                                                "yield",  "await"};

/// Returns the offset of the `}` closing a template hole that starts at `p`.
std::size_t skip_template_hole(const std::string &s, std::size_t p, std::size_t end);

/// Returns the offset just past the closing backtick of a template at `p`.
std::size_t skip_template(const std::string &s, std::size_t p, std::size_t end) {
  ++p; // opening backtick
  while (p < end) {
    char c = s[p];
    if (c == '\\') {
      p += 2;
      continue;
    }
    if (c == '`') return p + 1;
    if (c == '$' && p + 1 < end && s[p + 1] == '{') {
      p = skip_template_hole(s, p + 2, end) + 1;
      continue;
    }
    ++p;
  }
  throw SyntaxError("unterminated template literal", p);
}

std::size_t skip_template_hole(const std::string &s, std::size_t p, std::size_t end) {
  int depth = 0;
  while (p < end) {
    char c = s[p];
    if (c == '\'' || c == '"') {
      char q = c;
      ++p;
      while (p < end && s[p] != q) p += s[p] == '\\' ? 2 : 1;
      ++p;
      continue;
    }
    if (c == '`') {
      p = skip_template(s, p, end);
      continue;
    }
    if (c == '/' && p + 1 < end && s[p + 1] == '/') {
      while (p < end && s[p] != '\n') ++p;
      continue;
    }
    if (c == '/' && p + 1 < end && s[p + 1] == '*') {
      std::size_t q = s.find("*/", p + 2);
      p = q == std::string::npos ? end : q + 2;
      continue;
    }
    if (c == '{') ++depth;
    if (c == '}') {
      if (depth == 0) return p;
      --depth;
    }
    ++p;
  }
  throw SyntaxError("unterminated template interpolation", p);
}

class JsLexer {
public:
  JsLexer(const std::string &src, std::size_t begin, std::size_t end)
      : src_(src), pos_(begin), end_(end) {}

  std::vector<Token> run() {
    bool nl = false;
    if (src_.compare(pos_, 2, "#!") == 0) {
      while (pos_ < end_ && src_[pos_] != '\n') ++pos_;
    }
    while (pos_ < end_) {
      char c = src_[pos_];
      if (c == '\n') {
        nl = true;
        ++pos_;
        continue;
      }
      if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
        ++pos_;
        continue;
      }
      if (c == '/' && pos_ + 1 < end_ && src_[pos_ + 1] == '/') {
        while (pos_ < end_ && src_[pos_] != '\n') ++pos_;
        continue;
      }
      if (c == '/' && pos_ + 1 < end_ && src_[pos_ + 1] == '*') {
        std::size_t q = src_.find("*/", pos_ + 2);
        if (q == std::string::npos || q >= end_) throw SyntaxError("unterminated comment", pos_);
        if (src_.find('\n', pos_) < q) nl = true;
        pos_ = q + 2;
        continue;
      }
      Token t;
      t.begin = pos_;
      t.nl_before = nl;
      nl = false;
      if (is_ident_start(static_cast<unsigned char>(c)) ||
          (c == '#' && pos_ + 1 < end_ && is_ident_start(static_cast<unsigned char>(src_[pos_ + 1])))) {
        ++pos_;
        while (pos_ < end_ && is_ident_char(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        t.kind = Tok::name;
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '.' && pos_ + 1 < end_ && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        bool hex = c == '0' && pos_ + 1 < end_ && (src_[pos_ + 1] == 'x' || src_[pos_ + 1] == 'X');
        while (pos_ < end_) {
          char d = src_[pos_];
          if (std::isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '.') {
            ++pos_;
          } else if (!hex && (d == '+' || d == '-') && (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E')) {
            ++pos_;
          } else {
            break;
          }
        }
        t.kind = Tok::number;
      } else if (c == '"' || c == '\'') {
        ++pos_;
        while (pos_ < end_ && src_[pos_] != c) {
          if (src_[pos_] == '\n') throw SyntaxError("unterminated string", t.begin);
          pos_ += src_[pos_] == '\\' ? 2 : 1;
        }
        if (pos_ >= end_) throw SyntaxError("unterminated string", t.begin);
        ++pos_;
        t.kind = Tok::string;
        t.value = decode_escapes(src_.substr(t.begin + 1, pos_ - t.begin - 2));
      } else if (c == '`') {
        lex_template(t);
      } else if (c == '/' && regex_allowed()) {
        lex_regex(t);
      } else {
        std::size_t n = match_punct(src_, pos_, kJsPuncts);
        if (n == 0) throw SyntaxError(std::string("unexpected character '") + c + "'", pos_);
        if (n == 2 && src_.compare(pos_, 2, "?.") == 0 && pos_ + 2 < end_ &&
            std::isdigit(static_cast<unsigned char>(src_[pos_ + 2])))
          n = 1;
        pos_ += n;
        t.kind = Tok::punct;
      }
      t.end = pos_;
      if (t.kind != Tok::string && t.kind != Tok::templ) t.text = src_.substr(t.begin, t.end - t.begin);
      else t.text = src_.substr(t.begin, t.end - t.begin);
      toks_.push_back(std::move(t));
    }
    Token eof;
    eof.kind = Tok::eof;
    eof.begin = eof.end = pos_;
    eof.nl_before = true;
    toks_.push_back(eof);
    return std::move(toks_);
  }

private:
  bool regex_allowed() const {
    if (toks_.empty()) return true;
    const Token &p = toks_.back();
    if (p.kind == Tok::name) return kRegexAfterWords.count(p.text) > 0;
    if (p.kind == Tok::punct)
      return !(p.text == ")" || p.text == "]" || p.text == "}" || p.text == "++" || p.text == "--");
    return false;
  }

  void lex_regex(Token &t) {
    ++pos_;
    bool in_class = false;
    while (pos_ < end_) {
      char c = src_[pos_];
      if (c == '\n') throw SyntaxError("unterminated regex", t.begin);
      if (c == '\\') {
        pos_ += 2;
        continue;
      }
      if (c == '[') in_class = true;
      if (c == ']') in_class = false;
      if (c == '/' && !in_class) break;
      ++pos_;
    }
    if (pos_ >= end_) throw SyntaxError("unterminated regex", t.begin);
    ++pos_;
    while (pos_ < end_ && is_ident_char(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    t.kind = Tok::regex;
  }

  void lex_template(Token &t) {
    t.kind = Tok::templ;
    std::size_t p = pos_ + 1;
    std::string chunk_raw;
    while (true) {
      if (p >= end_) throw SyntaxError("unterminated template literal", t.begin);
      char c = src_[p];
      if (c == '\\') {
        chunk_raw += src_.substr(p, 2);
        p += 2;
        continue;
      }
      if (c == '`') {
        ++p;
        break;
      }
      if (c == '$' && p + 1 < end_ && src_[p + 1] == '{') {
        t.parts.push_back(decode_escapes(chunk_raw));
        chunk_raw.clear();
        std::size_t close = skip_template_hole(src_, p + 2, end_);
        t.holes.emplace_back(p + 2, close);
        p = close + 1;
        continue;
      }
      chunk_raw += c;
      ++p;
    }
    t.parts.push_back(decode_escapes(chunk_raw));
    pos_ = p;
  }

  const std::string &src_;
  std::size_t pos_;
  std::size_t end_;
  std::vector<Token> toks_;
};

ExprPtr make(ExprKind k, std::size_t b, std::size_t e, std::string text = {}) {
  auto x = std::make_unique<Expr>();
  x->kind = k;
  x->span = {b, e};
  x->text = std::move(text);
  return x;
}

bool is_assign_op(const std::string &op) {
  static const std::set<std::string> ops = {"=",  "+=", "-=",  "*=",  "/=",  "%=",   "**=",
                                            "<<=", ">>=", ">>>=", "&=", "|=", "^=", "&&=",
                                            "||=", "?\?="};
  return ops.count(op) > 0;
}

int binary_precedence(const std::string &op) {
  if (op == "??") return 1;
  if (op == "||") return 2;
  if (op == "&&") return 3;
  if (op == "|") return 4;
  if (op == "^") return 5;
  if (op == "&") return 6;
  if (op == "==" || op == "!=" || op == "===" || op == "!==") return 7;
  if (op == "<" || op == ">" || op == "<=" || op == ">=" || op == "instanceof" || op == "in")
    return 8;
  if (op == "<<" || op == ">>" || op == ">>>") return 9;
  if (op == "+" || op == "-") return 10;
  if (op == "*" || op == "/" || op == "%") return 11;
  if (op == "**") return 12;
  return 0;
}

struct Backtrack {};

class JsParser {
public:
  JsParser(const std::string &src, std::vector<Token> toks, Module &module, bool ts)
      : src_(src), toks_(std::move(toks)), module_(module), ts_(ts) {}

  StmtList parse_program() {
    StmtList out;
    while (!at(Tok::eof)) parse_statement_into(out);
    return out;
  }

  ExprPtr parse_expression_only() { return parse_expression(); }

private:
  // --- token helpers ----------------------------------------------------------
  const Token &cur() const { return toks_[i_]; }
  const Token &peek(std::size_t n = 1) const { return toks_[std::min(i_ + n, toks_.size() - 1)]; }
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
  void expect_p(const char *p) {
    if (!at_p(p)) fail(std::string("expected '") + p + "'");
    ++i_;
  }
  std::string expect_name() {
    if (!at(Tok::name)) fail("expected identifier");
    return take().text;
  }
  [[noreturn]] void fail(const std::string &msg) const {
    if (speculating_ > 0) throw Backtrack{};
    throw SyntaxError(msg, cur().begin);
  }
  std::size_t prev_end() const { return i_ > 0 ? toks_[i_ - 1].end : 0; }

  /// Property names may be any identifier, keyword, string or number.
  bool at_property_name() const {
    return at(Tok::name) || at(Tok::string) || at(Tok::number);
  }

  void consume_semicolon() {
    if (accept_p(";")) return;
    if (at_p("}") || at(Tok::eof) || cur().nl_before) return;
    fail("expected ';'");
  }

  /// Splits a compound `>` token (">>", ">=", ...) so one `>` can be consumed.
  bool take_close_angle() {
    Token &t = toks_[i_];
    if (t.kind != Tok::punct || t.text.empty() || t.text[0] != '>') return false;
    if (t.text == ">") {
      ++i_;
      return true;
    }
    split_log_.emplace_back(i_, t);
    t.text = t.text.substr(1);
    t.begin += 1;
    t.nl_before = false;
    return true;
  }

  // --- TypeScript type skipping ------------------------------------------------
  void skip_balanced() {
    std::string open = cur().text;
    std::string close = open == "(" ? ")" : open == "[" ? "]" : "}";
    int depth = 0;
    do {
      if (at(Tok::eof)) fail("unbalanced brackets");
      if (cur().kind == Tok::punct && cur().text == open) ++depth;
      else if (cur().kind == Tok::punct && cur().text == close) --depth;
      ++i_;
    } while (depth > 0);
  }

  void skip_type_args() {
    expect_p("<");
    int depth = 1;
    while (depth > 0) {
      if (at(Tok::eof) || at_p(";")) fail("unterminated type arguments");
      if (at_p("<")) {
        ++depth;
        ++i_;
      } else if (at_p("(") || at_p("[") || at_p("{")) {
        skip_balanced();
      } else if (take_close_angle()) {
        --depth;
      } else if (at_p("=>")) {
        ++i_;
      } else {
        ++i_;
      }
    }
  }

  void skip_type() {
    accept_p("|");
    accept_p("&");
    while (true) {
      skip_primary_type();
      while (at_p("[") && !cur().nl_before) skip_balanced();
      if (at_p("|") || at_p("&")) {
        ++i_;
        continue;
      }
      if (at_n("extends") ) {
        ++i_;
        skip_type();
        expect_p("?");
        skip_type();
        expect_p(":");
        continue;
      }
      break;
    }
  }

  void skip_primary_type() {
    if (at_n("typeof") || at_n("keyof") || at_n("readonly") || at_n("unique") || at_n("infer") ||
        at_n("asserts")) {
      ++i_;
      if (at(Tok::name) || at_p("(") || at_p("[") || at_p("{")) skip_primary_type();
      return;
    }
    if (at_n("new") || at_n("abstract")) {
      while (at_n("new") || at_n("abstract")) ++i_;
    }
    if (at_p("<")) { // generic function type
      skip_type_args();
    }
    if (at_p("(")) {
      skip_balanced();
      if (accept_p("=>")) skip_type();
      return;
    }
    if (at_p("{") || at_p("[")) {
      skip_balanced();
      return;
    }
    if (at_p("-")) ++i_;
    if (at(Tok::string) || at(Tok::number) || at(Tok::templ)) {
      ++i_;
      return;
    }
    if (at(Tok::name)) {
      ++i_;
      while (at_p(".") && peek().kind == Tok::name) i_ += 2;
      if (at_p("<") && !cur().nl_before) skip_type_args();
      if (at_n("is") && !cur().nl_before) { // type predicate
        ++i_;
        skip_type();
      }
      return;
    }
    fail("expected a type");
  }

  void skip_type_annotation() {
    if (ts_ && accept_p(":")) skip_type();
  }

  // --- statements ----------------------------------------------------------------
  void recover(std::size_t start, std::size_t error_pos) {
    i_ = start;
    int depth = 0;
    while (!at(Tok::eof)) {
      const Token &t = cur();
      if (t.punct("{") || t.punct("(") || t.punct("[")) ++depth;
      if (t.punct("}") || t.punct(")") || t.punct("]")) {
        if (depth == 0) break;
        --depth;
        ++i_;
        if (depth == 0 && t.punct("}") && t.begin >= error_pos) return;
        continue;
      }
      if (depth == 0 && t.punct(";") && t.begin >= error_pos) {
        ++i_;
        return;
      }
      if (depth == 0 && t.nl_before && t.begin > error_pos && i_ > start) return;
      ++i_;
    }
    if (i_ == start && !at(Tok::eof)) ++i_;
  }

  void parse_statement_into(StmtList &out) {
    std::size_t start = i_;
    try {
      parse_statement(out);
    } catch (const SyntaxError &err) {
      module_.issues.push_back({err.what(), err.offset});
      module_.unsupported["parse_error"]++;
      recover(start, err.offset);
      if (i_ == start) ++i_;
    }
  }

  StmtList parse_block_body() {
    expect_p("{");
    StmtList out;
    while (!at_p("}") && !at(Tok::eof)) parse_statement_into(out);
    expect_p("}");
    return out;
  }

  StmtList parse_substatement() {
    StmtList out;
    if (at_p("{")) return parse_block_body();
    parse_statement(out);
    return out;
  }

  std::unique_ptr<Stmt> new_stmt(StmtKind k, std::size_t b) {
    auto st = std::make_unique<Stmt>();
    st->kind = k;
    st->span = {b, b};
    return st;
  }

  std::vector<Decorator> parse_decorators() {
    std::vector<Decorator> out;
    while (at_p("@")) {
      std::size_t b = take().begin;
      Decorator d;
      d.expr = parse_lhs(false);
      d.span = {b, prev_end()};
      out.push_back(std::move(d));
    }
    return out;
  }

  void skip_ts_declaration() {
    // type / interface / declare / namespace / enum / abstract members
    int depth = 0;
    while (!at(Tok::eof)) {
      if (at_p("{") || at_p("(") || at_p("[")) ++depth;
      if (at_p("}") || at_p(")") || at_p("]")) {
        if (depth == 0) return;
        --depth;
        ++i_;
        if (depth == 0 && toks_[i_ - 1].punct("}") && (cur().nl_before || at_p(";"))) {
          accept_p(";");
          return;
        }
        continue;
      }
      if (depth == 0 && at_p(";")) {
        ++i_;
        return;
      }
      if (depth == 0 && cur().nl_before && i_ > decl_start_ + 1 &&
          !toks_[i_ - 1].punct("=") && !toks_[i_ - 1].punct("|") && !toks_[i_ - 1].punct("&") &&
          !at_p("|") && !at_p("&") && !at_p("=")) {
        return;
      }
      ++i_;
    }
  }

  bool at_ts_declaration() const {
    if (!ts_ || cur().kind != Tok::name) return false;
    const Token &n = peek();
    const std::string &w = cur().text;
    if (w == "interface" || w == "type") return n.kind == Tok::name && !n.nl_before;
    if (w == "declare") return n.kind == Tok::name && !n.nl_before;
    if (w == "namespace" || w == "module") return n.kind == Tok::name && !n.nl_before && peek(2).punct("{");
    if (w == "enum") return n.kind == Tok::name;
    if (w == "const") return n.name("enum");
    return false;
  }

  void parse_statement(StmtList &out) {
    std::size_t b = cur().begin;
    if (at_p(";")) {
      ++i_;
      return;
    }
    if (at_p("{")) {
      auto st = new_stmt(StmtKind::block, b);
      st->body = parse_block_body();
      st->span.end = prev_end();
      out.push_back(std::move(st));
      return;
    }
    if (at_ts_declaration()) {
      decl_start_ = i_;
      skip_ts_declaration();
      return;
    }
    if (at_p("@")) {
      auto decorators = parse_decorators();
      accept_n("export");
      accept_n("default");
      accept_n("abstract");
      if (!at_n("class")) fail("decorator must precede a class");
      auto st = parse_class_decl();
      st->cls->decorators = std::move(decorators);
      out.push_back(std::move(st));
      return;
    }
    if (at(Tok::name)) {
      const std::string w = cur().text;
      if (w == "import" && !peek().punct("(") && !peek().punct(".")) {
        parse_import(out);
        return;
      }
      if (w == "export") {
        parse_export(out);
        return;
      }
      if (w == "const" || w == "let" || w == "var") {
        if (!(w == "let" && (peek().punct("=") || peek().punct(".") || peek().punct("(")))) {
          parse_var_decl(out);
          consume_semicolon();
          return;
        }
      }
      if (w == "using" && peek().kind == Tok::name && !peek().nl_before) {
        ++i_;
        parse_var_decl_list(out, b);
        consume_semicolon();
        return;
      }
      if (w == "function" || (w == "async" && peek().name("function") && !peek().nl_before)) {
        out.push_back(parse_function_decl());
        return;
      }
      if (w == "class" || (w == "abstract" && peek().name("class"))) {
        accept_n("abstract");
        out.push_back(parse_class_decl());
        return;
      }
      if (w == "if") {
        out.push_back(parse_if());
        return;
      }
      if (w == "switch") {
        out.push_back(parse_switch());
        return;
      }
      if (w == "for") {
        out.push_back(parse_for());
        return;
      }
      if (w == "while") {
        ++i_;
        auto st = new_stmt(StmtKind::while_, b);
        expect_p("(");
        st->cond = parse_expression();
        expect_p(")");
        st->body = parse_substatement();
        st->span.end = prev_end();
        out.push_back(std::move(st));
        return;
      }
      if (w == "do") {
        ++i_;
        auto st = new_stmt(StmtKind::while_, b);
        st->body = parse_substatement();
        if (!accept_n("while")) fail("expected 'while'");
        expect_p("(");
        st->cond = parse_expression();
        expect_p(")");
        accept_p(";");
        st->span.end = prev_end();
        out.push_back(std::move(st));
        return;
      }
      if (w == "try") {
        out.push_back(parse_try());
        return;
      }
      if (w == "return") {
        ++i_;
        auto st = new_stmt(StmtKind::ret, b);
        if (!at_p(";") && !at_p("}") && !at(Tok::eof) && !cur().nl_before) st->value = parse_expression();
        consume_semicolon();
        st->span.end = prev_end();
        out.push_back(std::move(st));
        return;
      }
      if (w == "throw") {
        ++i_;
        auto st = new_stmt(StmtKind::throw_, b);
        st->value = parse_expression();
        consume_semicolon();
        st->span.end = prev_end();
        out.push_back(std::move(st));
        return;
      }
      if (w == "break" || w == "continue") {
        ++i_;
        if (at(Tok::name) && !cur().nl_before) ++i_;
        consume_semicolon();
        return;
      }
      if (w == "debugger") {
        ++i_;
        consume_semicolon();
        return;
      }
      if (peek().punct(":") && w != "default" && w != "case") { // label
        i_ += 2;
        parse_statement(out);
        return;
      }
    }
    ExprPtr e = parse_expression();
    consume_semicolon();
    out.push_back(expression_statement(std::move(e), b));
  }

  std::unique_ptr<Stmt> expression_statement(ExprPtr e, std::size_t b) {
    if (e->kind == ExprKind::binary && is_assign_op(e->text)) {
      auto st = new_stmt(e->text == "=" ? StmtKind::assign : StmtKind::aug_assign, b);
      if (e->text != "=") st->op = e->text;
      st->targets.push_back(to_pattern(std::move(e->kids[0])));
      st->value = std::move(e->kids[1]);
      st->span.end = prev_end();
      return st;
    }
    auto st = new_stmt(StmtKind::expr, b);
    st->value = std::move(e);
    st->span.end = prev_end();
    return st;
  }

  void parse_import(StmtList &out) {
    std::size_t b = take().begin; // import
    if (ts_ && at_n("type") && !peek().punct(",") && !peek().name("from")) {
      // type-only import
      while (!at(Tok::eof) && !at(Tok::string)) ++i_;
      accept_p(";");
      if (at(Tok::string)) ++i_;
      consume_semicolon();
      return;
    }
    auto st = new_stmt(StmtKind::import, b);
    if (at(Tok::string)) { // side-effect import
      st->import.module = take().value;
      consume_semicolon();
      st->span.end = prev_end();
      out.push_back(std::move(st));
      return;
    }
    if (at(Tok::name) && !at_n("from") && !peek().punct("=")) {
      if (!(at_n("type") && peek().punct("{"))) st->import.default_local = take().text;
      else ++i_;
      accept_p(",");
    } else if (at(Tok::name) && peek().punct("=")) {
      // import x = require("m")
      std::string local = take().text;
      ++i_;
      if (accept_n("require")) {
        expect_p("(");
        if (!at(Tok::string)) fail("expected module string");
        st->import.module = take().value;
        expect_p(")");
        st->import.namespace_local = local;
        st->import.is_require = true;
      } else {
        parse_expression();
      }
      consume_semicolon();
      st->span.end = prev_end();
      out.push_back(std::move(st));
      return;
    }
    if (accept_p("*")) {
      if (!accept_n("as")) fail("expected 'as'");
      st->import.namespace_local = expect_name();
    } else if (accept_p("{")) {
      while (!at_p("}")) {
        bool type_only = ts_ && at_n("type") && peek().kind == Tok::name;
        if (type_only) ++i_;
        ImportName n;
        n.imported = at(Tok::string) ? take().value : expect_name();
        n.local = accept_n("as") ? expect_name() : n.imported;
        if (!type_only) st->import.names.push_back(n);
        if (!accept_p(",")) break;
      }
      expect_p("}");
    }
    if (!accept_n("from")) fail("expected 'from'");
    if (!at(Tok::string)) fail("expected module string");
    st->import.module = take().value;
    if (at_n("assert") || at_n("with")) {
      ++i_;
      skip_balanced();
    }
    consume_semicolon();
    st->span.end = prev_end();
    out.push_back(std::move(st));
  }

  void parse_export(StmtList &out) {
    std::size_t b = take().begin; // export
    if (accept_n("default")) {
      if (at_n("function") || (at_n("async") && peek().name("function"))) {
        auto st = parse_function_decl(true);
        st->exported = st->is_default_export = true;
        out.push_back(std::move(st));
        return;
      }
      if (at_n("class") || at_n("abstract")) {
        accept_n("abstract");
        auto st = parse_class_decl(true);
        st->exported = st->is_default_export = true;
        out.push_back(std::move(st));
        return;
      }
      auto st = new_stmt(StmtKind::assign, b);
      auto target = std::make_unique<Pattern>();
      target->kind = PatternKind::name;
      target->name = "default";
      st->targets.push_back(std::move(target));
      st->value = parse_assignment();
      consume_semicolon();
      st->exported = st->is_default_export = true;
      st->span.end = prev_end();
      out.push_back(std::move(st));
      return;
    }
    if (at_p("{") || at_p("*") || (ts_ && at_n("type") && peek().punct("{"))) {
      // re-export lists carry no dataflow of their own
      while (!at(Tok::eof) && !at_p(";") && !(cur().nl_before && i_ > 0 && toks_[i_ - 1].kind == Tok::string)) {
        if (at_p("{")) skip_balanced();
        else ++i_;
      }
      accept_p(";");
      return;
    }
    if (ts_ && accept_p("=")) {
      parse_expression();
      consume_semicolon();
      return;
    }
    std::size_t before = out.size();
    parse_statement(out);
    for (std::size_t k = before; k < out.size(); ++k) {
      out[k]->exported = true;
      for (auto &inner : out[k]->body) inner->exported = true;
    }
  }

  void parse_var_decl(StmtList &out) {
    std::size_t b = take().begin; // const / let / var
    parse_var_decl_list(out, b);
  }

  void parse_var_decl_list(StmtList &out, std::size_t b) {
    do {
      std::size_t db = cur().begin;
      auto pattern = parse_binding_pattern();
      if (ts_) accept_p("!");
      skip_type_annotation();
      if (accept_p("=")) {
        auto st = new_stmt(StmtKind::assign, db);
        st->targets.push_back(std::move(pattern));
        st->value = parse_assignment();
        st->span = {db, prev_end()};
        out.push_back(std::move(st));
      }
    } while (accept_p(","));
    (void)b;
  }

  std::unique_ptr<Pattern> parse_binding_pattern() {
    auto p = std::make_unique<Pattern>();
    p->span.begin = cur().begin;
    if (accept_p("{")) {
      p->kind = PatternKind::object;
      while (!at_p("}")) {
        if (accept_p("...")) {
          auto rest = std::make_unique<Pattern>();
          rest->kind = PatternKind::rest;
          rest->span.begin = prev_end();
          rest->rest_of = parse_binding_pattern();
          rest->span.end = prev_end();
          p->props.push_back({"...", std::move(rest)});
        } else {
          PatternProp prop;
          if (accept_p("[")) {
            parse_assignment();
            expect_p("]");
            prop.key = "[*]";
          } else {
            if (!at_property_name()) fail("expected property name");
            const Token &k = take();
            prop.key = k.kind == Tok::string ? k.value : k.text;
            if (!accept_p(":")) {
              auto v = std::make_unique<Pattern>();
              v->kind = PatternKind::name;
              v->name = prop.key;
              v->span = {k.begin, k.end};
              prop.value = std::move(v);
            }
          }
          if (!prop.value) prop.value = parse_binding_pattern();
          if (accept_p("=")) prop.value->default_value = parse_assignment();
          p->props.push_back(std::move(prop));
        }
        if (!accept_p(",")) break;
      }
      expect_p("}");
    } else if (accept_p("[")) {
      p->kind = PatternKind::array;
      while (!at_p("]")) {
        if (at_p(",")) {
          auto hole = std::make_unique<Pattern>();
          hole->kind = PatternKind::skip;
          p->elems.push_back(std::move(hole));
          ++i_;
          continue;
        }
        if (accept_p("...")) {
          auto rest = std::make_unique<Pattern>();
          rest->kind = PatternKind::rest;
          rest->rest_of = parse_binding_pattern();
          p->elems.push_back(std::move(rest));
        } else {
          auto el = parse_binding_pattern();
          if (accept_p("=")) el->default_value = parse_assignment();
          p->elems.push_back(std::move(el));
        }
        if (!accept_p(",")) break;
      }
      expect_p("]");
    } else {
      p->kind = PatternKind::name;
      p->name = expect_name();
    }
    p->span.end = prev_end();
    return p;
  }

  std::unique_ptr<Pattern> to_pattern(ExprPtr e) {
    auto p = std::make_unique<Pattern>();
    p->span = e->span;
    switch (e->kind) {
    case ExprKind::name:
      p->kind = PatternKind::name;
      p->name = e->text;
      break;
    case ExprKind::member:
    case ExprKind::index:
      p->kind = PatternKind::target;
      p->target = std::move(e);
      break;
    case ExprKind::array:
      p->kind = PatternKind::array;
      for (auto &k : e->kids) {
        if (k->kind == ExprKind::constant && k->text == "<hole>") {
          auto hole = std::make_unique<Pattern>();
          hole->kind = PatternKind::skip;
          p->elems.push_back(std::move(hole));
        } else {
          p->elems.push_back(to_pattern(std::move(k)));
        }
      }
      break;
    case ExprKind::object:
      p->kind = PatternKind::object;
      for (auto &prop : e->props) {
        if (prop.spread) {
          auto rest = std::make_unique<Pattern>();
          rest->kind = PatternKind::rest;
          rest->rest_of = to_pattern(std::move(prop.value));
          p->props.push_back({"...", std::move(rest)});
        } else {
          p->props.push_back({prop.computed_key ? "[*]" : prop.key, to_pattern(std::move(prop.value))});
        }
      }
      break;
    case ExprKind::spread:
      p->kind = PatternKind::rest;
      p->rest_of = to_pattern(std::move(e->kids[0]));
      break;
    case ExprKind::binary:
      if (e->text == "=") {
        auto inner = to_pattern(std::move(e->kids[0]));
        inner->default_value = std::move(e->kids[1]);
        return inner;
      }
      p->kind = PatternKind::skip;
      break;
    default:
      p->kind = PatternKind::skip;
      break;
    }
    return p;
  }

  std::unique_ptr<Stmt> parse_function_decl(bool allow_anonymous = false) {
    std::size_t b = cur().begin;
    auto fn = parse_function_rest(allow_anonymous);
    auto st = new_stmt(StmtKind::func_def, b);
    st->fn = fn;
    st->span = fn->span;
    return st;
  }

  /// Parses `[async] function [*] [name] (params) [: T] { body }`.
  std::shared_ptr<Function> parse_function_rest(bool allow_anonymous) {
    auto fn = std::make_shared<Function>();
    fn->span.begin = cur().begin;
    fn->is_async = accept_n("async");
    if (!accept_n("function")) fail("expected 'function'");
    if (accept_p("*")) fn->is_generator = true;
    if (at(Tok::name)) fn->name = take().text;
    else if (!allow_anonymous) fail("expected function name");
    parse_signature_and_body(*fn);
    return fn;
  }

  void parse_signature_and_body(Function &fn) {
    if (ts_ && at_p("<")) skip_type_args();
    expect_p("(");
    fn.params = parse_params();
    expect_p(")");
    if (ts_ && accept_p(":")) skip_type();
    if (at_p("{")) {
      fn_stack_.push_back(&fn);
      fn.body = parse_block_body();
      fn_stack_.pop_back();
    } else if (ts_) {
      consume_semicolon(); // overload signature
    } else {
      fail("expected function body");
    }
    fn.span.end = prev_end();
  }

  std::vector<Param> parse_params() {
    std::vector<Param> params;
    while (!at_p(")") && !at(Tok::eof)) {
      parse_decorators();
      while (ts_ && at(Tok::name) &&
             (at_n("public") || at_n("private") || at_n("protected") || at_n("readonly") ||
              at_n("override")) &&
             (peek().kind == Tok::name || peek().punct("{") || peek().punct("[")))
        ++i_;
      if (ts_ && at_n("this") && (peek().punct(":") || peek().punct(","))) {
        ++i_;
        skip_type_annotation();
        if (!accept_p(",")) break;
        continue;
      }
      Param p;
      if (accept_p("...")) p.rest = true;
      auto pattern = parse_binding_pattern();
      if (ts_) accept_p("?");
      if (ts_ && at_p(":")) {
        std::size_t ab = peek().begin;
        ++i_;
        skip_type();
        p.annotation = src_.substr(ab, prev_end() - ab);
      }
      if (accept_p("=")) pattern->default_value = parse_assignment();
      p.pattern = std::move(*pattern);
      params.push_back(std::move(p));
      if (!accept_p(",")) break;
    }
    return params;
  }

  std::unique_ptr<Stmt> parse_class_decl(bool allow_anonymous = false) {
    std::size_t b = cur().begin;
    auto cls = parse_class_rest(allow_anonymous);
    auto st = new_stmt(StmtKind::class_def, b);
    st->cls = cls;
    st->span = cls->span;
    return st;
  }

  std::shared_ptr<ClassDef> parse_class_rest(bool allow_anonymous) {
    auto cls = std::make_shared<ClassDef>();
    cls->span.begin = cur().begin;
    if (!accept_n("class")) fail("expected 'class'");
    if (at(Tok::name) && !at_n("extends") && !at_n("implements")) cls->name = take().text;
    else if (!allow_anonymous) fail("expected class name");
    if (ts_ && at_p("<")) skip_type_args();
    if (accept_n("extends")) {
      cls->bases.push_back(parse_lhs(false));
      if (ts_ && at_p("<")) skip_type_args();
    }
    if (accept_n("implements")) {
      do {
        skip_type();
      } while (accept_p(","));
    }
    expect_p("{");
    while (!at_p("}") && !at(Tok::eof)) {
      if (accept_p(";")) continue;
      std::size_t start = i_;
      try {
        parse_class_member(*cls);
      } catch (const SyntaxError &err) {
        module_.issues.push_back({err.what(), err.offset});
        module_.unsupported["parse_error"]++;
        recover(start, err.offset);
        if (i_ == start) ++i_;
      }
    }
    expect_p("}");
    cls->span.end = prev_end();
    return cls;
  }

  static bool is_modifier(const std::string &w) {
    return w == "public" || w == "private" || w == "protected" || w == "readonly" ||
           w == "abstract" || w == "override" || w == "declare" || w == "accessor";
  }

  void parse_class_member(ClassDef &cls) {
    std::size_t b = cur().begin;
    auto decorators = parse_decorators();
    bool is_static = false;
    bool is_async = false;
    bool is_generator = false;
    bool is_abstract = false;
    // modifiers are only modifiers when followed by another member token
    while (at(Tok::name) && !peek().punct("(") && !peek().punct("=") && !peek().punct(":") &&
           !peek().punct(";") && !peek().punct("?") && !peek().punct("<") && !peek().nl_before) {
      const std::string &w = cur().text;
      if (w == "static") is_static = true;
      else if (w == "async") is_async = true;
      else if (w == "get" || w == "set") {
      } else if (is_modifier(w)) {
        is_abstract |= w == "abstract" || w == "declare";
      } else {
        break;
      }
      ++i_;
    }
    if (at_n("static") && peek().punct("{")) { // static initialisation block
      ++i_;
      auto body = parse_block_body();
      for (auto &s : body) cls.body.push_back(std::move(s));
      return;
    }
    if (accept_p("*")) is_generator = true;
    std::string key;
    if (accept_p("[")) {
      parse_assignment();
      expect_p("]");
      key = "[*]";
    } else {
      if (!at_property_name()) fail("expected class member");
      const Token &k = take();
      key = k.kind == Tok::string ? k.value : k.text;
    }
    if (ts_) {
      accept_p("?");
      accept_p("!");
    }
    if (at_p("(") || at_p("<")) {
      auto fn = std::make_shared<Function>();
      fn->name = key;
      fn->span.begin = b;
      fn->is_async = is_async;
      fn->is_generator = is_generator;
      fn->is_method = true;
      fn->is_static = is_static;
      fn->decorators = std::move(decorators);
      parse_signature_and_body(*fn);
      if (!fn->body.empty() || !is_abstract) cls.methods.push_back(fn);
      return;
    }
    // field
    skip_type_annotation();
    if (accept_p("=")) {
      ExprPtr value = parse_assignment();
      if (value->kind == ExprKind::lambda) {
        value->fn->name = key;
        value->fn->is_method = true;
        value->fn->is_static = is_static;
        value->fn->decorators = std::move(decorators);
        cls.methods.push_back(value->fn);
      } else {
        auto st = new_stmt(StmtKind::assign, b);
        auto target = make(ExprKind::member, b, b, key);
        target->kids.push_back(make(ExprKind::name, b, b, is_static ? cls.name : "this"));
        auto pattern = std::make_unique<Pattern>();
        pattern->kind = PatternKind::target;
        pattern->target = std::move(target);
        st->targets.push_back(std::move(pattern));
        st->value = std::move(value);
        st->span.end = prev_end();
        cls.body.push_back(std::move(st));
      }
    }
    consume_semicolon();
  }

  std::unique_ptr<Stmt> parse_if() {
    std::size_t b = take().begin;
    auto st = new_stmt(StmtKind::if_, b);
    expect_p("(");
    st->cond = parse_expression();
    expect_p(")");
    st->body = parse_substatement();
    if (accept_n("else")) {
      if (at_n("if")) {
        auto nested = parse_if();
        nested->is_elif = true;
        st->orelse.push_back(std::move(nested));
      } else {
        st->orelse = parse_substatement();
      }
    }
    st->span.end = prev_end();
    return st;
  }

  std::unique_ptr<Stmt> parse_switch() {
    std::size_t b = take().begin;
    auto st = new_stmt(StmtKind::switch_, b);
    expect_p("(");
    st->value = parse_expression();
    expect_p(")");
    expect_p("{");
    std::vector<ExprPtr> pending_tests;
    bool pending_default = false;
    std::size_t pending_begin = 0;
    while (!at_p("}") && !at(Tok::eof)) {
      std::size_t cb = cur().begin;
      if (pending_tests.empty() && !pending_default) pending_begin = cb;
      if (accept_n("case")) {
        pending_tests.push_back(parse_expression());
        expect_p(":");
      } else if (accept_n("default")) {
        expect_p(":");
        pending_default = true;
      } else {
        fail("expected 'case' or 'default'");
      }
      if (at_n("case") || at_n("default")) continue; // stacked labels share a body
      Case c;
      c.tests = std::move(pending_tests);
      c.is_default = pending_default;
      pending_tests.clear();
      pending_default = false;
      while (!at_n("case") && !at_n("default") && !at_p("}") && !at(Tok::eof))
        parse_statement_into(c.body);
      c.span = {pending_begin, prev_end()};
      st->cases.push_back(std::move(c));
    }
    expect_p("}");
    st->span.end = prev_end();
    return st;
  }

  std::unique_ptr<Stmt> parse_for() {
    std::size_t b = take().begin;
    accept_n("await");
    expect_p("(");
    std::unique_ptr<Stmt> init;
    if (at_n("const") || at_n("let") || at_n("var")) {
      std::size_t db = take().begin;
      auto pattern = parse_binding_pattern();
      skip_type_annotation();
      if (at_n("of") || at_n("in")) {
        auto st = new_stmt(StmtKind::for_, b);
        st->op = take().text;
        st->targets.push_back(std::move(pattern));
        st->value = st->op == "of" ? parse_assignment() : parse_expression();
        expect_p(")");
        st->body = parse_substatement();
        st->span.end = prev_end();
        return st;
      }
      // classic loop with declarations
      init = new_stmt(StmtKind::block, db);
      no_in_ = true;
      if (accept_p("=")) {
        auto a = new_stmt(StmtKind::assign, db);
        a->targets.push_back(std::move(pattern));
        a->value = parse_assignment();
        init->body.push_back(std::move(a));
      }
      while (accept_p(",")) {
        auto p2 = parse_binding_pattern();
        skip_type_annotation();
        if (accept_p("=")) {
          auto a = new_stmt(StmtKind::assign, db);
          a->targets.push_back(std::move(p2));
          a->value = parse_assignment();
          init->body.push_back(std::move(a));
        }
      }
      no_in_ = false;
    } else if (!at_p(";")) {
      std::size_t eb = cur().begin;
      no_in_ = true;
      ExprPtr e = parse_expression();
      no_in_ = false;
      if (at_n("of") || at_n("in")) {
        auto st = new_stmt(StmtKind::for_, b);
        st->op = take().text;
        st->targets.push_back(to_pattern(std::move(e)));
        st->value = parse_expression();
        expect_p(")");
        st->body = parse_substatement();
        st->span.end = prev_end();
        return st;
      }
      init = expression_statement(std::move(e), eb);
    }
    expect_p(";");
    ExprPtr cond;
    if (!at_p(";")) cond = parse_expression();
    expect_p(";");
    ExprPtr update;
    std::size_t ub = cur().begin;
    if (!at_p(")")) update = parse_expression();
    expect_p(")");
    auto loop = new_stmt(StmtKind::while_, b);
    loop->cond = cond ? std::move(cond) : make(ExprKind::constant, b, b, "true");
    loop->body = parse_substatement();
    if (update) loop->body.push_back(expression_statement(std::move(update), ub));
    loop->span.end = prev_end();
    auto block = new_stmt(StmtKind::block, b);
    if (init) block->body.push_back(std::move(init));
    block->body.push_back(std::move(loop));
    block->span.end = prev_end();
    return block;
  }

  std::unique_ptr<Stmt> parse_try() {
    std::size_t b = take().begin;
    auto st = new_stmt(StmtKind::try_, b);
    st->body = parse_block_body();
    if (at_n("catch")) {
      Handler h;
      h.span.begin = take().begin;
      if (accept_p("(")) {
        h.binding = parse_binding_pattern();
        skip_type_annotation();
        expect_p(")");
      }
      h.body = parse_block_body();
      h.span.end = prev_end();
      st->handlers.push_back(std::move(h));
    }
    if (accept_n("finally")) st->finalbody = parse_block_body();
    st->span.end = prev_end();
    return st;
  }

  // --- expressions -------------------------------------------------------------------
  ExprPtr parse_expression() {
    ExprPtr e = parse_assignment();
    while (at_p(",")) {
      ++i_;
      auto seq = make(ExprKind::binary, e->span.begin, 0, ",");
      seq->kids.push_back(std::move(e));
      seq->kids.push_back(parse_assignment());
      seq->span.end = prev_end();
      e = std::move(seq);
    }
    return e;
  }

  template <class F> bool speculate(F &&f) {
    std::size_t save = i_;
    std::size_t log_size = split_log_.size();
    ++speculating_;
    try {
      f();
      --speculating_;
      return true;
    } catch (const Backtrack &) {
    } catch (const SyntaxError &) {
    }
    --speculating_;
    while (split_log_.size() > log_size) {
      toks_[split_log_.back().first] = split_log_.back().second;
      split_log_.pop_back();
    }
    i_ = save;
    return false;
  }

  /// Tries to parse an arrow function at the current position.
  ExprPtr try_arrow() {
    std::size_t b = cur().begin;
    bool is_async = false;
    std::size_t k = i_;
    if (cur().name("async") && !peek().nl_before &&
        (peek().kind == Tok::name || peek().punct("(") || peek().punct("<"))) {
      is_async = true;
      ++k;
    }
    const Token &first = toks_[k];
    // x => ...
    if (first.kind == Tok::name && toks_[k + 1].punct("=>") && !toks_[k + 1].nl_before) {
      i_ = k;
      auto fn = std::make_shared<Function>();
      fn->is_async = is_async;
      fn->is_arrow = true;
      fn->name = "<arrow>";
      Param p;
      p.pattern.kind = PatternKind::name;
      p.pattern.name = take().text;
      p.pattern.span = {first.begin, first.end};
      fn->params.push_back(std::move(p));
      ++i_; // =>
      return finish_arrow(fn, b);
    }
    if (!(first.punct("(") || (ts_ && first.punct("<")))) return nullptr;
    auto fn = std::make_shared<Function>();
    fn->is_async = is_async;
    fn->is_arrow = true;
    fn->name = "<arrow>";
    std::size_t save = i_;
    bool ok = speculate([&] {
      i_ = k;
      if (at_p("<")) skip_type_args();
      expect_p("(");
      fn->params = parse_params();
      expect_p(")");
      if (ts_ && at_p(":")) {
        ++i_;
        skip_type();
      }
      if (!at_p("=>") || cur().nl_before) fail("not an arrow");
      ++i_;
    });
    if (!ok) {
      i_ = save;
      return nullptr;
    }
    return finish_arrow(fn, b);
  }

  ExprPtr finish_arrow(const std::shared_ptr<Function> &fn, std::size_t b) {
    if (at_p("{")) {
      fn_stack_.push_back(fn.get());
      fn->body = parse_block_body();
      fn_stack_.pop_back();
    } else {
      fn->expr_body = parse_assignment();
    }
    fn->span = {b, prev_end()};
    auto e = make(ExprKind::lambda, b, prev_end());
    e->fn = fn;
    return e;
  }

  ExprPtr parse_assignment() {
    if (at_n("yield") && !fn_stack_.empty()) {
      std::size_t b = take().begin;
      fn_stack_.back()->is_generator = true;
      accept_p("*");
      auto e = make(ExprKind::opaque, b, 0, "yield");
      if (!at_p(")") && !at_p("]") && !at_p("}") && !at_p(",") && !at_p(";") && !cur().nl_before &&
          !at(Tok::eof))
        e->kids.push_back(parse_assignment());
      e->span.end = prev_end();
      return e;
    }
    if (at(Tok::name) || at_p("(") || at_p("<")) {
      if (ExprPtr arrow = try_arrow()) return arrow;
    }
    std::size_t b = cur().begin;
    ExprPtr lhs = parse_conditional();
    if (cur().kind == Tok::punct && is_assign_op(cur().text)) {
      std::string op = take().text;
      auto e = make(ExprKind::binary, b, 0, op);
      e->kids.push_back(std::move(lhs));
      e->kids.push_back(parse_assignment());
      e->span.end = prev_end();
      return e;
    }
    return lhs;
  }

  ExprPtr parse_conditional() {
    std::size_t b = cur().begin;
    ExprPtr cond = parse_binary(1);
    if (!at_p("?")) return cond;
    ++i_;
    bool saved = no_in_;
    no_in_ = false;
    ExprPtr then = parse_assignment();
    no_in_ = saved;
    expect_p(":");
    ExprPtr other = parse_assignment();
    auto e = make(ExprKind::conditional, b, prev_end());
    e->kids.push_back(std::move(cond));
    e->kids.push_back(std::move(then));
    e->kids.push_back(std::move(other));
    return e;
  }

  std::string binary_op_here() const {
    const Token &t = cur();
    if (t.kind == Tok::punct) {
      if (binary_precedence(t.text) > 0) return t.text;
      return {};
    }
    if (t.kind == Tok::name) {
      if (t.text == "instanceof") return t.text;
      if (t.text == "in" && !no_in_) return t.text;
    }
    return {};
  }

  ExprPtr parse_binary(int min_prec) {
    ExprPtr lhs = parse_unary();
    while (true) {
      if (ts_ && (at_n("as") || at_n("satisfies")) && !cur().nl_before) {
        ++i_;
        if (!accept_n("const")) skip_type();
        continue;
      }
      std::string op = binary_op_here();
      int prec = op.empty() ? 0 : binary_precedence(op);
      if (prec < min_prec || prec == 0) break;
      ++i_;
      ExprPtr rhs = parse_binary(op == "**" ? prec : prec + 1);
      auto e = make(ExprKind::binary, lhs->span.begin, rhs->span.end, op);
      e->kids.push_back(std::move(lhs));
      e->kids.push_back(std::move(rhs));
      lhs = std::move(e);
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    std::size_t b = cur().begin;
    if (at_p("!") || at_p("~") || at_p("+") || at_p("-") || at_p("++") || at_p("--") ||
        at_n("typeof") || at_n("void") || at_n("delete")) {
      std::string op = take().text;
      auto e = make(ExprKind::unary, b, 0, op);
      e->kids.push_back(parse_unary());
      e->span.end = prev_end();
      return e;
    }
    if (at_n("await") && !peek().punct("=>") && !peek().punct(")") && !peek().punct(",") &&
        !peek().punct(";") && !peek().punct("=")) {
      ++i_;
      auto e = make(ExprKind::await, b, 0);
      e->kids.push_back(parse_unary());
      e->span.end = prev_end();
      return e;
    }
    if (ts_ && at_p("<") && !tsx_) {
      // <T>expr type assertion
      bool ok = speculate([&] { skip_type_args(); });
      if (ok) return parse_unary();
    }
    ExprPtr e = parse_lhs(true);
    if ((at_p("++") || at_p("--")) && !cur().nl_before) {
      std::string op = take().text;
      auto u = make(ExprKind::unary, b, prev_end(), op);
      u->kids.push_back(std::move(e));
      return u;
    }
    return e;
  }

  ExprPtr parse_arguments(ExprPtr call) {
    expect_p("(");
    while (!at_p(")") && !at(Tok::eof)) {
      if (accept_p("...")) {
        auto s = make(ExprKind::spread, prev_end() - 3, 0);
        s->kids.push_back(parse_assignment());
        s->span.end = prev_end();
        call->kids.push_back(std::move(s));
      } else {
        call->kids.push_back(parse_assignment());
      }
      call->arg_names.push_back("");
      if (!accept_p(",")) break;
    }
    expect_p(")");
    call->span.end = prev_end();
    return call;
  }

  ExprPtr parse_lhs(bool allow_calls) {
    std::size_t b = cur().begin;
    ExprPtr e;
    if (at_n("new")) {
      ++i_;
      if (accept_p(".")) {
        expect_name();
        e = make(ExprKind::opaque, b, prev_end(), "new.target");
      } else {
        ExprPtr callee = parse_lhs(false);
        if (ts_ && at_p("<")) speculate([&] { skip_type_args(); });
        auto n = make(ExprKind::new_call, b, prev_end());
        n->kids.push_back(std::move(callee));
        if (at_p("(")) n = parse_arguments(std::move(n));
        e = std::move(n);
      }
    } else {
      e = parse_primary();
    }
    while (true) {
      const Token &t = cur();
      if (t.punct(".") || t.punct("?.")) {
        bool optional = t.text == "?.";
        ++i_;
        if (optional && at_p("(")) {
          if (!allow_calls) break;
          auto c = make(ExprKind::call, e->span.begin, 0);
          c->kids.push_back(std::move(e));
          e = parse_arguments(std::move(c));
          continue;
        }
        if (optional && at_p("[")) {
          ++i_;
          auto ix = make(ExprKind::index, e->span.begin, 0);
          ix->kids.push_back(std::move(e));
          ix->kids.push_back(parse_expression());
          expect_p("]");
          ix->span.end = prev_end();
          e = std::move(ix);
          continue;
        }
        if (!at(Tok::name)) fail("expected property name");
        std::string name = take().text;
        auto m = make(ExprKind::member, e->span.begin, prev_end(), name);
        m->kids.push_back(std::move(e));
        e = std::move(m);
      } else if (t.punct("[") && !t.nl_before) {
        ++i_;
        auto ix = make(ExprKind::index, e->span.begin, 0);
        ix->kids.push_back(std::move(e));
        ix->kids.push_back(parse_expression());
        expect_p("]");
        ix->span.end = prev_end();
        e = std::move(ix);
      } else if (t.punct("(") && !t.nl_before && allow_calls) {
        auto c = make(ExprKind::call, e->span.begin, 0);
        c->kids.push_back(std::move(e));
        e = parse_arguments(std::move(c));
      } else if (t.kind == Tok::templ && !t.nl_before) {
        // tagged template
        auto c = make(ExprKind::call, e->span.begin, 0);
        c->kids.push_back(std::move(e));
        c->kids.push_back(parse_template());
        c->arg_names.push_back("");
        c->span.end = prev_end();
        e = std::move(c);
      } else if (ts_ && t.punct("!") && !t.nl_before &&
                 !(peek().kind == Tok::name && !peek().nl_before && !peek().name("as"))) {
        ++i_; // non-null assertion
      } else if (ts_ && t.punct("<") && allow_calls && !t.nl_before) {
        // f<T>(x) generic call
        std::size_t save = i_;
        bool ok = speculate([&] {
          skip_type_args();
          if (!at_p("(")) fail("not a generic call");
        });
        if (!ok) {
          i_ = save;
          break;
        }
      } else {
        break;
      }
    }
    (void)b;
    return e;
  }

  ExprPtr parse_template() {
    const Token &t = take();
    auto e = make(ExprKind::templ, t.begin, t.end);
    e->parts = t.parts;
    for (const auto &[hb, he] : t.holes) {
      JsLexer lex(src_, hb, he);
      Module scratch;
      JsParser sub(src_, lex.run(), scratch, ts_);
      sub.fn_stack_ = fn_stack_;
      e->kids.push_back(sub.parse_expression_only());
      for (const auto &[k, v] : scratch.unsupported) module_.unsupported[k] += v;
    }
    return e;
  }

  ExprPtr parse_primary() {
    const Token &t = cur();
    std::size_t b = t.begin;
    switch (t.kind) {
    case Tok::number:
      ++i_;
      return make(ExprKind::number, b, t.end, t.text);
    case Tok::string:
      ++i_;
      return make(ExprKind::string, b, t.end, t.value);
    case Tok::templ:
      return parse_template();
    case Tok::regex:
      ++i_;
      return make(ExprKind::constant, b, t.end, t.text);
    case Tok::name:
      break;
    case Tok::punct:
      return parse_punct_primary();
    default:
      fail("unexpected end of input");
    }
    const std::string &w = t.text;
    if (w == "true" || w == "false" || w == "null" || w == "undefined") {
      ++i_;
      return make(ExprKind::constant, b, t.end, w);
    }
    if (w == "function" || (w == "async" && peek().name("function") && !peek().nl_before)) {
      auto fn = parse_function_rest(true);
      if (fn->name.empty()) fn->name = "<function>";
      auto e = make(ExprKind::lambda, b, prev_end());
      e->fn = fn;
      return e;
    }
    if (w == "class") {
      auto cls = parse_class_rest(true);
      module_.unsupported["class_expression"]++;
      return make(ExprKind::opaque, b, prev_end(), "class");
    }
    if (w == "import" && peek().punct("(")) {
      ++i_;
      auto c = make(ExprKind::call, b, 0);
      c->kids.push_back(make(ExprKind::name, b, b + 6, "import"));
      return parse_arguments(std::move(c));
    }
    if (w == "import" && peek().punct(".")) {
      i_ += 2;
      expect_name();
      return make(ExprKind::opaque, b, prev_end(), "import.meta");
    }
    static const std::set<std::string> reserved = {
        "if", "else", "for", "while", "do", "return", "switch", "case", "default", "break",
        "continue", "throw", "try", "catch", "finally", "const", "let", "var", "export",
        "import", "extends"};
    if (reserved.count(w)) fail("unexpected keyword '" + w + "'");
    ++i_;
    return make(ExprKind::name, b, t.end, w);
  }

  ExprPtr parse_punct_primary() {
    std::size_t b = cur().begin;
    if (accept_p("(")) {
      bool saved = no_in_;
      no_in_ = false;
      ExprPtr inner = parse_expression();
      no_in_ = saved;
      expect_p(")");
      return inner;
    }
    if (accept_p("[")) {
      auto arr = make(ExprKind::array, b, 0, "list");
      while (!at_p("]") && !at(Tok::eof)) {
        if (at_p(",")) {
          arr->kids.push_back(make(ExprKind::constant, cur().begin, cur().begin, "<hole>"));
          ++i_;
          continue;
        }
        if (accept_p("...")) {
          auto s = make(ExprKind::spread, prev_end() - 3, 0);
          s->kids.push_back(parse_assignment());
          s->span.end = prev_end();
          arr->kids.push_back(std::move(s));
        } else {
          arr->kids.push_back(parse_assignment());
        }
        if (!accept_p(",")) break;
      }
      expect_p("]");
      arr->span.end = prev_end();
      return arr;
    }
    if (accept_p("{")) return parse_object(b);
    if (at_p("@")) {
      parse_decorators();
      return parse_primary();
    }
    if (ts_ && at_p("<")) {
      std::size_t save = i_;
      if (speculate([&] { skip_type_args(); })) return parse_unary();
      i_ = save;
    }
    fail("unexpected '" + cur().text + "'");
  }

  ExprPtr parse_object(std::size_t b) {
    auto obj = make(ExprKind::object, b, 0);
    while (!at_p("}") && !at(Tok::eof)) {
      Property p;
      p.span.begin = cur().begin;
      if (accept_p("...")) {
        p.spread = true;
        p.value = parse_assignment();
      } else {
        bool is_async = false, is_gen = false, accessor = false;
        if (at_n("async") && !peek().punct(",") && !peek().punct(":") && !peek().punct("(") &&
            !peek().punct("}")) {
          is_async = true;
          ++i_;
        }
        if ((at_n("get") || at_n("set")) && !peek().punct(",") && !peek().punct(":") &&
            !peek().punct("(") && !peek().punct("}")) {
          accessor = true;
          ++i_;
        }
        if (accept_p("*")) is_gen = true;
        std::size_t key_begin = cur().begin, key_end = cur().end;
        if (accept_p("[")) {
          p.computed_key = parse_assignment();
          expect_p("]");
        } else {
          if (!at_property_name()) fail("expected property name");
          const Token &k = take();
          p.key = k.kind == Tok::string ? k.value : k.text;
        }
        if (at_p("(") || at_p("<")) {
          auto fn = std::make_shared<Function>();
          fn->name = p.key.empty() ? "<method>" : p.key;
          fn->span.begin = p.span.begin;
          fn->is_async = is_async;
          fn->is_generator = is_gen;
          fn->is_method = true;
          parse_signature_and_body(*fn);
          auto lam = make(ExprKind::lambda, fn->span.begin, prev_end());
          lam->fn = fn;
          p.value = std::move(lam);
          (void)accessor;
        } else if (accept_p(":")) {
          p.value = parse_assignment();
        } else {
          // shorthand `{ a }` or `{ a = 1 }` (destructuring assignment)
          p.value = make(ExprKind::name, key_begin, key_end, p.key);
          if (accept_p("=")) {
            auto d = make(ExprKind::binary, key_begin, 0, "=");
            d->kids.push_back(std::move(p.value));
            d->kids.push_back(parse_assignment());
            d->span.end = prev_end();
            p.value = std::move(d);
          }
        }
      }
      p.span.end = prev_end();
      obj->props.push_back(std::move(p));
      if (!accept_p(",")) break;
    }
    expect_p("}");
    obj->span.end = prev_end();
    return obj;
  }

  const std::string &src_;
  std::vector<Token> toks_;
  std::size_t i_ = 0;
  Module &module_;
  bool ts_;
  bool tsx_ = false;
  bool no_in_ = false;
  int speculating_ = 0;
  std::size_t decl_start_ = 0;
  std::vector<Function *> fn_stack_;
  std::vector<std::pair<std::size_t, Token>> split_log_;
};

} // namespace

Module parse_js(const std::string &text, bool typescript) {
  Module module;
  std::vector<Token> toks;
  try {
    toks = JsLexer(text, 0, text.size()).run();
  } catch (const SyntaxError &err) {
    module.issues.push_back({err.what(), err.offset});
    module.unsupported["parse_error"]++;
    std::size_t cut = text.rfind('\n', err.offset);
    if (cut == std::string::npos) return module;
    try {
      toks = JsLexer(text, 0, cut).run();
    } catch (const SyntaxError &) {
      return module;
    }
  }
  JsParser parser(text, std::move(toks), module, typescript);
  module.body = parser.parse_program();
  return module;
}

} // namespace mcpflow::frontend
