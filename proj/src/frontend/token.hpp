#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mcpflow::frontend {

enum class Tok { name, number, string, templ, punct, newline, indent, dedent, regex, eof };

struct Token {
  Tok kind = Tok::eof;
  std::string text;  ///< raw text (punctuators, names)
  std::string value; ///< decoded string contents
  std::size_t begin = 0;
  std::size_t end = 0;
  bool nl_before = false;
  bool is_fstring = false;
  /// Template / f-string literal chunks and interpolation source ranges.
  std::vector<std::string> parts;
  std::vector<std::pair<std::size_t, std::size_t>> holes;

  bool is(Tok k, const char *t) const { return kind == k && text == t; }
  bool punct(const char *t) const { return kind == Tok::punct && text == t; }
  bool name(const char *t) const { return kind == Tok::name && text == t; }
};

struct SyntaxError : std::runtime_error {
  SyntaxError(const std::string &msg, std::size_t off) : std::runtime_error(msg), offset(off) {}
  std::size_t offset;
};

inline bool is_ident_start(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == '$' || c >= 0x80;
}

inline bool is_ident_char(unsigned char c) {
  return is_ident_start(c) || (c >= '0' && c <= '9');
}

/// Longest-match punctuator lookup over a candidate list (longest first).
inline std::size_t match_punct(const std::string &src, std::size_t pos,
                               const std::vector<std::string> &puncts) {
  for (const auto &p : puncts)
    if (src.compare(pos, p.size(), p) == 0) return p.size();
  return 0;
}

/// Decodes common backslash escapes; unknown escapes keep the character.
inline std::string decode_escapes(const std::string &raw) {
  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    char c = raw[i];
    if (c != '\\' || i + 1 >= raw.size()) {
      out += c;
      continue;
    }
    char n = raw[++i];
    switch (n) {
    case 'n': out += '\n'; break;
    case 't': out += '\t'; break;
    case 'r': out += '\r'; break;
    case '0': out += '\0'; break;
    case '\n': break;
    default: out += n; break;
    }
  }
  return out;
}

} // namespace mcpflow::frontend
