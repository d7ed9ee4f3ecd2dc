#include "mcpflow/resolve.hpp"
#include "mcpflow/taint_spec.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace mcpflow {

std::string to_string(TaintLabel l) { return l == TaintLabel::req ? "req" : "ext"; }

std::string to_string(SeedRationale r) {
  switch (r) {
  case SeedRationale::handler_param: return "handler_param";
  case SeedRationale::branch_local: return "branch_local";
  case SeedRationale::structured_accessor: return "structured_accessor";
  case SeedRationale::external_recognizer: return "external_recognizer";
  case SeedRationale::adjudicated: return "adjudicated";
  }
  return "?";
}

std::string to_string(SeedConfidence c) {
  switch (c) {
  case SeedConfidence::certain: return "certain";
  case SeedConfidence::adjudicated: return "adjudicated";
  case SeedConfidence::assumed: return "assumed";
  }
  return "?";
}

namespace {

const std::vector<std::pair<SinkCategory, std::string>> kCategoryNames = {
    {SinkCategory::command_exec, "command_exec"}, {SinkCategory::code_eval, "code_eval"},
    {SinkCategory::filesystem, "filesystem"},     {SinkCategory::network, "network"},
    {SinkCategory::query, "query"},               {SinkCategory::other, "other"}};

std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::optional<std::vector<int>> parse_positions(const std::string &text) {
  std::vector<int> out;
  for (const auto &part : split(text, ',')) {
    if (part.empty() || !std::all_of(part.begin(), part.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
      return std::nullopt;
    out.push_back(std::stoi(part));
  }
  return out;
}

bool valid_callee(const std::string &c) {
  if (c.empty()) return false;
  if (c[0] == '*' || c[0] == '~') {
    auto dot = c.rfind('.');
    return dot != std::string::npos && dot + 1 < c.size() && (c[0] == '~' ? dot > 1 : dot == 1);
  }
  return c.find_first_of(" \t*~") == std::string::npos;
}

std::string lower(std::string s) {
  for (auto &c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string strip_node_prefix(std::string q) {
  if (q.rfind("node:", 0) == 0) q = q.substr(5);
  return q;
}

} // namespace

std::string to_string(SinkCategory c) {
  for (const auto &[k, n] : kCategoryNames)
    if (k == c) return n;
  return "other";
}

std::optional<SinkCategory> sink_category_from(const std::string &text) {
  for (const auto &[k, n] : kCategoryNames)
    if (n == text) return k;
  return std::nullopt;
}

const SinkRule *SinkRulePack::find(const std::string &id) const {
  for (const auto &r : rules)
    if (r.id == id) return &r;
  return nullptr;
}

SinkRulePack parse_rule_pack(const std::string &text, const std::string &origin) {
  SinkRulePack pack;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto where = [&] { return origin + ":" + std::to_string(lineno); };
  auto fail = [&](const std::string &msg) { throw Error("rule_pack_malformed", where() + ": " + msg); };
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream words(line);
    std::vector<std::string> f;
    for (std::string w; words >> w;) f.push_back(w);
    if (f.empty()) continue;
    if (f[0] == "version") {
      if (f.size() != 2) fail("expected: version <value>");
      pack.version = f[1];
      continue;
    }
    if (f[0] != "rule") fail("unknown record '" + f[0] + "'");
    if (f.size() < 6 || f.size() > 7) fail("expected: rule <id> <category> <language> <callees> <positions> [bind:<positions>]");
    SinkRule r;
    r.id = f[1];
    auto cat = sink_category_from(f[2]);
    if (!cat) fail("unknown category '" + f[2] + "'");
    r.category = *cat;
    if (f[3] != "python" && f[3] != "js_ts" && f[3] != "any") fail("unknown language '" + f[3] + "'");
    r.language = f[3];
    r.callees = split(f[4], '|');
    for (const auto &c : r.callees)
      if (!valid_callee(c)) fail("malformed callee pattern '" + c + "'");
    if (f[5] == "*") {
      r.wildcard = true;
    } else {
      auto pos = parse_positions(f[5]);
      if (!pos) fail("malformed positions '" + f[5] + "'");
      r.positions = *pos;
    }
    if (f.size() == 7) {
      if (f[6].rfind("bind:", 0) != 0) fail("expected bind:<positions>, got '" + f[6] + "'");
      auto pos = parse_positions(f[6].substr(5));
      if (!pos) fail("malformed bind positions '" + f[6] + "'");
      r.bind_positions = *pos;
    }
    r.origin = where();
    if (const SinkRule *prev = pack.find(r.id))
      throw Error("rule_pack_duplicate", "rule '" + r.id + "' defined twice: " + prev->origin + " and " + r.origin);
    pack.rules.push_back(std::move(r));
  }
  if (pack.rules.empty()) pack.warnings.push_back(origin + ": rule pack is empty");
  if (pack.version.empty()) {
    if (!pack.rules.empty()) throw Error("rule_pack_malformed", origin + ": missing version line");
    pack.version = "none";
  }
  return pack;
}

SinkRulePack load_rule_pack(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error("rule_pack_unreadable", "cannot read rule pack " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_rule_pack(buf.str(), path.string());
}

SinkRulePack default_rule_pack() { return load_rule_pack(std::filesystem::path(MCPFLOW_DATA_DIR) / "default.rules"); }

std::vector<ValueRef> SinkSite::operands(const Program &program) const {
  const CallSite &cs = *program.stmt(stmt).call;
  std::vector<ValueRef> out;
  for (std::size_t i = 0; i < cs.args.size(); ++i)
    if (wildcard || std::count(positions.begin(), positions.end(), static_cast<int>(i)))
      out.push_back(cs.args[i]);
  return out;
}

std::vector<ValueRef> SinkSite::bound_operands(const Program &program) const {
  const CallSite &cs = *program.stmt(stmt).call;
  std::vector<ValueRef> out;
  for (int i : bind_positions)
    if (i >= 0 && static_cast<std::size_t>(i) < cs.args.size()) out.push_back(cs.args[i]);
  return out;
}

namespace {

/// Receiver text of a member call: the object value or the callee prefix.
std::string receiver_text(const CallSite &cs) {
  if (cs.object) return cs.object->str();
  auto dot = cs.callee.rfind('.');
  return dot == std::string::npos ? "" : cs.callee.substr(0, dot);
}

bool callee_matches(const std::string &pattern, const CallSite &cs) {
  if (pattern[0] == '*' || pattern[0] == '~') {
    if (cs.form != CalleeForm::member) return false;
    auto dot = pattern.rfind('.');
    if (cs.method_name() != pattern.substr(dot + 1)) return false;
    if (pattern[0] == '*') return true;
    std::string hint = lower(pattern.substr(1, dot - 1));
    return lower(receiver_text(cs)).find(hint) != std::string::npos ||
           lower(strip_node_prefix(cs.qualified)).find(hint + ".") != std::string::npos;
  }
  std::string q = strip_node_prefix(cs.qualified.empty() ? cs.callee : cs.qualified);
  return q == pattern;
}

bool language_applies(const SinkRule &r, Language lang) {
  return r.language == "any" || (r.language == "python") == (lang == Language::python);
}

} // namespace

std::vector<SinkSite> match_operation_sinks(const Program &program, const SinkRulePack &pack) {
  std::vector<SinkSite> out;
  for (StmtIndex i = 0; i < program.statements.size(); ++i) {
    const Statement &st = program.statements[i];
    if (st.kind != StmtKind::call || !st.call) continue;
    const CallSite &cs = *st.call;
    if (cs.form == CalleeForm::computed && cs.callee == "<callback>") continue;
    Language lang = program.unit_of(st.procedure).language;
    bool first_party = false;
    for (const CallEdge *e : program.call_graph.edges_at(i)) first_party |= e->callee.has_value();
    if (first_party) continue;
    for (const SinkRule &r : pack.rules) {
      if (!language_applies(r, lang)) continue;
      auto hit = std::find_if(r.callees.begin(), r.callees.end(),
                              [&](const std::string &p) { return callee_matches(p, cs); });
      if (hit == r.callees.end()) continue;
      SinkSite s;
      s.stmt = i;
      s.rule_id = r.id;
      s.callee = strip_node_prefix(cs.qualified.empty() ? cs.callee : cs.qualified);
      s.positions = r.positions;
      s.wildcard = r.wildcard;
      s.bind_positions = r.bind_positions;
      s.category = r.category;
      out.push_back(std::move(s));
      break;
    }
  }
  return out;
}

bool locations_related(const Location &a, const Location &b) {
  return a.is_prefix_of(b) || b.is_prefix_of(a);
}

std::vector<ValueRef> values_read(const Statement &st) {
  std::vector<ValueRef> out;
  auto add = [&](const ValueRef &v) {
    if (!v.is_literal() && !v.base.empty()) out.push_back(v);
  };
  switch (st.kind) {
  case StmtKind::call:
    if (st.call) {
      if (st.call->object) add(*st.call->object);
      if (st.call->callee_value) add(*st.call->callee_value);
      for (const auto &a : st.call->args) add(a);
    }
    break;
  case StmtKind::branch:
  case StmtKind::exit:
    break;
  default:
    for (const auto &s : st.sources) add(s);
  }
  return out;
}

} // namespace mcpflow
