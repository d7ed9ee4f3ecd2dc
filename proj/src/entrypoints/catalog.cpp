#include "mcpflow/entrypoints.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace mcpflow {

namespace {

std::string trim(const std::string &s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

} // namespace

std::string to_string(DispatchFamily f) {
  switch (f) {
  case DispatchFamily::protocol: return "protocol";
  case DispatchFamily::branch: return "branch";
  case DispatchFamily::registry: return "registry";
  case DispatchFamily::reflective: return "reflective";
  }
  return "?";
}

std::string to_string(Provenance p) {
  return p == Provenance::from_dispatch ? "from_dispatch" : "from_publication_fallback";
}

const PatternVariant *PatternCatalog::find(const std::string &id) const {
  for (const auto &v : variants)
    if (v.id == id) return &v;
  return nullptr;
}

std::size_t PatternCatalog::count(PatternKind kind) const {
  std::size_t n = 0;
  for (const auto &v : variants) n += v.kind == kind;
  return n;
}

PatternCatalog parse_catalog(const std::string &text, const std::string &origin) {
  PatternCatalog cat;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string &code, const std::string &msg) {
    throw Error(code, origin + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream words(t);
    std::string head;
    words >> head;
    if (head == "version") {
      words >> cat.version;
      if (cat.version.empty()) fail("catalog_malformed", "missing version value");
      continue;
    }
    if (head != "variant") fail("catalog_malformed", "unknown record '" + head + "'");
    auto bar1 = t.find('|');
    auto bar2 = bar1 == std::string::npos ? bar1 : t.find('|', bar1 + 1);
    if (bar2 == std::string::npos) fail("catalog_malformed", "expected '| template | bindings'");
    std::istringstream hdr(t.substr(0, bar1));
    std::string kw, kind, id, lang, family;
    hdr >> kw >> kind >> id >> lang >> family;
    if (family.empty()) fail("catalog_malformed", "expected: variant <kind> <id> <language> <family>");
    PatternVariant v;
    if (kind == "publication") v.kind = PatternKind::publication;
    else if (kind == "dispatcher") v.kind = PatternKind::dispatcher;
    else fail("catalog_malformed", "unknown variant kind '" + kind + "'");
    if (lang != "python" && lang != "js_ts" && lang != "any")
      fail("catalog_malformed", "unknown language '" + lang + "'");
    if (v.kind == PatternKind::dispatcher && family != "protocol" && family != "branch" &&
        family != "registry" && family != "reflective")
      fail("catalog_malformed", "unknown dispatcher family '" + family + "'");
    v.id = id;
    v.language = lang;
    v.family = family == "-" ? "" : family;
    v.template_text = trim(t.substr(bar1 + 1, bar2 - bar1 - 1));
    v.bindings = trim(t.substr(bar2 + 1));
    if (auto it = seen.find(id); it != seen.end())
      fail("catalog_duplicate", "variant '" + id + "' already defined at line " + std::to_string(it->second));
    seen[id] = lineno;
    cat.variants.push_back(std::move(v));
  }
  if (cat.version.empty()) throw Error("catalog_malformed", origin + ": missing version line");
  return cat;
}

PatternCatalog load_catalog(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error("catalog_unreadable", "cannot read catalog " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_catalog(buf.str(), path.string());
}

PatternCatalog default_catalog() {
  return load_catalog(std::filesystem::path(MCPFLOW_DATA_DIR) / "catalog.txt");
}

std::string format_catalog(const PatternCatalog &catalog) {
  std::ostringstream os;
  os << "catalog version " << catalog.version << " (" << catalog.count(PatternKind::publication)
     << " publication, " << catalog.count(PatternKind::dispatcher) << " dispatcher variants)\n";
  for (const auto &v : catalog.variants) {
    os << (v.kind == PatternKind::publication ? "publication" : "dispatcher ") << "  " << v.id << "  ["
       << v.language << (v.family.empty() ? "" : ", " + v.family) << "]\n"
       << "    " << v.template_text << "\n"
       << "    " << v.bindings << "\n";
  }
  return os.str();
}

} // namespace mcpflow
