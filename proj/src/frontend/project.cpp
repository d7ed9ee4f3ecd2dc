#include "mcpflow/frontend.hpp"
#include "mcpflow/resolve.hpp"

#include "lower.hpp"
#include "parsers.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace mcpflow {

namespace fs = std::filesystem;

std::string to_string(UnitStatus status) {
  switch (status) {
  case UnitStatus::lowered: return "lowered";
  case UnitStatus::partially_lowered: return "partially_lowered";
  case UnitStatus::skipped: return "skipped";
  }
  return "?";
}

std::size_t LoweringReport::count(UnitStatus status) const {
  return static_cast<std::size_t>(std::count_if(
      units.begin(), units.end(), [&](const UnitReport &u) { return u.status == status; }));
}

std::map<std::string, int> LoweringReport::unsupported_totals() const {
  std::map<std::string, int> out;
  for (const auto &u : units)
    for (const auto &[k, n] : u.unsupported) out[k] += n;
  return out;
}

std::optional<Language> language_for(const std::string &path) {
  std::string ext = fs::path(path).extension().string();
  if (ext == ".py") return Language::python;
  static const std::set<std::string> js = {".js", ".mjs", ".cjs", ".jsx", ".ts", ".mts", ".cts", ".tsx"};
  if (js.count(ext)) return Language::js_ts;
  return std::nullopt;
}

bool glob_match(const std::string &pattern, const std::string &path) {
  return fnmatch(pattern.c_str(), path.c_str(), 0) == 0;
}

namespace {

bool is_typescript(const std::string &path) {
  std::string ext = fs::path(path).extension().string();
  return ext == ".ts" || ext == ".tsx" || ext == ".mts" || ext == ".cts";
}

int line_of(const std::string &text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

std::string normalize(const fs::path &p) { return p.lexically_normal().generic_string(); }

std::string dir_of(const std::string &path) {
  auto slash = path.rfind('/');
  return slash == std::string::npos ? "" : path.substr(0, slash);
}

class ImportLinker {
public:
  explicit ImportLinker(Program &prog) : prog_(prog) {
    for (UnitIndex i = 0; i < prog_.units.size(); ++i) by_path_[prog_.units[i].path] = i;
  }

  void run() {
    for (UnitIndex u = 0; u < prog_.module_graph.imports.size(); ++u) {
      for (auto &b : prog_.module_graph.imports[u]) {
        if (prog_.units[u].language == Language::js_ts) link_js(u, b);
        else link_python(u, b);
        b.external = !b.target.has_value();
      }
    }
  }

private:
  std::optional<UnitIndex> find(const std::string &path) const {
    if (auto it = by_path_.find(path); it != by_path_.end()) return it->second;
    return std::nullopt;
  }

  void link_js(UnitIndex u, ImportBinding &b) {
    if (b.module.empty() || b.module[0] != '.') return;
    std::string base = normalize(fs::path(dir_of(prog_.units[u].path)) / b.module);
    if (base.rfind("./", 0) == 0) base = base.substr(2);
    std::vector<std::string> candidates = {base};
    std::string stem = base;
    for (const char *ext : {".js", ".mjs", ".cjs", ".jsx"}) {
      std::string e = ext;
      if (base.size() > e.size() && base.compare(base.size() - e.size(), e.size(), e) == 0) {
        stem = base.substr(0, base.size() - e.size());
        break;
      }
    }
    for (const char *ext : {".ts", ".tsx", ".mts", ".cts", ".js", ".jsx", ".mjs", ".cjs"})
      candidates.push_back(stem + ext);
    for (const char *ext : {".ts", ".tsx", ".js", ".jsx", ".mjs"})
      candidates.push_back(base + "/index" + ext);
    for (const auto &c : candidates)
      if (auto t = find(c)) {
        b.target = t;
        return;
      }
  }

  /// Unit for a dotted python module relative to `base_dir` ("" = any
  /// package root, matched by path suffix).
  std::optional<UnitIndex> python_module(const std::string &base_dir, const std::string &dotted,
                                         bool relative) const {
    std::string rel = dotted;
    std::replace(rel.begin(), rel.end(), '.', '/');
    std::vector<std::string> names;
    if (rel.empty()) names = {"__init__.py"};
    else names = {rel + ".py", rel + "/__init__.py"};
    for (const auto &n : names) {
      std::string full = relative ? normalize(fs::path(base_dir) / n) : n;
      if (full.rfind("./", 0) == 0) full = full.substr(2);
      if (auto t = find(full)) return t;
      if (!relative) {
        std::optional<UnitIndex> best;
        for (const auto &[path, idx] : by_path_) {
          if (path.size() > full.size() && path.compare(path.size() - full.size(), full.size(), full) == 0 &&
              path[path.size() - full.size() - 1] == '/') {
            if (!best || path.size() < prog_.units[*best].path.size()) best = idx;
          }
        }
        if (best) return best;
      }
    }
    return std::nullopt;
  }

  void link_python(UnitIndex u, ImportBinding &b) {
    std::size_t level = 0;
    while (level < b.module.size() && b.module[level] == '.') ++level;
    std::string dotted = b.module.substr(level);
    std::string base;
    if (level > 0) {
      base = dir_of(prog_.units[u].path);
      for (std::size_t i = 1; i < level; ++i) base = dir_of(base);
    }
    bool relative = level > 0;
    auto pkg = python_module(base, dotted, relative);
    // `from pkg import submodule` binds the submodule itself.
    if (!b.imported.empty() && b.imported != "*" && !b.namespace_import) {
      bool defined = pkg && (prog_.units[*pkg].definitions.count(b.imported) ||
                             prog_.units[*pkg].classes.count(b.imported));
      if (!defined) {
        std::string sub = dotted.empty() ? b.imported : dotted + "." + b.imported;
        if (auto s = python_module(base, sub, relative)) {
          b.target = s;
          b.namespace_import = true;
          b.imported.clear();
          return;
        }
      }
    }
    if (pkg) b.target = pkg;
  }

  Program &prog_;
  std::map<std::string, UnitIndex> by_path_;
};

/// Reads of names defined in enclosing (non-module) procedures.
void compute_captures(Program &prog) {
  for (ProcIndex p = 0; p < prog.procedures.size(); ++p) {
    Procedure &proc = prog.procedures[p];
    if (!proc.parent) continue;
    std::set<std::string> local;
    for (const auto &prm : proc.params) local.insert(prm.name);
    std::set<std::string> reads;
    auto note = [&](const ValueRef &v) {
      if (!v.is_literal() && !v.base.empty() && v.base[0] != '$') reads.insert(v.base);
    };
    for (StmtIndex s : proc.statements) {
      const Statement &st = prog.statements[s];
      if (st.target && st.target->fields.empty()) local.insert(st.target->base);
      for (const auto &v : st.sources) note(v);
      for (const auto &v : st.condition.reads) note(v);
      if (st.call) {
        for (const auto &v : st.call->args) note(v);
        if (st.call->object) note(*st.call->object);
        if (st.call->callee_value) note(*st.call->callee_value);
        if (st.call->form == CalleeForm::name) reads.insert(st.call->callee);
      }
    }
    std::set<std::pair<ProcIndex, std::string>> seen;
    for (const auto &name : reads) {
      if (local.count(name)) continue;
      for (std::optional<ProcIndex> cur = proc.parent; cur; cur = prog.procedures[*cur].parent) {
        const Procedure &outer = prog.procedures[*cur];
        if (outer.is_module) break;
        bool defined = std::any_of(outer.params.begin(), outer.params.end(),
                                   [&](const Param &x) { return x.name == name; });
        for (StmtIndex s : outer.statements) {
          const Statement &st = prog.statements[s];
          if (st.procedure == *cur && st.target && st.target->fields.empty() && st.target->base == name)
            defined = true;
        }
        if (defined) {
          if (seen.insert({*cur, name}).second) proc.captures.push_back({*cur, name});
          break;
        }
      }
    }
  }
}

} // namespace

void resolve_imports(Program &program) {
  ImportLinker(program).run();
  for (auto &st : program.statements) {
    if (!st.call) continue;
    if (st.call->form == CalleeForm::computed) st.call->qualified = st.call->callee;
    else st.call->qualified = qualify_name(program, st.procedure, st.call->callee);
  }
  for (ProcIndex p = 0; p < program.procedures.size(); ++p) {
    ProcIndex scope = program.procedures[p].parent.value_or(p);
    for (auto &d : program.procedures[p].decorators) d.qualified = qualify_name(program, scope, d.callee);
  }
}

LoadResult lower_sources(std::vector<SourceText> files) {
  std::sort(files.begin(), files.end(),
            [](const SourceText &a, const SourceText &b) { return a.path < b.path; });
  LoadResult out;
  Program &prog = out.program;
  std::vector<SourceText> kept;
  for (auto &f : files) {
    auto lang = language_for(f.path);
    if (!lang) {
      out.report.units.push_back({f.path, UnitStatus::skipped, {}, {"unsupported file type"}});
      continue;
    }
    SourceUnit u;
    u.path = f.path;
    u.language = *lang;
    u.root = stable_id(f.path, 0, f.text.size(), "unit");
    u.text = std::move(f.text);
    prog.units.push_back(std::move(u));
  }
  prog.module_graph.imports.resize(prog.units.size());

  for (UnitIndex i = 0; i < prog.units.size(); ++i) {
    UnitReport rep;
    rep.path = prog.units[i].path;
    const std::string text = prog.units[i].text;
    try {
      ast::Module mod = prog.units[i].language == Language::python
                            ? frontend::parse_python(text)
                            : frontend::parse_js(text, is_typescript(rep.path));
      frontend::UnitLowerer(prog, i, mod).run();
      rep.unsupported = mod.unsupported;
      for (const auto &issue : mod.issues) {
        std::ostringstream m;
        m << "line " << line_of(text, issue.offset) << ": " << issue.message;
        rep.issues.push_back(m.str());
      }
      rep.status = rep.issues.empty() && rep.unsupported.empty() ? UnitStatus::lowered
                                                                 : UnitStatus::partially_lowered;
    } catch (const std::exception &e) {
      rep.status = UnitStatus::skipped;
      rep.issues.push_back(e.what());
      if (!prog.units[i].module_procedure) {
        // Keep the unit addressable with an empty module procedure.
        Procedure mp;
        mp.unit = i;
        mp.name = "<module:" + rep.path + ">";
        mp.is_module = true;
        mp.id = stable_id(rep.path, 0, text.size(), "proc:" + mp.name);
        mp.location.path = rep.path;
        prog.procedures.push_back(std::move(mp));
        prog.units[i].module_procedure = prog.procedures.size() - 1;
      }
    }
    out.report.units.push_back(std::move(rep));
  }

  resolve_imports(prog);
  for (ProcIndex p = 0; p < prog.procedures.size(); ++p) prog.procedures[p].cfg = build_cfg(prog, p);
  compute_captures(prog);
  prog.call_graph = build_call_graph(prog);
  std::sort(out.report.units.begin(), out.report.units.end(),
            [](const UnitReport &a, const UnitReport &b) { return a.path < b.path; });
  return out;
}

LoadResult load_project(const fs::path &root, const FrontendConfig &config) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error("root_unreadable", "cannot read source root: " + root.string());
  auto excluded = [&](const std::string &rel) {
    return std::any_of(config.exclude.begin(), config.exclude.end(),
                       [&](const std::string &p) { return glob_match(p, rel); });
  };
  std::vector<SourceText> files;
  std::vector<UnitReport> skipped;
  fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec);
  if (ec) throw Error("root_unreadable", "cannot read source root: " + root.string());
  for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) break;
    std::string rel = fs::relative(it->path(), root, ec).generic_string();
    if (it->is_directory(ec)) {
      if (excluded(rel + "/") || excluded(rel + "/x")) it.disable_recursion_pending();
      continue;
    }
    if (!it->is_regular_file(ec) || excluded(rel)) continue;
    if (!std::any_of(config.include.begin(), config.include.end(),
                     [&](const std::string &p) { return glob_match(p, rel); }))
      continue;
    auto lang = language_for(rel);
    if (!lang || (*lang == Language::python && !config.python) ||
        (*lang == Language::js_ts && !config.js_ts))
      continue;
    auto size = it->file_size(ec);
    if (!ec && size > config.max_file_bytes) {
      skipped.push_back({rel, UnitStatus::skipped, {}, {"file exceeds size limit"}});
      continue;
    }
    std::ifstream in(it->path(), std::ios::binary);
    if (!in) {
      skipped.push_back({rel, UnitStatus::skipped, {}, {"unreadable"}});
      continue;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    files.push_back({rel, buf.str()});
  }
  LoadResult out = lower_sources(std::move(files));
  for (auto &s : skipped) out.report.units.push_back(std::move(s));
  std::sort(out.report.units.begin(), out.report.units.end(),
            [](const UnitReport &a, const UnitReport &b) { return a.path < b.path; });
  if (out.report.units.empty())
    out.report.warnings.push_back("no supported source files found under " + root.generic_string());
  return out;
}

} // namespace mcpflow
