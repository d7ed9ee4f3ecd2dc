#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>

namespace mcpflow::testing {
namespace {

TEST(LoadProject, RunningExampleHasHandlerChainAndCallGraph) {
  auto r = load_project(fixture("running_example"), {});
  EXPECT_EQ(r.report.count(UnitStatus::lowered), 3u);
  EXPECT_GE(r.program.procedures.size(), 3u);
  for (const char *name : {"Fetcher.html", "Fetcher._fetch", "applyLengthLimits", "isPrivateHost"})
    EXPECT_TRUE(r.program.find_procedure_by_name(name).has_value()) << name;
  EXPECT_FALSE(r.program.call_graph.edges.empty());
  EXPECT_TRUE(check_invariants(r.program).empty());
}

TEST(LoadProject, EmptyDirectoryGivesEmptyProgramWithWarning) {
  auto dir = std::filesystem::temp_directory_path() / "mcpflow-empty-tree";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  auto r = load_project(dir, {});
  EXPECT_TRUE(r.program.procedures.empty());
  EXPECT_TRUE(r.report.units.empty());
  ASSERT_FALSE(r.report.warnings.empty());
  EXPECT_NE(r.report.warnings[0].find("no"), std::string::npos);
}

TEST(LoadProject, MissingRootIsFatal) {
  try {
    load_project("/nonexistent/mcpflow/root", {});
    FAIL() << "expected an error";
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), "root_unreadable");
  }
}

TEST(LoadProject, UnsupportedConstructDegradesOnlyItsUnit) {
  auto r = load_project(fixture("corpus/structure/partial_unit"), {});
  ASSERT_EQ(r.report.units.size(), 1u);
  const UnitReport &u = r.report.units[0];
  EXPECT_EQ(u.status, UnitStatus::partially_lowered);
  EXPECT_EQ(u.unsupported, (std::map<std::string, int>{{"generator", 1}}));
  ProcIndex greet = proc_named(r.program, "greet");
  EXPECT_FALSE(r.program.proc(greet).statements.empty());
}

TEST(LoadProject, ParseErrorIsolatesToItsFile) {
  auto r = lower({{"bad.py", "def broken(:\n    pass\n"}, {"good.py", "def fine(a):\n    return a\n"}});
  ASSERT_EQ(r.report.units.size(), 2u);
  std::map<std::string, UnitStatus> status;
  for (const auto &u : r.report.units) status[u.path] = u.status;
  EXPECT_NE(status["bad.py"], UnitStatus::lowered);
  EXPECT_EQ(status["good.py"], UnitStatus::lowered);
  EXPECT_TRUE(r.program.find_procedure_by_name("fine").has_value());
}

TEST(LoadProject, ExcludeGlobsAndLanguagesAreHonored) {
  auto dir = std::filesystem::temp_directory_path() / "mcpflow-globs";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir / "node_modules" / "pkg");
  std::ofstream(dir / "a.py") << "def a():\n    return 1\n";
  std::ofstream(dir / "b.js") << "function b() { return 1; }\n";
  std::ofstream(dir / "node_modules" / "pkg" / "c.js") << "function c() { return 1; }\n";
  auto all = load_project(dir, {});
  EXPECT_EQ(all.report.units.size(), 2u);
  FrontendConfig only_py;
  only_py.js_ts = false;
  auto py = load_project(dir, only_py);
  ASSERT_EQ(py.report.units.size(), 1u);
  EXPECT_EQ(py.report.units[0].path, "a.py");
  FrontendConfig no_b;
  no_b.exclude.push_back("b.*");
  EXPECT_EQ(load_project(dir, no_b).report.units.size(), 1u);
}

TEST(LoadProject, EveryShippedFixtureLowersCompletely) {
  for (const auto &fx : corpus_fixtures()) {
    if (fx == "corpus/structure/partial_unit") continue; // deliberately outside the subset
    auto r = load_project(fixture(fx), {});
    for (const auto &u : r.report.units)
      EXPECT_EQ(u.status, UnitStatus::lowered) << fx << "/" << u.path << (u.issues.empty() ? "" : ": " + u.issues[0]);
  }
}

TEST(Lowering, DestructuredParameterWithDefaultsBecomesFieldLoads) {
  auto r = lower({{"a.ts", "function f({ url, depth = 2 }: Opts) {\n  return url;\n}\n"}});
  auto loads = statements_where(r.program, "f", [](const Statement &st) { return st.kind == StmtKind::field_load; });
  std::set<std::string> fields;
  for (StmtIndex s : loads) fields.insert(r.program.stmt(s).sources.at(0).fields.back());
  EXPECT_TRUE(fields.count("url"));
  EXPECT_TRUE(fields.count("depth"));
}

TEST(Lowering, TemplateAndFStringPartsAreOperands) {
  auto r = lower({{"a.ts", "function f(a) { const s = `x ${a} y`; return s; }\n"},
                  {"b.py", "def g(b):\n    s = f\"x {b} y\"\n    return s\n"}});
  for (const char *proc : {"f", "g"}) {
    auto assigns = statements_where(r.program, proc, [](const Statement &st) {
      return st.kind == StmtKind::assign && st.target && st.target->base == "s";
    });
    ASSERT_EQ(assigns.size(), 1u) << proc;
    const Statement &st = r.program.stmt(assigns[0]);
    bool reads_param = false;
    for (const auto &v : st.sources) reads_param |= v.base == "a" || v.base == "b";
    EXPECT_TRUE(reads_param) << proc;
    EXPECT_EQ(st.template_head.value_or(""), "x ");
  }
}

TEST(Lowering, ReturnOfObjectLiteralIsAssembled) {
  auto r = lower({{"a.js", "function f(v) { return { content: [{ type: 'text', text: v }] }; }\n"}});
  auto asm_stmts = statements_where(r.program, "f", [](const Statement &st) { return st.kind == StmtKind::assemble; });
  EXPECT_EQ(asm_stmts.size(), 3u);
}

TEST(ResolveImports, ImportedClassMethodResolvesToLocalDefinition) {
  auto r = load_project(fixture("running_example"), {});
  StmtIndex call = call_to(r.program, "Fetcher.html");
  auto edges = r.program.call_graph.edges_at(call);
  ASSERT_EQ(edges.size(), 1u);
  ASSERT_TRUE(edges[0]->callee.has_value());
  EXPECT_EQ(r.program.proc(*edges[0]->callee).name, "Fetcher.html");
  EXPECT_EQ(edges[0]->confidence, Confidence::exact);
}

TEST(ResolveImports, AliasedRegistrationKeepsItsSemantics) {
  auto r = lower({{"s.js", "const t = server.registerTool;\n"
                           "function h({ cmd }) { return cmd; }\n"
                           "t(\"x\", { inputSchema: {} }, h);\n"}});
  StmtIndex call = call_to(r.program, "t");
  EXPECT_EQ(r.program.stmt(call).call->qualified, "server.registerTool");
  auto facts = collect_publication_facts(r.program, default_catalog());
  ASSERT_EQ(facts.size(), 1u);
  EXPECT_EQ(facts[0].tool, "x");
  ASSERT_TRUE(facts[0].handler.has_value());
  EXPECT_EQ(r.program.proc(*facts[0].handler).name, "h");
}

TEST(ResolveImports, ThirdPartyImportIsTaggedExternal) {
  auto r = lower({{"a.py", "import leftpad_not_installed as lp\n\ndef f(x):\n    return lp.pad(x)\n"}});
  StmtIndex call = call_to(r.program, "lp.pad");
  auto edges = r.program.call_graph.edges_at(call);
  ASSERT_EQ(edges.size(), 1u);
  EXPECT_TRUE(edges[0]->external);
  EXPECT_EQ(edges[0]->callee_name, "leftpad_not_installed.pad");
}

TEST(ResolveImports, CircularImportsDoNotError) {
  auto r = lower({{"a.py", "from b import g\n\ndef f(x):\n    return g(x)\n"},
                  {"b.py", "from a import f\n\ndef g(y):\n    return f(y)\n"}});
  EXPECT_TRUE(check_invariants(r.program).empty());
  StmtIndex call = call_to(r.program, "g");
  ASSERT_FALSE(r.program.call_graph.edges_at(call).empty());
  EXPECT_TRUE(r.program.call_graph.edges_at(call)[0]->callee.has_value());
}

} // namespace
} // namespace mcpflow::testing
