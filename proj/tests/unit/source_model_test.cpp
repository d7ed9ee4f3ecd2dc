#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

namespace mcpflow::testing {
namespace {

using EdgeSet = std::set<std::pair<StmtIndex, StmtIndex>>;

EdgeSet edges_of(const CFG &cfg) { return EdgeSet(cfg.edges.begin(), cfg.edges.end()); }

TEST(BuildCfg, StraightLineBodyIsAChain) {
  auto r = lower({{"a.py", "def f(a):\n    x = a\n    y = x\n    return y\n"}});
  ProcIndex f = proc_named(r.program, "f");
  CFG cfg = build_cfg(r.program, f);
  const auto &body = r.program.proc(f).statements;
  ASSERT_EQ(body.size(), 3u);
  EXPECT_EQ(cfg.nodes.size(), 3u);
  EXPECT_EQ(cfg.entry, body[0]);
  EXPECT_EQ(edges_of(cfg), (EdgeSet{{body[0], body[1]}, {body[1], body[2]}}));
}

TEST(BuildCfg, TwoWayBranchFansOutAndJoins) {
  auto r = lower({{"a.py", "def f(a):\n"
                           "    if a:\n        x = 1\n        y = 2\n"
                           "    else:\n        x = 3\n        y = 4\n"
                           "    return x\n"}});
  const Program &prog = r.program;
  ProcIndex f = proc_named(prog, "f");
  const Statement *branch = nullptr;
  StmtIndex b = 0;
  for (StmtIndex s : prog.proc(f).statements)
    if (prog.stmt(s).kind == StmtKind::branch) branch = &prog.stmt(b = s);
  ASSERT_NE(branch, nullptr);
  ASSERT_EQ(branch->arms.size(), 2u);
  ASSERT_EQ(branch->arms[0].size(), 2u);
  ASSERT_EQ(branch->arms[1].size(), 2u);
  StmtIndex ret = prog.proc(f).body.back();
  const auto &t = branch->arms[0], &e = branch->arms[1];
  // Paths enumerated by hand: b -> t0 -> t1 -> ret and b -> e0 -> e1 -> ret.
  EdgeSet expected{{b, t[0]}, {t[0], t[1]}, {t[1], ret}, {b, e[0]}, {e[0], e[1]}, {e[1], ret}};
  CFG cfg = build_cfg(prog, f);
  EXPECT_EQ(edges_of(cfg), expected);
  EXPECT_EQ(cfg.successors(b).size(), 2u);
  EXPECT_EQ(cfg.nodes.size(), prog.proc(f).statements.size());
}

TEST(BuildCfg, PrivateAddressGuardIsABranchWithFetchOnFallThrough) {
  auto r = load_project(fixture("running_example"), {});
  const Program &prog = r.program;
  ProcIndex fetch_proc = proc_named(prog, "Fetcher._fetch");
  StmtIndex guard = statements_where(prog, "Fetcher._fetch", [](const Statement &st) {
                      return st.kind == StmtKind::branch && st.condition.text.find("isPrivateHost") != std::string::npos;
                    }).at(0);
  StmtIndex fetch_call = call_to(prog, "fetch");
  const CFG &cfg = *prog.proc(fetch_proc).cfg;
  // The throw inside the guard has no successor; fetch is reachable from the
  // guard without passing through it.
  StmtIndex thrower = prog.stmt(guard).arms.at(0).back();
  EXPECT_EQ(prog.stmt(thrower).kind, StmtKind::exit);
  EXPECT_TRUE(cfg.successors(thrower).empty());
  std::set<StmtIndex> seen{guard};
  std::vector<StmtIndex> stack{guard};
  while (!stack.empty()) {
    StmtIndex n = stack.back();
    stack.pop_back();
    for (StmtIndex m : cfg.successors(n))
      if (m != thrower && seen.insert(m).second) stack.push_back(m);
  }
  EXPECT_TRUE(seen.count(fetch_call));
  EXPECT_TRUE(Dominators(cfg).dominates(guard, fetch_call));
}

TEST(BuildCfg, EveryProcedureHasOneNodePerStatement) {
  auto r = load_project(fixture("running_example"), {});
  for (ProcIndex p = 0; p < r.program.procedures.size(); ++p) {
    const Procedure &proc = r.program.proc(p);
    if (proc.statements.empty()) continue;
    ASSERT_TRUE(proc.cfg.has_value()) << proc.name;
    std::vector<StmtIndex> nodes = proc.cfg->nodes, stmts = proc.statements;
    std::sort(nodes.begin(), nodes.end());
    std::sort(stmts.begin(), stmts.end());
    EXPECT_EQ(nodes, stmts) << proc.name;
  }
}

TEST(BuildCfg, DanglingArmIsAStructuredError) {
  auto r = lower({{"a.py", "def f(a):\n    if a:\n        x = 1\n    return a\n"}});
  Program prog = r.program;
  ProcIndex f = proc_named(prog, "f");
  StmtIndex b = statements_where(prog, "f", [](const Statement &st) { return st.kind == StmtKind::branch; }).at(0);
  prog.statements[b].arms[0].push_back(9999);
  try {
    build_cfg(prog, f);
    FAIL() << "expected an error";
  } catch (const Error &e) {
    EXPECT_NE(std::string(e.what()).find(prog.stmt(b).id), std::string::npos);
  }
}

TEST(BuildCallGraph, RunningExampleChainsHandlerToFetch) {
  auto r = load_project(fixture("running_example"), {});
  const Program &prog = r.program;
  ProcIndex html = proc_named(prog, "Fetcher.html"), fetch_proc = proc_named(prog, "Fetcher._fetch");
  auto internal = [&](ProcIndex callee) {
    return std::count_if(prog.call_graph.edges.begin(), prog.call_graph.edges.end(),
                         [&](const CallEdge &e) { return e.callee == callee; });
  };
  EXPECT_EQ(internal(html), 1);
  EXPECT_EQ(internal(fetch_proc), 1);
  auto at_fetch = prog.call_graph.edges_at(call_to(prog, "fetch"));
  ASSERT_EQ(at_fetch.size(), 1u);
  EXPECT_TRUE(at_fetch[0]->external);
  EXPECT_FALSE(at_fetch[0]->callee.has_value());
  EXPECT_EQ(prog.proc(at_fetch[0]->caller).name, "Fetcher._fetch");
}

TEST(BuildCallGraph, NoCallsMeansNoEdges) {
  auto r = lower({{"a.py", "def f(a):\n    return a\n"}});
  EXPECT_TRUE(r.program.call_graph.edges.empty());
}

TEST(BuildCallGraph, RegistryLookupReachesEveryEntryHeuristically) {
  auto r = load_project(fixture("corpus/dispatch/registry_literal"), {});
  const Program &prog = r.program;
  auto site = statements_where(prog, "call_tool", [](const Statement &st) { return st.kind == StmtKind::call; }).at(0);
  std::set<std::string> callees;
  for (const CallEdge *e : prog.call_graph.edges_at(site)) {
    ASSERT_TRUE(e->callee.has_value());
    EXPECT_EQ(e->confidence, Confidence::heuristic);
    callees.insert(prog.proc(*e->callee).name);
  }
  EXPECT_EQ(callees, (std::set<std::string>{"handle_stat", "handle_remove"}));
}

TEST(BuildCallGraph, EveryCallStatementHasAnEdgeOrUnresolvedRecord) {
  for (const auto &fx : corpus_fixtures()) {
    auto r = load_project(fixture(fx), {});
    for (StmtIndex s = 0; s < r.program.statements.size(); ++s)
      if (r.program.stmt(s).kind == StmtKind::call) {
        EXPECT_FALSE(r.program.call_graph.edges_at(s).empty()) << fx << " " << r.program.stmt(s).id;
      }
  }
}

TEST(SliceAround, ResponseBodyReadShowsProducerContext) {
  auto r = load_project(fixture("running_example"), {});
  StmtIndex text = call_to(r.program, "response.text");
  CodeSlice slice = slice_around(r.program, text, 5);
  EXPECT_NE(slice.text.find("this._fetch"), std::string::npos);
  EXPECT_NE(slice.text.find("response.text()"), std::string::npos);
  EXPECT_NE(slice.text.find("applyLengthLimits"), std::string::npos);
  EXPECT_EQ(slice.procedure, "Fetcher.html");
}

TEST(SliceAround, ZeroWindowIsExactlyTheFocusLines) {
  auto r = load_project(fixture("running_example"), {});
  StmtIndex text = call_to(r.program, "response.text");
  CodeSlice slice = slice_around(r.program, text, 0);
  const auto &loc = r.program.stmt(text).location;
  EXPECT_EQ(slice.first_line, loc.start_line);
  EXPECT_EQ(slice.last_line, loc.end_line);
  EXPECT_EQ(slice.text.find('\n'), std::string::npos);
}

TEST(SliceAround, WindowIsClippedToTheEnclosingProcedure) {
  auto r = lower({{"a.py", "def before():\n    return 1\n\n\ndef f(a):\n    x = a\n    return x\n\n\ndef after():\n    return 2\n"}});
  ProcIndex f = proc_named(r.program, "f");
  StmtIndex first = r.program.proc(f).statements.front();
  CodeSlice slice = slice_around(r.program, first, 10);
  const auto &ploc = r.program.proc(f).location;
  EXPECT_GE(slice.first_line, ploc.start_line);
  EXPECT_LE(slice.last_line, ploc.end_line);
  EXPECT_EQ(slice.text.find("before"), std::string::npos);
  EXPECT_EQ(slice.text.find("after"), std::string::npos);
  // Verbatim substring of the unit.
  EXPECT_NE(r.program.units[0].text.find(slice.text), std::string::npos);
}

TEST(SliceAround, UnknownFocusIsAStructuredError) {
  auto r = lower({{"a.py", "def f(a):\n    return a\n"}});
  EXPECT_THROW(slice_around(r.program, std::string("no-such-id"), 2), Error);
}

TEST(ValueRefs, FieldPathsCollapseBeyondThreeFields) {
  ValueRef v = ValueRef::local("request").with_field("params").with_field("arguments");
  EXPECT_EQ(v.field_depth(), 2u);
  EXPECT_EQ(v.str(), "request.params.arguments");
  ValueRef url = v.with_field("url");
  EXPECT_EQ(url.field_depth(), 3u);
  EXPECT_EQ(url.with_field("host").str(), url.str());
}

TEST(Program, LoweringTwiceYieldsIdenticalModel) {
  auto a = load_project(fixture("running_example"), {});
  auto b = load_project(fixture("running_example"), {});
  EXPECT_EQ(dump_program(a.program), dump_program(b.program));
}

TEST(Program, StatementLocationsExcerptTheirSyntax) {
  auto r = load_project(fixture("running_example"), {});
  EXPECT_TRUE(check_invariants(r.program).empty());
  for (StmtIndex s = 0; s < r.program.statements.size(); ++s) {
    const Statement &st = r.program.stmt(s);
    std::string text = r.program.excerpt(st.location);
    ASSERT_FALSE(text.empty()) << st.id;
    if (st.kind == StmtKind::call && st.call && st.call->form == CalleeForm::member) {
      EXPECT_NE(text.find(st.call->method_name()), std::string::npos) << st.id << " " << text;
    }
    // Arrow functions with expression bodies return without the keyword.
    if (st.kind == StmtKind::ret && !r.program.proc(st.procedure).is_lambda) {
      EXPECT_NE(text.find("return"), std::string::npos) << text;
    }
    if (st.kind == StmtKind::branch) {
      bool keyword = false;
      for (const char *k : {"if", "switch", "catch", "for", "while", "else"}) keyword |= text.rfind(k, 0) == 0;
      EXPECT_TRUE(keyword) << text;
    }
  }
}

TEST(Program, StableIdsDependOnPathSpanAndKind) {
  EXPECT_EQ(stable_id("a.py", 1, 5, "call"), stable_id("a.py", 1, 5, "call"));
  EXPECT_NE(stable_id("a.py", 1, 5, "call"), stable_id("b.py", 1, 5, "call"));
  EXPECT_NE(stable_id("a.py", 1, 5, "call"), stable_id("a.py", 1, 6, "call"));
  EXPECT_NE(stable_id("a.py", 1, 5, "call"), stable_id("a.py", 1, 5, "ret"));
}

} // namespace
} // namespace mcpflow::testing
