#include "test_support.hpp"

#include <gtest/gtest.h>

namespace mcpflow::testing {
namespace {

/// One entrypoint carried through regions, paths and guard collection.
struct Pipeline {
  LoadResult load;
  Entrypoint ep;
  AnalysisScope scope;
  std::vector<TaintSeed> req, ext;
  std::vector<SinkTarget> ops, rets;
  ReachRegion fwd, bop, bret;
  std::vector<CandidatePath> req_paths, ret_paths;

  const Program &prog() const { return load.program; }
};

Pipeline run_pipeline(LoadResult load, const std::string &tool, Judge *judge = nullptr) {
  Pipeline p{std::move(load), {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}};
  const Program &prog = p.load.program;
  auto spec = recover_entrypoints(prog, default_catalog());
  bool found = false;
  for (const auto &e : spec.entrypoints)
    if (e.tool == tool) p.ep = e, found = true;
  if (!found) throw std::runtime_error("no entrypoint " + tool);
  p.scope = make_analysis_scope(prog, p.ep);
  p.req = seed_request_sources(prog, p.ep, judge);
  for (const auto &s : recognize_external_sources(prog, judge))
    if (s.origin_stmt && p.scope.active(prog, *s.origin_stmt)) p.ext.push_back(s);
  auto all = p.req;
  all.insert(all.end(), p.ext.begin(), p.ext.end());
  p.ops = sink_targets(prog, p.scope, match_operation_sinks(prog, default_rule_pack()));
  p.rets = sink_targets(prog, derive_return_sinks(prog, p.ep));
  p.fwd = reach_forward(prog, p.scope, seed_facts(all));
  std::vector<FactKey> ok, rk;
  for (const auto &t : p.ops)
    for (const auto &l : t.operands) ok.push_back({t.procedure, l});
  for (const auto &t : p.rets)
    for (const auto &l : t.operands) rk.push_back({t.procedure, l});
  p.bop = reach_backward(prog, p.scope, ok);
  p.bret = reach_backward(prog, p.scope, rk);
  PathContext ctx{&p.ep, &p.scope, &p.fwd};
  p.req_paths = intersect_and_build_paths(prog, ctx, p.bop, PathDirection::request_side, p.req, p.ops).paths;
  p.ret_paths = intersect_and_build_paths(prog, ctx, p.bret, PathDirection::return_side, p.ext, p.rets).paths;
  for (auto *set : {&p.req_paths, &p.ret_paths})
    for (auto &path : *set) path.guards = collect_guard_evidence(prog, ctx, path);
  return p;
}

Pipeline run_fixture(const std::string &fx, const std::string &tool, Judge *judge = nullptr) {
  return run_pipeline(load_project(fixture(fx), {}), tool, judge);
}

FactKey key(const Program &p, const std::string &proc, const std::string &base,
            std::vector<std::string> fields = {}) {
  return {proc_named(p, proc), Location{base, std::move(fields)}};
}

TEST(Transfer, AssignmentAssemblyAndUntaintedStatements) {
  auto r = lower({{"a.py", "def f(y, z):\n    x = y + 1\n    o = {'k': y}\n    w = z\n    return o\n"}});
  const Program &p = r.program;
  ProcIndex f = proc_named(p, "f");
  AnalysisScope scope = make_analysis_scope(p, f);
  TaintState st;
  st.labels[{f, Location{"y", {}}}] = kReqBit;
  for (StmtIndex s : p.proc(f).statements) st = transfer(p, scope, st, s);
  EXPECT_EQ(st.read({f, Location{"x", {}}}), kReqBit);
  EXPECT_EQ(st.witness.at({f, Location{"x", {}}}).second, rule::assign);
  EXPECT_EQ(st.read({f, Location{"o", {}}}), kReqBit);
  EXPECT_EQ(st.witness.at({f, Location{"o", {}}}).second, rule::assemble);
  EXPECT_EQ(st.read({f, Location{"w", {}}}), 0);
  EXPECT_EQ(st.read({f, Location{kReturnSlot, {}}}), kReqBit);
}

TEST(Transfer, FieldStoreAndLoadKeepPaths) {
  auto r = lower({{"a.js", "function f(v) { const o = {}; o.a = v; const b = o.a; const c = o.other; return b; }\n"}});
  const Program &p = r.program;
  ProcIndex f = proc_named(p, "f");
  AnalysisScope scope = make_analysis_scope(p, f);
  TaintState st;
  st.labels[{f, Location{"v", {}}}] = kExtBit;
  for (StmtIndex s : p.proc(f).statements) st = transfer(p, scope, st, s);
  EXPECT_EQ(st.read({f, Location{"o", {"a"}}}), kExtBit);
  EXPECT_EQ(st.read({f, Location{"b", {}}}), kExtBit);
  EXPECT_EQ(st.read({f, Location{"c", {}}}), 0);
}

TEST(Regions, RunningExampleForwardFollowsTheRequestIntoTheFetch) {
  Pipeline p = run_fixture("running_example", "fetch_html");
  const Program &prog = p.prog();
  EXPECT_FALSE(p.fwd.incomplete);
  EXPECT_EQ(p.fwd.labels_at(proc_named(prog, "Fetcher.html"), Location{"requestPayload", {}}) & kReqBit, kReqBit);
  EXPECT_EQ(p.fwd.labels_at(proc_named(prog, "Fetcher._fetch"), Location{"url", {}}) & kReqBit, kReqBit);
  EXPECT_EQ(p.fwd.labels_at(proc_named(prog, "Fetcher.html"), Location{"html", {}}) & kExtBit, kExtBit);
  EXPECT_EQ(p.fwd.labels_at(proc_named(prog, "isPrivateHost"), Location{"host", {}}) & kReqBit, kReqBit);
  for (std::size_t i = 0; i < p.fwd.facts.size(); ++i)
    if (p.fwd.witness[i]) {
      EXPECT_EQ(p.fwd.edges[*p.fwd.witness[i]].to, i);
    }
}

TEST(Regions, RunningExampleBackwardReachesBothBoundaries) {
  Pipeline p = run_fixture("running_example", "fetch_html");
  const Program &prog = p.prog();
  ASSERT_EQ(p.ops.size(), 1u);
  // From the fetch URL back to the request arguments in the dispatcher.
  auto anchor = p.ep.scope->procedure;
  EXPECT_FALSE(p.bop.related(anchor, Location{"request", {"params", "arguments"}}).empty());
  // From the returns back to the body read.
  EXPECT_TRUE(p.bret.find(key(prog, "Fetcher.html", "html")).has_value());
  EXPECT_FALSE(p.bret.related(anchor, Location{"request", {"params", "arguments"}}).empty());
}

TEST(Regions, LiteralReturnHasNoPath) {
  auto r = lower({{"s.py", "from mcp.server.fastmcp import FastMCP\nimport requests\nmcp = FastMCP('x')\n\n"
                           "@mcp.tool()\n"
                           "def ping(host):\n"
                           "    body = requests.get('https://status.example').text\n"
                           "    return 'ok'\n"}});
  Pipeline p = run_pipeline(std::move(r), "ping");
  EXPECT_FALSE(p.ext.empty());
  EXPECT_TRUE(p.ret_paths.empty());
}

TEST(Paths, RunningExampleYieldsOnePathPerDirection) {
  Pipeline p = run_fixture("running_example", "fetch_html");
  const Program &prog = p.prog();
  ASSERT_FALSE(p.req_paths.empty());
  const CandidatePath &rq = p.req_paths.front();
  EXPECT_EQ(rq.steps.front().rule, rule::seed);
  EXPECT_EQ(rq.steps.back().rule, rule::sink);
  EXPECT_EQ(rq.sink.rule_id, "js.fetch");
  EXPECT_EQ(rq.root_cause(), "R2/js.fetch");
  std::set<std::string> procs;
  for (const auto &s : rq.steps) procs.insert(prog.proc(s.procedure).name);
  EXPECT_TRUE(procs.count("Fetcher.html"));
  EXPECT_TRUE(procs.count("Fetcher._fetch"));

  ASSERT_FALSE(p.ret_paths.empty());
  const CandidatePath &rt = p.ret_paths.front();
  EXPECT_EQ(rt.seed.label, TaintLabel::ext);
  EXPECT_EQ(rt.sink.rule_id, "return");
}

TEST(Paths, EveryCorpusPathValidates) {
  std::size_t checked = 0;
  for (const auto &fx : corpus_fixtures()) {
    auto load = load_project(fixture(fx), {});
    auto spec = recover_entrypoints(load.program, default_catalog());
    for (const auto &e : spec.entrypoints) {
      Pipeline p = run_pipeline(load_project(fixture(fx), {}), e.tool);
      for (const auto *set : {&p.req_paths, &p.ret_paths})
        for (const auto &path : *set) {
          auto errors = validate_path(p.prog(), p.scope, path);
          EXPECT_TRUE(errors.empty()) << fx << " " << e.tool << ": " << (errors.empty() ? "" : errors[0]);
          ++checked;
        }
    }
  }
  EXPECT_GT(checked, 20u);
}

TEST(Paths, TamperedPathFailsValidation) {
  Pipeline p = run_fixture("running_example", "fetch_html");
  ASSERT_FALSE(p.req_paths.empty());
  CandidatePath bad = p.req_paths.front();
  bad.steps.erase(bad.steps.begin() + 1);
  EXPECT_FALSE(validate_path(p.prog(), p.scope, bad).empty());
  CandidatePath wrong_rule = p.req_paths.front();
  wrong_rule.steps[1].rule = rule::ret;
  EXPECT_FALSE(validate_path(p.prog(), p.scope, wrong_rule).empty());
}

TEST(Guards, PrivateHostCheckIsRecordedNotSuppressing) {
  Pipeline p = run_fixture("running_example", "fetch_html");
  const CandidatePath &rq = p.req_paths.front();
  bool seen = false;
  for (const auto &g : rq.guards)
    if (p.prog().stmt(g.stmt).kind == StmtKind::branch && g.kind == GuardKind::confinement_check) {
      seen = true;
      EXPECT_EQ(g.disposition, GuardDisposition::recorded_only);
    }
  EXPECT_TRUE(seen);
  auto refined = refine_paths(p.prog(), p.req_paths, nullptr);
  EXPECT_EQ(refined.kept.size(), p.req_paths.size());
}

TEST(Guards, CanonicalRootCheckSuppresses) {
  auto load = load_project(fixture("corpus/guards/canonical_root"), {});
  auto spec = recover_entrypoints(load.program, default_catalog());
  Pipeline p = run_pipeline(std::move(load), spec.entrypoints.at(0).tool);
  ASSERT_FALSE(p.req_paths.empty());
  auto refined = refine_paths(p.prog(), p.req_paths, nullptr);
  EXPECT_TRUE(refined.kept.empty());
  ASSERT_FALSE(refined.suppressed.empty());
  EXPECT_NE(refined.suppressed[0].reason.find("confinement_check"), std::string::npos) << refined.suppressed[0].reason;
}

TEST(Guards, AmbiguousGuardFollowsTheJudge) {
  Pipeline p = run_fixture("corpus/guards/absolute_path_shell", "view");
  ASSERT_FALSE(p.req_paths.empty());
  bool ambiguous = false;
  for (const auto &g : p.req_paths.front().guards) ambiguous |= g.ambiguous;
  ASSERT_TRUE(ambiguous);

  auto unjudged = refine_paths(p.prog(), p.req_paths, nullptr);
  ASSERT_FALSE(unjudged.kept.empty());
  EXPECT_EQ(path_confidence(unjudged.kept.front()), ClusterConfidence::assumed);
  ScriptedJudge no({}, Decision::controlled, Decision::not_blocks);
  auto kept = refine_paths(p.prog(), p.req_paths, &no);
  ASSERT_FALSE(kept.kept.empty());
  for (const auto &g : kept.kept.front().guards)
    if (g.ambiguous) {
      EXPECT_EQ(g.disposition, GuardDisposition::adjudicated);
    }
  EXPECT_EQ(path_confidence(kept.kept.front()), ClusterConfidence::adjudicated);

  ScriptedJudge yes({}, Decision::controlled, Decision::blocks);
  auto gone = refine_paths(p.prog(), p.req_paths, &yes);
  EXPECT_TRUE(gone.kept.empty());
  ASSERT_FALSE(gone.suppressed.empty());
  EXPECT_NE(gone.suppressed[0].reason.find("adjudicated"), std::string::npos) << gone.suppressed[0].reason;
}

TEST(Clusters, TwoHelpersIntoOneSinkShareACluster) {
  Report r = scan_fixture("corpus/structure/dual_helper");
  ASSERT_EQ(r.clusters.size(), 1u);
  EXPECT_EQ(r.clusters[0].members, 2u);
  EXPECT_EQ(r.clusters[0].root_cause.substr(0, 3), "R4/");
}

TEST(Clusters, SharedHelperIsReportedPerTool) {
  Report r = scan_fixture("corpus/structure/shared_helper");
  ASSERT_EQ(r.clusters.size(), 2u);
  EXPECT_NE(r.clusters[0].tool, r.clusters[1].tool);
  EXPECT_EQ(r.clusters[0].sink_stmt_id, r.clusters[1].sink_stmt_id);
}

TEST(Clusters, RepresentativeIsShortestAndKeyIsStable) {
  Pipeline p = run_fixture("corpus/structure/dual_helper", "format_file");
  ASSERT_EQ(p.req_paths.size(), 2u);
  auto clusters = dedupe_findings(p.prog(), p.req_paths);
  ASSERT_EQ(clusters.size(), 1u);
  const FindingCluster &c = clusters[0];
  EXPECT_EQ(c.members, 2u);
  for (const auto &path : p.req_paths) EXPECT_FALSE(path_precedes(path, c.representative));
  EXPECT_EQ(c.key(), "request_side|format_file|" + c.handler_id + "|" + c.sink_stmt_id + "|" + c.root_cause);
  std::vector<CandidatePath> reversed(p.req_paths.rbegin(), p.req_paths.rend());
  auto again = dedupe_findings(p.prog(), reversed);
  EXPECT_EQ(again[0].key(), c.key());
  EXPECT_EQ(again[0].representative.steps.size(), c.representative.steps.size());
  EXPECT_EQ(c.confidence, ClusterConfidence::certain);
}

TEST(Scoping, OtherToolsBranchesStayOutOfTheRegion) {
  Pipeline archive = run_fixture("corpus/structure/two_tool", "archive_dir");
  Pipeline echo = run_fixture("corpus/structure/two_tool", "echo_text");
  EXPECT_EQ(archive.req_paths.size(), 1u);
  EXPECT_TRUE(echo.req_paths.empty());
  // The echo tool's sink is not even a target of its analysis.
  EXPECT_TRUE(echo.ops.empty());
  ProcIndex anchor = echo.ep.scope->procedure;
  EXPECT_EQ(echo.fwd.labels_at(anchor, Location{"dir", {}}), 0);
}

TEST(Scoping, RequestDataReturnedToTheClientIsNotAFinding) {
  Pipeline echo = run_fixture("corpus/structure/two_tool", "echo_text");
  EXPECT_TRUE(echo.ret_paths.empty());
  ProcIndex anchor = echo.ep.scope->procedure;
  EXPECT_EQ(echo.fwd.labels_at(anchor, Location{"message", {}}), kReqBit);
}

TEST(Scoping, CapturedVariablesFlowIntoClosures) {
  auto r = lower({{"s.ts", "import { execSync } from 'child_process';\n"
                           "server.tool('run', {}, async ({ cmd }) => {\n"
                           "  const go = () => execSync(cmd);\n"
                           "  go();\n"
                           "  return { content: [] };\n"
                           "});\n"}});
  Pipeline p = run_pipeline(std::move(r), "run");
  ASSERT_EQ(p.req_paths.size(), 1u);
  EXPECT_TRUE(validate_path(p.prog(), p.scope, p.req_paths[0]).empty());
}

TEST(Scoping, UnresolvedMutatorTaintsItsReceiver) {
  auto r = lower({{"s.ts", "import { execSync } from 'child_process';\n"
                           "server.tool('run', {}, async ({ part }) => {\n"
                           "  const argv = ['ls'];\n"
                           "  argv.push(part);\n"
                           "  execSync(argv.join(' '));\n"
                           "  return { content: [] };\n"
                           "});\n"}});
  Pipeline p = run_pipeline(std::move(r), "run");
  ASSERT_EQ(p.req_paths.size(), 1u);
  bool mut = false;
  for (const auto &s : p.req_paths[0].steps) mut |= s.rule == rule::mutate;
  EXPECT_TRUE(mut);
}

TEST(Limits, UpdateCapMarksRegionIncomplete) {
  auto load = load_project(fixture("running_example"), {});
  auto spec = recover_entrypoints(load.program, default_catalog());
  const Program &prog = load.program;
  AnalysisScope scope = make_analysis_scope(prog, spec.entrypoints.at(0));
  auto seeds = seed_facts(seed_request_sources(prog, spec.entrypoints[0], nullptr));
  EngineLimits tight;
  tight.max_fact_updates = 3;
  ReachRegion r = reach_forward(prog, scope, seeds, tight);
  EXPECT_TRUE(r.incomplete);
  EXPECT_FALSE(r.incomplete_reason.empty());
  EngineLimits past;
  past.deadline = std::chrono::steady_clock::now() - std::chrono::seconds(1);
  EXPECT_TRUE(reach_forward(prog, scope, seeds, past).incomplete);
}

} // namespace
} // namespace mcpflow::testing
