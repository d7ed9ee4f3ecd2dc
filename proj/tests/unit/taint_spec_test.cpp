#include "test_support.hpp"

#include <gtest/gtest.h>

namespace mcpflow::testing {
namespace {

struct Loaded {
  LoadResult load;
  Specialization spec;
};

Loaded load_and_recover(const std::string &fx) {
  Loaded l{load_project(fixture(fx), {}), {}};
  l.spec = recover_entrypoints(l.load.program, default_catalog());
  return l;
}

const Entrypoint &entry(const Loaded &l, const std::string &tool) {
  for (const auto &e : l.spec.entrypoints)
    if (e.tool == tool) return e;
  throw std::runtime_error("no entrypoint for " + tool);
}

bool rule_mentions(const SinkRulePack &pack, const std::string &callee) {
  for (const auto &r : pack.rules)
    for (const auto &c : r.callees)
      if (c == callee) return true;
  return false;
}

TEST(RulePack, DefaultPackCoversEveryConfirmedPrimitive) {
  SinkRulePack pack = default_rule_pack();
  for (const char *c : {"execAsync", "execSync", "exec", "eval", "Function", "~conn.exec",
                        "asyncio.create_subprocess_shell", "subprocess.run", "~connection.query", "~client.query",
                        "~db.unsafe", "fetch"})
    EXPECT_TRUE(rule_mentions(pack, c)) << c;
  std::set<SinkCategory> cats;
  for (const auto &r : pack.rules) cats.insert(r.category);
  for (SinkCategory c : {SinkCategory::command_exec, SinkCategory::code_eval, SinkCategory::filesystem,
                         SinkCategory::network, SinkCategory::query})
    EXPECT_TRUE(cats.count(c)) << to_string(c);
}

TEST(RulePack, EmptyPackLoadsWithWarning) {
  SinkRulePack pack = parse_rule_pack("version 2\n");
  EXPECT_TRUE(pack.rules.empty());
  ASSERT_FALSE(pack.warnings.empty());
}

TEST(RulePack, DuplicateIdNamesBothLines) {
  try {
    parse_rule_pack("version 1\nrule a command_exec any x 0\n\nrule a command_exec any y 0\n", "p.rules");
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), "rule_pack_duplicate");
    std::string msg = e.what();
    EXPECT_NE(msg.find("p.rules:2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("p.rules:4"), std::string::npos) << msg;
  }
}

TEST(RulePack, MalformedLinesAreRejected) {
  for (const char *bad : {"rule a nonsense any x 0\n", "rule a command_exec any x\n", "rule a command_exec any x zero\n",
                          "frobnicate\n"}) {
    try {
      parse_rule_pack(std::string("version 1\n") + bad);
      FAIL() << bad;
    } catch (const Error &e) {
      EXPECT_EQ(e.code(), "rule_pack_malformed") << bad;
    }
  }
  try {
    load_rule_pack("/nonexistent/pack.rules");
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), "rule_pack_unreadable");
  }
}

TEST(OperationSinks, FetchInRunningExampleMatchesUrlPosition) {
  auto r = load_project(fixture("running_example"), {});
  auto sinks = match_operation_sinks(r.program, default_rule_pack());
  ASSERT_EQ(sinks.size(), 1u);
  EXPECT_EQ(sinks[0].rule_id, "js.fetch");
  EXPECT_EQ(sinks[0].positions, std::vector<int>{0});
  EXPECT_EQ(sinks[0].category, SinkCategory::network);
  EXPECT_EQ(r.program.proc(r.program.stmt(sinks[0].stmt).procedure).name, "Fetcher._fetch");
  auto ops = sinks[0].operands(r.program);
  ASSERT_EQ(ops.size(), 1u);
  EXPECT_EQ(ops[0].base, "url");
}

TEST(OperationSinks, ImportedExecSyncIsMatched) {
  auto r = load_project(fixture("corpus/structure/two_tool"), {});
  auto sinks = match_operation_sinks(r.program, default_rule_pack());
  ASSERT_EQ(sinks.size(), 1u);
  EXPECT_EQ(sinks[0].rule_id, "js.exec_sync");
  EXPECT_EQ(sinks[0].callee, "child_process.execSync");
}

TEST(OperationSinks, FirstPartyFunctionNamedLikeASinkIsNot) {
  auto r = lower({{"a.js", "function exec(cmd) { return cmd.length; }\nfunction f(x) { return exec(x); }\n"}});
  EXPECT_TRUE(match_operation_sinks(r.program, default_rule_pack()).empty());
}

TEST(OperationSinks, BindPositionsAreSeparated) {
  auto r = lower({{"a.js", "async function f(client, q, v) { return client.query(q, [v]); }\n"}});
  auto sinks = match_operation_sinks(r.program, default_rule_pack());
  ASSERT_EQ(sinks.size(), 1u);
  EXPECT_EQ(sinks[0].rule_id, "js.client_query");
  EXPECT_EQ(sinks[0].operands(r.program).at(0).base, "q");
  ASSERT_EQ(sinks[0].bound_operands(r.program).size(), 1u);
}

TEST(RequestSources, DispatcherSeedsArgumentsButNotRoutingField) {
  auto l = load_and_recover("running_example");
  const Program &p = l.load.program;
  auto seeds = seed_request_sources(p, entry(l, "fetch_html"), nullptr);
  ASSERT_FALSE(seeds.empty());
  bool arguments = false;
  for (const auto &s : seeds) {
    EXPECT_EQ(s.label, TaintLabel::req);
    EXPECT_NE(s.value.str(), "request.params.name");
    if (s.value.str() == "request.params.arguments") {
      arguments = true;
      EXPECT_EQ(s.rationale, SeedRationale::structured_accessor);
      EXPECT_EQ(s.confidence, SeedConfidence::certain);
    }
  }
  EXPECT_TRUE(arguments);
}

TEST(RequestSources, DirectToolParameterIsSeededCertain) {
  auto l = load_and_recover("corpus/patterns/direct_py");
  auto seeds = seed_request_sources(l.load.program, entry(l, "run_command"), nullptr);
  std::set<std::string> names;
  for (const auto &s : seeds) {
    names.insert(s.value.str());
    EXPECT_EQ(s.rationale, SeedRationale::handler_param);
    EXPECT_EQ(s.confidence, SeedConfidence::certain);
    EXPECT_EQ(s.value.kind, ValueKind::param);
  }
  EXPECT_EQ(names, (std::set<std::string>{"command", "cwd"}));
}

TEST(RequestSources, LiftingOffDropsStructuredSeeds) {
  auto l = load_and_recover("corpus/patterns/protocol_py");
  SeedOptions off;
  off.lift_accessors = false;
  for (const auto &s : seed_request_sources(l.load.program, l.spec.entrypoints.at(0), nullptr, off))
    EXPECT_NE(s.rationale, SeedRationale::structured_accessor);
}

TEST(RequestSources, NoSeedIsALiteral) {
  for (const auto &fx : corpus_fixtures()) {
    auto l = load_and_recover(fx);
    for (const auto &e : l.spec.entrypoints)
      for (const auto &s : seed_request_sources(l.load.program, e, nullptr)) EXPECT_FALSE(s.value.is_literal()) << fx;
    for (const auto &s : recognize_external_sources(l.load.program, nullptr)) EXPECT_FALSE(s.value.is_literal()) << fx;
  }
}

TEST(RequestSources, CoercedArgumentIsAmbiguous) {
  auto r = lower({{"s.py", "from mcp.server.fastmcp import FastMCP\nimport os\nmcp = FastMCP('x')\n\n"
                           "@mcp.tool()\n"
                           "def kill(pid):\n"
                           "    n = int(pid)\n"
                           "    os.system('kill ' + str(n))\n"}});
  auto spec = recover_entrypoints(r.program, default_catalog());
  ASSERT_EQ(spec.entrypoints.size(), 1u);
  auto off = seed_request_sources(r.program, spec.entrypoints[0], nullptr);
  ASSERT_EQ(off.size(), 1u);
  EXPECT_EQ(off[0].confidence, SeedConfidence::assumed);

  ScriptedJudge refuse({}, Decision::not_controlled, Decision::not_blocks);
  EXPECT_TRUE(seed_request_sources(r.program, spec.entrypoints[0], &refuse).empty());
  EXPECT_EQ(refuse.calls(), 1u);

  ScriptedJudge accept({}, Decision::controlled, Decision::not_blocks);
  auto on = seed_request_sources(r.program, spec.entrypoints[0], &accept);
  ASSERT_EQ(on.size(), 1u);
  EXPECT_EQ(on[0].confidence, SeedConfidence::adjudicated);
}

TEST(ExternalSources, ResponseTextIsRecognized) {
  auto r = load_project(fixture("running_example"), {});
  auto seeds = recognize_external_sources(r.program, nullptr);
  ASSERT_EQ(seeds.size(), 1u);
  const TaintSeed &s = seeds[0];
  EXPECT_EQ(s.label, TaintLabel::ext);
  EXPECT_EQ(s.rationale, SeedRationale::external_recognizer);
  EXPECT_EQ(s.value.base, "html");
  EXPECT_EQ(r.program.proc(s.procedure).name, "Fetcher.html");
}

TEST(ExternalSources, BodyReadOnParameterNeedsTheJudge) {
  auto r = load_project(fixture("corpus/structure/read_body_wrapper"), {});
  auto in_read_body = [&](const std::vector<TaintSeed> &seeds) {
    return std::count_if(seeds.begin(), seeds.end(),
                         [&](const TaintSeed &s) { return r.program.proc(s.procedure).name == "readBody"; });
  };
  EXPECT_EQ(in_read_body(recognize_external_sources(r.program, nullptr)), 0);

  ScriptedJudge yes({{AdjudicationKind::source_controllability, "carrier", Decision::controlled}},
                    Decision::not_controlled, Decision::not_blocks);
  auto seeds = recognize_external_sources(r.program, &yes);
  ASSERT_EQ(in_read_body(seeds), 1);
  for (const auto &s : seeds)
    if (r.program.proc(s.procedure).name == "readBody") {
      EXPECT_EQ(s.value.base, "payload");
      EXPECT_EQ(s.confidence, SeedConfidence::adjudicated);
    }

  ScriptedJudge no({}, Decision::not_controlled, Decision::not_blocks);
  EXPECT_EQ(in_read_body(recognize_external_sources(r.program, &no)), 0);
}

TEST(ExternalSources, SubprocessHandleSeedsOnlyOutputFields) {
  auto r = lower({{"a.py", "import subprocess\n\ndef f(c):\n    p = subprocess.run(c, capture_output=True)\n"
                           "    return p.returncode\n"}});
  auto seeds = recognize_external_sources(r.program, nullptr);
  std::set<std::string> values;
  for (const auto &s : seeds) values.insert(s.value.str());
  EXPECT_EQ(values, (std::set<std::string>{"p.stderr", "p.stdout"}));
}

TEST(ReturnSinks, HandlerAndScopeReturnsAreSinks) {
  auto l = load_and_recover("running_example");
  const Program &p = l.load.program;
  auto sinks = derive_return_sinks(p, entry(l, "fetch_html"));
  std::map<std::string, int> by_proc;
  for (const auto &s : sinks) by_proc[p.proc(p.stmt(s.stmt).procedure).name]++;
  EXPECT_EQ(by_proc["Fetcher.html"], 2);
  EXPECT_EQ(sinks.size(), 3u);
}

TEST(ReturnSinks, OtherToolsBranchesAreExcluded) {
  auto l = load_and_recover("corpus/structure/two_tool");
  const Program &p = l.load.program;
  auto archive = derive_return_sinks(p, entry(l, "archive_dir"));
  auto echo = derive_return_sinks(p, entry(l, "echo_text"));
  ASSERT_EQ(archive.size(), 1u);
  ASSERT_EQ(echo.size(), 1u);
  EXPECT_NE(archive[0].stmt, echo[0].stmt);
  EXPECT_LT(p.stmt(archive[0].stmt).location.begin, p.stmt(echo[0].stmt).location.begin);
}

TEST(ReturnSinks, BareReturnCarriesNone) {
  auto r = lower({{"s.py", "from mcp.server.fastmcp import FastMCP\nmcp = FastMCP('x')\n\n"
                           "@mcp.tool()\ndef t(a):\n    return\n"}});
  auto spec = recover_entrypoints(r.program, default_catalog());
  auto sinks = derive_return_sinks(r.program, spec.entrypoints.at(0));
  ASSERT_EQ(sinks.size(), 1u);
  EXPECT_TRUE(sinks[0].value.is_literal());
}

} // namespace
} // namespace mcpflow::testing
