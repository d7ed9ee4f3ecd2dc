#include "test_support.hpp"

#include <gtest/gtest.h>

namespace mcpflow::testing {
namespace {

const PublicationFact *publication_for(const std::vector<PublicationFact> &facts, const std::string &tool) {
  for (const auto &f : facts)
    if (f.tool == tool) return &f;
  return nullptr;
}

const DispatchFact *dispatch_for(const std::vector<DispatchFact> &facts, const std::string &tool) {
  for (const auto &f : facts)
    if (f.tool == tool) return &f;
  return nullptr;
}

std::string handler_name(const Program &p, const std::optional<ProcIndex> &h) {
  return h ? p.proc(*h).name : "<none>";
}

TEST(PublicationFacts, DecoratedFunctionIsPublishedUnderItsName) {
  auto r = lower({{"s.py", "from mcp.server.fastmcp import FastMCP\n"
                           "mcp = FastMCP('x')\n\n"
                           "@mcp.tool()\n"
                           "def run_command(cmd: str) -> str:\n"
                           "    return cmd\n\n"
                           "@mcp.tool(name='renamed')\n"
                           "def other(a):\n"
                           "    return a\n"}});
  auto facts = collect_publication_facts(r.program, default_catalog());
  ASSERT_EQ(facts.size(), 2u);
  const PublicationFact *a = publication_for(facts, "run_command");
  ASSERT_NE(a, nullptr);
  EXPECT_EQ(handler_name(r.program, a->handler), "run_command");
  EXPECT_EQ(a->witness.variant, "py.decorator.call");
  const PublicationFact *b = publication_for(facts, "renamed");
  ASSERT_NE(b, nullptr);
  EXPECT_EQ(handler_name(r.program, b->handler), "other");
}

TEST(PublicationFacts, ListToolsDeclarationLeavesHandlerUnresolved) {
  auto r = load_project(fixture("running_example"), {});
  auto facts = collect_publication_facts(r.program, default_catalog());
  const PublicationFact *f = publication_for(facts, "fetch_html");
  ASSERT_NE(f, nullptr);
  EXPECT_FALSE(f->handler.has_value());
  EXPECT_FALSE(f->unresolved_reason.empty());
  EXPECT_EQ(f->witness.variant, "js.tool.declaration");
  EXPECT_TRUE(f->schema.has_value());
}

TEST(PublicationFacts, ToolObjectExecuteFieldResolvesToFunction) {
  auto r = lower({{"s.ts", "function doX(args) { return args.q; }\n"
                           "server.addTool({ name: 'x', parameters: {}, execute: doX });\n"}});
  auto facts = collect_publication_facts(r.program, default_catalog());
  ASSERT_EQ(facts.size(), 1u);
  EXPECT_EQ(facts[0].tool, "x");
  EXPECT_EQ(handler_name(r.program, facts[0].handler), "doX");
  EXPECT_EQ(facts[0].witness.variant, "js.add_tool");
}

TEST(PublicationFacts, IdentityWrapperIsSeenThrough) {
  auto r = lower({{"s.ts", "function logged(fn) { return fn; }\n"
                           "function impl({ cmd }) { return cmd; }\n"
                           "server.tool('x', {}, logged(impl));\n"}});
  auto facts = collect_publication_facts(r.program, default_catalog());
  ASSERT_EQ(facts.size(), 1u);
  EXPECT_EQ(handler_name(r.program, facts[0].handler), "impl");
}

TEST(ResolveHandler, AliasChainBeyondDepthLimitIsReported) {
  auto r = lower({{"s.py", "def target(a):\n    return a\n\n"
                           "h1 = target\nh2 = h1\nh3 = h2\n"}});
  ProcIndex module = *r.program.units[0].module_procedure;
  Resolution shallow = resolve_handler(r.program, module, ValueRef::local("h3"), 2);
  EXPECT_FALSE(shallow.resolved());
  EXPECT_EQ(shallow.reason, "depth-exceeded");
  Resolution deep = resolve_handler(r.program, module, ValueRef::local("h3"));
  ASSERT_TRUE(deep.resolved());
  EXPECT_EQ(r.program.proc(deep.procs[0]).name, "target");
}

TEST(DispatchFacts, RunningExampleBranchScopesTheForwardedCall) {
  auto r = load_project(fixture("running_example"), {});
  auto facts = collect_dispatch_facts(r.program, default_catalog());
  const DispatchFact *f = dispatch_for(facts, "fetch_html");
  ASSERT_NE(f, nullptr);
  EXPECT_EQ(f->family, DispatchFamily::branch);
  EXPECT_EQ(handler_name(r.program, f->handler), "Fetcher.html");
  ASSERT_TRUE(f->scope.has_value());
  StmtIndex forward = call_to(r.program, "Fetcher.html");
  EXPECT_TRUE(f->scope->statements.count(forward));
  // The unknown-tool throw lies outside the scope.
  StmtIndex thrown = call_to(r.program, "Error");
  EXPECT_FALSE(f->scope->statements.count(thrown));
  for (StmtIndex s : f->scope->statements) EXPECT_EQ(r.program.stmt(s).procedure, f->scope->procedure);
  EXPECT_FALSE(f->routing.empty());
}

TEST(DispatchFacts, RegistryLiteralYieldsOneFactPerEntry) {
  auto r = load_project(fixture("corpus/dispatch/registry_literal"), {});
  auto facts = collect_dispatch_facts(r.program, default_catalog());
  ASSERT_EQ(facts.size(), 2u);
  EXPECT_EQ(handler_name(r.program, dispatch_for(facts, "stat_file")->handler), "handle_stat");
  EXPECT_EQ(handler_name(r.program, dispatch_for(facts, "remove_path")->handler), "handle_remove");
  for (const auto &f : facts) {
    EXPECT_EQ(f.family, DispatchFamily::registry);
    EXPECT_FALSE(f.scope.has_value());
  }
}

TEST(DispatchFacts, ReflectiveLookupEnumeratesPrefixedMethods) {
  auto r = load_project(fixture("corpus/dispatch/reflective"), {});
  auto facts = collect_dispatch_facts(r.program, default_catalog());
  std::set<std::string> tools;
  for (const auto &f : facts) {
    if (f.family != DispatchFamily::reflective) continue;
    tools.insert(f.tool);
    EXPECT_NE(f.confidence, Confidence::exact);
  }
  EXPECT_EQ(tools, (std::set<std::string>{"deploy", "status"}));
  EXPECT_EQ(handler_name(r.program, dispatch_for(facts, "deploy")->handler), "ToolBox.handle_deploy");
  auto spec = recover_entrypoints(r.program, default_catalog());
  for (const auto &e : spec.entrypoints) EXPECT_TRUE(e.assumed) << e.tool;
}

TEST(DispatchFacts, ElifArmsHaveDisjointScopes) {
  for (const char *fx : {"corpus/dispatch/if_elif", "corpus/dispatch/switch", "corpus/dispatch/match_case"}) {
    auto r = load_project(fixture(fx), {});
    auto facts = collect_dispatch_facts(r.program, default_catalog());
    ASSERT_GE(facts.size(), 2u) << fx;
    for (std::size_t i = 0; i < facts.size(); ++i)
      for (std::size_t j = i + 1; j < facts.size(); ++j) {
        if (!facts[i].scope || !facts[j].scope) continue;
        for (StmtIndex s : facts[i].scope->statements)
          EXPECT_FALSE(facts[j].scope->statements.count(s)) << fx << " " << facts[i].tool << "/" << facts[j].tool;
      }
  }
}

TEST(Specialization, EmptyInputGivesNoEntrypoints) {
  Program empty;
  auto spec = specialize_entrypoints(empty, {}, {});
  EXPECT_TRUE(spec.entrypoints.empty());
  EXPECT_TRUE(spec.gaps.empty());
}

TEST(Specialization, PublicationOnlyCoversTheWholeHandler) {
  auto r = load_project(fixture("corpus/patterns/direct_py"), {});
  auto spec = recover_entrypoints(r.program, default_catalog());
  ASSERT_EQ(spec.entrypoints.size(), 1u);
  const Entrypoint &e = spec.entrypoints[0];
  EXPECT_EQ(e.tool, "run_command");
  EXPECT_FALSE(e.scope.has_value());
  EXPECT_EQ(e.provenance, Provenance::from_publication_fallback);
}

TEST(Specialization, DispatchWinsOverDeclarationAndUnresolvedHandlerIsAGap) {
  auto r = load_project(fixture("running_example"), {});
  auto spec = recover_entrypoints(r.program, default_catalog());
  ASSERT_EQ(spec.entrypoints.size(), 1u);
  EXPECT_EQ(spec.entrypoints[0].provenance, Provenance::from_dispatch);
  EXPECT_TRUE(spec.gaps.empty());

  auto decl_only = lower({{"s.py", "from mcp.types import Tool\n\n"
                                   "TOOLS = [Tool(name='orphan', inputSchema={})]\n"}});
  auto gap_spec = recover_entrypoints(decl_only.program, default_catalog());
  EXPECT_TRUE(gap_spec.entrypoints.empty());
  ASSERT_EQ(gap_spec.gaps.size(), 1u);
  EXPECT_EQ(gap_spec.gaps[0].tool, "orphan");
}

TEST(Specialization, EntrypointIdsAreStableAcrossRuns) {
  auto a = recover_entrypoints(load_project(fixture("corpus/dispatch/if_elif"), {}).program, default_catalog());
  auto b = recover_entrypoints(load_project(fixture("corpus/dispatch/if_elif"), {}).program, default_catalog());
  ASSERT_EQ(a.entrypoints.size(), b.entrypoints.size());
  for (std::size_t i = 0; i < a.entrypoints.size(); ++i) EXPECT_EQ(a.entrypoints[i].id, b.entrypoints[i].id);
}

TEST(Catalog, EveryRecognizedVariantIsListed) {
  PatternCatalog cat = default_catalog();
  EXPECT_GE(cat.count(PatternKind::publication), 6u);
  EXPECT_GE(cat.count(PatternKind::dispatcher), 6u);
  for (const auto &fx : corpus_fixtures()) {
    auto r = load_project(fixture(fx), {});
    for (const auto &f : collect_publication_facts(r.program, cat))
      EXPECT_NE(cat.find(f.witness.variant), nullptr) << fx << " " << f.witness.variant;
    for (const auto &f : collect_dispatch_facts(r.program, cat))
      EXPECT_NE(cat.find(f.witness.variant), nullptr) << fx << " " << f.witness.variant;
  }
}

TEST(Catalog, RemovingAVariantDisablesIt) {
  PatternCatalog cat = default_catalog();
  std::erase_if(cat.variants, [](const PatternVariant &v) { return v.id == "py.decorator.call"; });
  auto r = load_project(fixture("corpus/patterns/direct_py"), {});
  EXPECT_TRUE(collect_publication_facts(r.program, cat).empty());
}

TEST(Catalog, ParseErrorsCarryCodesAndLines) {
  try {
    parse_catalog("version 1\nvariant sideways x.y any - | t | b\n", "c.txt");
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), "catalog_malformed");
    EXPECT_NE(std::string(e.what()).find("c.txt:2"), std::string::npos) << e.what();
  }
  try {
    parse_catalog("version 1\nvariant publication a any - | t | b\nvariant publication a any - | t | b\n");
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), "catalog_duplicate");
  }
}

TEST(Catalog, ListingNamesEveryVariant) {
  PatternCatalog cat = default_catalog();
  std::string listing = format_catalog(cat);
  for (const auto &v : cat.variants) EXPECT_NE(listing.find(v.id), std::string::npos) << v.id;
}

} // namespace
} // namespace mcpflow::testing
