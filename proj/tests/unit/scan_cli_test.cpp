#include "test_support.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <fstream>

namespace mcpflow::testing {
namespace {

using nlohmann::json;

std::filesystem::path scratch(const std::string &name) {
  auto dir = std::filesystem::temp_directory_path() / ("mcpflow-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

int line_of_text(const std::filesystem::path &file, const std::string &needle) {
  std::ifstream in(file);
  std::string line;
  for (int n = 1; std::getline(in, line); ++n)
    if (line.find(needle) != std::string::npos) return n;
  return -1;
}

TEST(Scan, RunningExampleReportsBothDirections) {
  Report r = scan_fixture("running_example");
  ASSERT_EQ(r.entrypoints.size(), 1u);
  EXPECT_EQ(r.entrypoints[0].tool, "fetch_html");
  ASSERT_EQ(r.clusters.size(), 2u);
  const ReportCluster *req = find_cluster(r, "request_side", "fetch_html");
  ASSERT_NE(req, nullptr);
  EXPECT_EQ(req->sink_rule, "js.fetch");
  EXPECT_EQ(req->sink_category, "network");
  EXPECT_EQ(req->sink_location.path, "src/fetcher.ts");
  EXPECT_EQ(req->sink_location.start_line, line_of_text(fixture("running_example/src/fetcher.ts"), "await fetch(url"));
  EXPECT_EQ(req->source_label, "req");
  const ReportCluster *ret = find_cluster(r, "return_side", "fetch_html");
  ASSERT_NE(ret, nullptr);
  EXPECT_EQ(ret->source_label, "ext");
  EXPECT_EQ(ret->source_location.start_line,
            line_of_text(fixture("running_example/src/fetcher.ts"), "await response.text()"));
  EXPECT_TRUE(r.gaps.empty());
  EXPECT_TRUE(r.metadata.degradations.empty());
}

TEST(Scan, EmptyTreeProducesEmptyReport) {
  auto dir = scratch("empty");
  Report r = scan(test_config(dir));
  EXPECT_TRUE(r.clusters.empty());
  EXPECT_TRUE(r.entrypoints.empty());
  EXPECT_EQ(r.metadata.units_lowered + r.metadata.units_partial + r.metadata.units_skipped, 0u);
  EXPECT_FALSE(r.metadata.warnings.empty());
}

TEST(Scan, OutputIsByteIdenticalAcrossRunsAndThreadCounts) {
  ScanConfig one = test_config(fixture(""));
  ScanConfig many = one;
  many.threads = 6;
  std::string a = emit_report(scan(one), OutputFormat::json);
  std::string b = emit_report(scan(one), OutputFormat::json);
  std::string c = emit_report(scan(many), OutputFormat::json);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  EXPECT_EQ(emit_report(scan(one), OutputFormat::sarif), emit_report(scan(many), OutputFormat::sarif));
}

TEST(Scan, EveryLocationLiesUnderTheRoot) {
  auto root = fixture("");
  Report r = scan(test_config(root));
  auto check = [&](const ReportLocation &l) {
    ASSERT_FALSE(l.path.empty());
    EXPECT_NE(l.path[0], '/') << l.path;
    EXPECT_EQ(l.path.find(".."), std::string::npos) << l.path;
    EXPECT_TRUE(std::filesystem::exists(root / l.path)) << l.path;
    EXPECT_GT(l.start_line, 0);
  };
  for (const auto &c : r.clusters) {
    check(c.source_location);
    check(c.sink_location);
    for (const auto &s : c.steps) check(s.location);
    for (const auto &g : c.guards) check(g.location);
  }
  for (const auto &e : r.entrypoints) check(e.location);
  for (const auto &g : r.gaps) check(g.location);
}

TEST(Scan, CoverageGapsAreReported) {
  Report cb = scan_fixture("corpus/structure/callback_flow");
  EXPECT_TRUE(cb.clusters.empty());
  ASSERT_EQ(cb.gaps.size(), 1u);
  EXPECT_EQ(cb.gaps[0].kind, "incomplete_region");
  EXPECT_EQ(cb.gaps[0].tool, "run_step");

  Report partial = scan_fixture("corpus/structure/partial_unit");
  EXPECT_EQ(partial.metadata.units_partial, 1u);
  EXPECT_EQ(partial.metadata.unsupported.at("generator"), 1);
  ASSERT_FALSE(partial.gaps.empty());
  EXPECT_EQ(partial.gaps[0].kind, "partially_lowered");

  auto dir = scratch("orphan");
  std::ofstream(dir / "s.py") << "from mcp.types import Tool\n\nTOOLS = [Tool(name='orphan', inputSchema={})]\n";
  Report orphan = scan(test_config(dir));
  ASSERT_EQ(orphan.gaps.size(), 1u);
  EXPECT_EQ(orphan.gaps[0].kind, "unresolved_handler");
  EXPECT_EQ(orphan.gaps[0].tool, "orphan");
}

TEST(Scan, AblationsAreRecordedAndTakeEffect) {
  Report off = scan_fixture("running_example", [](ScanConfig &c) { c.entrypoint_recovery = false; });
  EXPECT_TRUE(off.clusters.empty());
  EXPECT_FALSE(off.metadata.entrypoint_recovery);
  Report flat = scan_fixture("running_example", [](ScanConfig &c) { c.lift_accessors = false; });
  EXPECT_FALSE(flat.metadata.accessor_lifting);
  EXPECT_EQ(count_clusters(flat, "request_side"), 0u);
  EXPECT_EQ(count_clusters(flat, "return_side"), 1u);
}

TEST(Scan, JudgeModesAndDegradation) {
  Report off = scan_fixture("corpus/structure/read_body_wrapper", [](ScanConfig &c) { c.judge_mode = JudgeMode::off; });
  EXPECT_EQ(off.metadata.judge_mode, "off");
  EXPECT_TRUE(off.clusters.empty());
  Report heuristic = scan_fixture("corpus/structure/read_body_wrapper");
  ASSERT_EQ(heuristic.clusters.size(), 1u);
  EXPECT_EQ(heuristic.clusters[0].confidence, "adjudicated");

  Report remote = scan_fixture("corpus/structure/read_body_wrapper", [](ScanConfig &c) {
    c.judge_mode = JudgeMode::remote;
    c.judge_endpoint = "http://127.0.0.1:9/judge";
    c.judge_timeout_seconds = 0.5;
  });
  // Unreachable judge: heuristic answers stand in, and the run says so.
  EXPECT_EQ(remote.clusters.size(), 1u);
  EXPECT_EQ(remote.metadata.judge_mode, "remote");
  EXPECT_FALSE(remote.metadata.degradations.empty());
}

TEST(Scan, InvalidInputsFailBeforeLoading) {
  auto expect_code = [](const std::function<void(ScanConfig &)> &tweak, const std::string &code) {
    ScanConfig c = test_config(fixture("running_example"));
    tweak(c);
    try {
      scan(c);
      ADD_FAILURE() << "expected " << code;
    } catch (const Error &e) {
      EXPECT_EQ(e.code(), code);
    }
  };
  expect_code([](ScanConfig &c) { c.root = "/nonexistent/root"; }, "root_unreadable");
  expect_code([](ScanConfig &c) { c.rules_path = "/nonexistent.rules"; }, "rule_pack_unreadable");
  expect_code([](ScanConfig &c) { c.catalog_path = "/nonexistent.txt"; }, "catalog_unreadable");
}

TEST(Scan, DebugDumpWritesProgramAndTraces) {
  auto dir = scratch("dump");
  scan_fixture("running_example", [&](ScanConfig &c) { c.debug_dump = dir; });
  EXPECT_TRUE(std::filesystem::exists(dir / "program.txt"));
  std::size_t traces = 0;
  for (const auto &e : std::filesystem::directory_iterator(dir))
    traces += e.path().filename().string().rfind("fetch_html-", 0) == 0;
  EXPECT_EQ(traces, 1u);
}

TEST(Report, JsonCarriesClustersStepsAndMetadata) {
  json j = json::parse(emit_report(scan_fixture("running_example"), OutputFormat::json));
  EXPECT_EQ(j["clusters"].size(), 2u);
  for (const auto &c : j["clusters"]) {
    EXPECT_GE(c["steps"].size(), 2u);
    EXPECT_EQ(c["steps"].back()["rule"], "R6");
    EXPECT_EQ(c["id"].get<std::string>().size(), 16u);
  }
  EXPECT_TRUE(j["metadata"].contains("rule_pack_version"));
  EXPECT_EQ(j["metadata"]["units"]["lowered"], 3);
}

TEST(Report, SarifWithoutFindingsIsWellFormed) {
  auto dir = scratch("sarif-empty");
  json j = json::parse(emit_report(scan(test_config(dir)), OutputFormat::sarif));
  EXPECT_EQ(j["version"], "2.1.0");
  ASSERT_EQ(j["runs"].size(), 1u);
  EXPECT_TRUE(j["runs"][0]["results"].empty());
  EXPECT_EQ(j["runs"][0]["tool"]["driver"]["name"], "mcpflow");
  EXPECT_TRUE(j["runs"][0]["tool"]["driver"]["rules"].empty());
}

TEST(Report, SarifCodeFlowMirrorsThePath) {
  Report r = scan_fixture("running_example");
  const ReportCluster *req = find_cluster(r, "request_side", "fetch_html");
  ASSERT_NE(req, nullptr);
  json j = json::parse(emit_report(r, OutputFormat::sarif));
  const json *result = nullptr;
  for (const auto &res : j["runs"][0]["results"])
    if (res["partialFingerprints"]["clusterId"] == req->id) result = &res;
  ASSERT_NE(result, nullptr);
  EXPECT_EQ((*result)["ruleId"], "request_side/js.fetch");
  const json &locs = (*result)["codeFlows"][0]["threadFlows"][0]["locations"];
  ASSERT_EQ(locs.size(), req->steps.size());
  const json &last = locs.back()["location"]["physicalLocation"];
  EXPECT_EQ(last["artifactLocation"]["uri"], "src/fetcher.ts");
  EXPECT_EQ(last["region"]["startLine"], req->sink_location.start_line);
}

TEST(Report, TextListsClustersAndGaps) {
  std::string t = emit_report(scan_fixture("running_example"), OutputFormat::text);
  EXPECT_NE(t.find("2 finding cluster(s)"), std::string::npos);
  EXPECT_NE(t.find("[request_side] fetch_html"), std::string::npos);
  EXPECT_NE(t.find("isPrivateHost"), std::string::npos);
  std::string g = emit_report(scan_fixture("corpus/structure/callback_flow"), OutputFormat::text);
  EXPECT_NE(g.find("coverage gaps:"), std::string::npos);
}

TEST(Cli, ExitCodesFollowTheOutcome) {
  EXPECT_EQ(run_cli({"scan", fixture("running_example").string(), "--no-llm"}).exit_code, 1);
  EXPECT_EQ(run_cli({"scan", scratch("cli-empty").string(), "--no-llm"}).exit_code, 0);
  EXPECT_EQ(run_cli({"scan", "/nonexistent/root"}).exit_code, 2);
  auto bad = scratch("cli-bad") / "bad.rules";
  std::ofstream(bad) << "version 1\nrule broken\n";
  EXPECT_EQ(run_cli({"scan", fixture("running_example").string(), "--rules", bad.string()}).exit_code, 2);
  EXPECT_EQ(run_cli({"scan", fixture("running_example").string(), "--judge-mode", "remote"}).exit_code, 2);
  EXPECT_EQ(run_cli({"scan", fixture("running_example").string(), "--format", "xml"}).exit_code, 2);
  EXPECT_EQ(run_cli({"scan", fixture("running_example").string(), "--timeout-per-entrypoint", "0"}).exit_code, 2);
}

TEST(Cli, ConfigFileSuppliesDefaultsAndFlagsWin) {
  auto dir = scratch("cli-config");
  std::ofstream(dir / "mcpflow.toml") << "[scan]\nformat = \"sarif\"\nno-llm = true\nthreads = 2\n";
  std::string root = fixture("running_example").string(), cfg = (dir / "mcpflow.toml").string();
  auto from_file = run_cli({"scan", root, "--config", cfg});
  EXPECT_EQ(from_file.exit_code, 1);
  EXPECT_EQ(json::parse(from_file.out)["version"], "2.1.0");
  auto overridden = run_cli({"scan", root, "--config", cfg, "--format", "json"});
  EXPECT_TRUE(json::parse(overridden.out).contains("clusters"));
}

TEST(Cli, OutputFileAndListings) {
  auto out = scratch("cli-out") / "report.json";
  auto r = run_cli({"scan", fixture("running_example").string(), "--no-llm", "-o", out.string()});
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_TRUE(r.out.empty());
  std::ifstream in(out);
  std::string body((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(json::parse(body)["clusters"].size(), 2u);

  auto patterns = run_cli({"--list-patterns"});
  EXPECT_EQ(patterns.exit_code, 0);
  for (const auto &v : default_catalog().variants) EXPECT_NE(patterns.out.find(v.id), std::string::npos) << v.id;
  EXPECT_EQ(run_cli({"scan", "--list-patterns"}).exit_code, 0);
  EXPECT_EQ(run_cli({"--version"}).exit_code, 0);
}

} // namespace
} // namespace mcpflow::testing
