// Acceptance checker: one PASS/FAIL line per criterion, nonzero exit when
// any criterion fails.

#include "model_oracle.hpp"
#include "test_support.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

using namespace mcpflow;
using namespace mcpflow::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string &what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool run_criterion(int number, const std::string &title, const std::function<void(Outcome &)> &body) {
  Outcome o;
  auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception &e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  char timing[32];
  std::snprintf(timing, sizeof timing, "%.2fs", seconds_since(t0));
  std::cout << "AC" << number << " " << (o.pass ? "PASS" : "FAIL") << "  " << title << " (" << timing << ")"
            << o.detail.str() << std::endl;
  return o.pass;
}

std::size_t certain_clusters(const Report &r, std::vector<std::string> *keys = nullptr) {
  std::size_t n = 0;
  for (const auto &c : r.clusters)
    if (c.confidence == "certain") {
      ++n;
      if (keys) keys->push_back(c.id + "|" + c.root_cause + "|" + std::to_string(c.members));
    }
  return n;
}

void running_example(Outcome &o) {
  auto t0 = Clock::now();
  Report r = scan_fixture("running_example");
  double elapsed = seconds_since(t0);
  o.require(count_clusters(r, "request_side") == 1, "exactly one request-side cluster");
  o.require(count_clusters(r, "return_side") == 1, "exactly one return-side cluster");
  if (const ReportCluster *c = find_cluster(r, "request_side")) {
    o.require(c->source_value.rfind("request.params.arguments", 0) == 0, "source is the argument payload");
    o.require(c->sink_category == "network" && c->sink_callee.find("fetch") != std::string::npos,
              "sink is the outbound fetch");
    bool guard = false;
    for (const auto &g : c->guards)
      guard |= g.kind == "confinement_check" && g.disposition == "recorded_only" &&
               g.location.excerpt.find("isPrivateHost") != std::string::npos;
    o.require(guard, "private-address guard recorded_only");
  }
  if (const ReportCluster *c = find_cluster(r, "return_side")) {
    o.require(c->source_label == "ext" && c->source_location.excerpt.find("response.text()") != std::string::npos,
              "return-side source is the body read");
    o.require(c->sink_rule == "return", "return-side sink is the protocol return");
  }
  o.require(elapsed < 5.0, "runtime under 5 s");
  o.detail << " clusters=" << r.clusters.size();
}

void pattern_recall(Outcome &o) {
  auto t0 = Clock::now();
  int hit = 0;
  const char *fixtures[] = {"direct_py", "direct_js", "registration_py", "registration_js", "protocol_py", "protocol_js"};
  for (const char *fx : fixtures) {
    Report r = scan_fixture(std::string("corpus/patterns/") + fx);
    bool found = false;
    for (const auto &c : r.clusters) found |= c.direction == "request_side" && c.sink_category == "command_exec";
    hit += found;
    o.require(found, fx);
  }
  o.require(seconds_since(t0) < 30.0, "runtime under 30 s");
  o.detail << " detected " << hit << "/6";
}

void dispatcher_coverage(Outcome &o) {
  int hit = 0;
  const std::pair<const char *, const char *> fixtures[] = {
      {"if_elif", "restart_service"}, {"switch", "stop_container"}, {"match_case", "pkg_install"},
      {"registry_literal", "remove_path"}, {"map_get", "traceroute"}, {"reflective", "deploy"}};
  for (const auto &[fx, tool] : fixtures) {
    Report r = scan_fixture(std::string("corpus/dispatch/") + fx);
    bool found = count_clusters(r, "request_side", tool) == 1;
    hit += found;
    o.require(found, std::string(fx) + " -> " + tool);
  }
  o.detail << " detected " << hit << "/6";
}

void oracle_equivalence(Outcome &o) {
  constexpr std::uint64_t kBaseSeed = 0xacce5500;
  auto t0 = Clock::now();
  int exact = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    RandomModel m = random_model(kBaseSeed + i);
    AnalysisScope scope = make_analysis_scope(m.program, 0);
    bool fwd = reach_forward(m.program, scope, m.sources).snapshot() == naive_forward(m.program, 0, m.sources);
    bool bwd = reach_backward(m.program, scope, m.sinks).snapshot() == naive_backward(m.program, 0, m.sinks);
    if (fwd && bwd) ++exact;
    else o.detail << " mismatch@seed=" << m.seed;
  }
  o.require(exact == 200, "all 200 models exact");
  o.require(seconds_since(t0) < 60.0, "runtime under 60 s");
  o.detail << " exact " << exact << "/200 seeds " << kBaseSeed << ".." << kBaseSeed + 199;
}

void guard_refinement(Outcome &o) {
  int ok = 0;
  const std::pair<const char *, std::size_t> fixtures[] = {
      {"parameterized_query", 0}, {"canonical_root", 0}, {"absolute_path_shell", 1}, {"private_ip_fetch", 1}};
  for (const auto &[fx, expected] : fixtures) {
    Report r = scan_fixture(std::string("corpus/guards/") + fx);
    bool good = r.clusters.size() == expected;
    if (expected == 0) good = good && !r.suppressed.empty();
    ok += good;
    o.require(good, std::string(fx) + " expected " + std::to_string(expected) + " got " +
                        std::to_string(r.clusters.size()));
  }
  o.detail << " " << ok << "/4";
}

void branch_isolation(Outcome &o) {
  Report r = scan_fixture("corpus/structure/two_tool");
  o.require(count_clusters(r, "request_side", "archive_dir") == 1, "cluster for archive_dir");
  std::size_t other = 0;
  for (const auto &c : r.clusters) other += c.tool == "echo_text";
  o.require(other == 0, "nothing attributed to echo_text");
  o.require(r.clusters.size() == 1, "exactly one cluster");
}

void sink_coverage(Outcome &o) {
  const std::pair<const char *, const char *> fixtures[] = {
      {"exec_async", "command_exec"}, {"exec_sync", "command_exec"}, {"exec", "command_exec"},
      {"eval", "code_eval"}, {"function_ctor", "code_eval"}, {"conn_exec", "command_exec"},
      {"create_subprocess_shell", "command_exec"}, {"subprocess_run", "command_exec"},
      {"connection_query", "query"}, {"client_query", "query"}, {"db_unsafe", "query"}, {"fetch", "network"}};
  int hit = 0;
  for (const auto &[fx, category] : fixtures) {
    Report r = scan_fixture(std::string("corpus/sinks/") + fx);
    bool found = false;
    for (const auto &c : r.clusters) found |= c.direction == "request_side" && c.sink_category == category;
    hit += found;
    o.require(found, std::string(fx) + " as " + category);
  }
  o.detail << " " << hit << "/12";
}

void determinism(Outcome &o) {
  std::string root = fixture("").string();
  CommandResult a = run_cli({"scan", root, "--no-llm", "--format", "json"});
  CommandResult b = run_cli({"scan", root, "--no-llm", "--format", "json"});
  o.require(a.exit_code == 1 && b.exit_code == 1, "both scans report findings");
  o.require(!a.out.empty() && a.out == b.out, "byte-identical reports");
  o.detail << " " << a.out.size() << " bytes";
}

void ablations(Outcome &o) {
  ScanConfig full = test_config(fixture(""));
  Report base = scan(full);

  ScanConfig no_recovery = full;
  no_recovery.entrypoint_recovery = false;
  Report r1 = scan(no_recovery);
  o.require(r1.clusters.empty(), "no entrypoint recovery gives 0 findings");

  // Fixtures whose only request source is a structured accessor read.
  const char *accessor_only[] = {"running_example",         "corpus/patterns/protocol_py", "corpus/patterns/protocol_js",
                                 "corpus/dispatch/if_elif", "corpus/dispatch/switch",      "corpus/dispatch/match_case",
                                 "corpus/structure/two_tool"};
  int lost = 0;
  for (const char *fx : accessor_only) {
    std::size_t with = count_clusters(scan_fixture(fx), "request_side");
    std::size_t without =
        count_clusters(scan_fixture(fx, [](ScanConfig &c) { c.lift_accessors = false; }), "request_side");
    bool lost_here = with > 0 && without == 0;
    lost += lost_here;
    o.require(lost_here, std::string("lifting off loses ") + fx);
  }

  // Deterministic-confirmed clusters do not depend on the judge.
  std::size_t fixtures_checked = 0, confirmed = 0;
  for (const auto &fx : corpus_fixtures()) {
    std::vector<std::string> off_keys, scripted_keys, blocking_keys;
    Report off = scan_fixture(fx, [](ScanConfig &c) { c.judge_mode = JudgeMode::off; });
    Report scripted = scan_fixture(fx, [](ScanConfig &c) {
      c.judge_override = std::make_shared<ScriptedJudge>(std::vector<ScriptedJudge::Rule>{}, Decision::controlled,
                                                         Decision::not_blocks);
    });
    Report blocking = scan_fixture(fx, [](ScanConfig &c) {
      c.judge_override = std::make_shared<ScriptedJudge>(std::vector<ScriptedJudge::Rule>{},
                                                         Decision::not_controlled, Decision::blocks);
    });
    certain_clusters(off, &off_keys);
    certain_clusters(scripted, &scripted_keys);
    certain_clusters(blocking, &blocking_keys);
    confirmed += off_keys.size();
    ++fixtures_checked;
    o.require(off_keys == scripted_keys && off_keys == blocking_keys, "confirmed clusters stable for " + fx);
  }
  o.detail << " base=" << base.clusters.size() << " no_recovery=" << r1.clusters.size() << " lifting_lost=" << lost
           << "/7 confirmed=" << confirmed << " over " << fixtures_checked << " fixtures";
}

void gap_honesty(Outcome &o) {
  Report r = scan_fixture("corpus/structure/callback_flow");
  bool gap = false;
  for (const auto &g : r.gaps) gap |= g.kind == "incomplete_region" && g.tool == "run_step";
  o.require(!r.clusters.empty() || gap, "finding or incomplete_region gap");
  o.detail << " clusters=" << r.clusters.size() << " gaps=" << r.gaps.size();
}

} // namespace

int main() {
  bool ok = true;
  ok &= run_criterion(1, "running-example fidelity", running_example);
  ok &= run_criterion(2, "publication-pattern recall", pattern_recall);
  ok &= run_criterion(3, "dispatcher-family coverage", dispatcher_coverage);
  ok &= run_criterion(4, "oracle equivalence on random models", oracle_equivalence);
  ok &= run_criterion(5, "guard refinement", guard_refinement);
  ok &= run_criterion(6, "branch isolation", branch_isolation);
  ok &= run_criterion(7, "sink pack coverage", sink_coverage);
  ok &= run_criterion(8, "determinism", determinism);
  ok &= run_criterion(9, "ablations", ablations);
  ok &= run_criterion(10, "known-gap honesty", gap_honesty);
  return ok ? 0 : 1;
}
