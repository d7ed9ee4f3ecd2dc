#include "mcpflow/resolve.hpp"
#include "mcpflow/scan.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

namespace mcpflow {

std::string to_string(JudgeMode m) {
  switch (m) {
  case JudgeMode::off: return "off";
  case JudgeMode::heuristic: return "heuristic";
  case JudgeMode::remote: return "remote";
  }
  return "heuristic";
}

std::string to_string(OutputFormat f) {
  switch (f) {
  case OutputFormat::json: return "json";
  case OutputFormat::sarif: return "sarif";
  case OutputFormat::text: return "text";
  }
  return "json";
}

std::optional<JudgeMode> judge_mode_from(const std::string &s) {
  for (auto m : {JudgeMode::off, JudgeMode::heuristic, JudgeMode::remote})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

std::optional<OutputFormat> output_format_from(const std::string &s) {
  for (auto f : {OutputFormat::json, OutputFormat::sarif, OutputFormat::text})
    if (to_string(f) == s) return f;
  return std::nullopt;
}

namespace {

ReportLocation report_location(const Program &prog, const SourceLocation &loc) {
  ReportLocation r;
  r.path = loc.path;
  r.start_line = loc.start_line;
  r.start_col = loc.start_col;
  r.end_line = loc.end_line;
  r.end_col = loc.end_col;
  r.excerpt = prog.excerpt(loc);
  if (r.excerpt.size() > 240) r.excerpt = r.excerpt.substr(0, 240) + "...";
  return r;
}

struct SharedInputs {
  const Program *program = nullptr;
  std::vector<SinkSite> sinks;
  std::vector<TaintSeed> external;
  Judge *judge = nullptr;
  const ScanConfig *config = nullptr;
};

struct EntrypointOutcome {
  std::vector<CandidatePath> kept;
  std::vector<SuppressedPath> suppressed;
  std::vector<ReportGap> gaps;
  ReportEntrypoint summary;
  std::string debug;
};

bool callable_argument(const Program &prog, ProcIndex p, const ValueRef &v) {
  if (v.function) return true;
  if (v.is_literal() || !v.fields.empty()) return false;
  auto r = resolve_value(prog, p, v);
  return r.resolved() && !r.external;
}

/// Calls that hand tainted data to code the engine does not follow: a
/// parameter-valued callee, or an unresolved call that also receives a
/// first-party function.
std::vector<ReportGap> closure_gaps(const Program &prog, const AnalysisScope &scope, const ReachRegion &fwd,
                                    const std::string &tool) {
  std::vector<ReportGap> out;
  std::set<StmtIndex> seen;
  for (ProcIndex p : scope.procedures)
    for (StmtIndex s : prog.proc(p).statements) {
      if (!scope.active(prog, s)) continue;
      const Statement &st = prog.stmt(s);
      if (st.kind != StmtKind::call || !st.call) continue;
      bool followed = false;
      for (const CallEdge *e : prog.call_graph.edges_at(s)) followed |= e->callee && scope.procedures.count(*e->callee);
      if (followed) continue;
      const CallSite &cs = *st.call;
      bool tainted = false;
      for (const auto &a : cs.args)
        if (!a.is_literal() && fwd.labels_at(p, Location::of(a))) tainted = true;
      if (cs.object && !cs.object->is_literal() && fwd.labels_at(p, Location::of(*cs.object))) tainted = true;
      if (!tainted) continue;
      std::string why;
      if (cs.form == CalleeForm::name || cs.form == CalleeForm::computed) {
        Resolution r = resolve_call(prog, s);
        if (!r.resolved() && r.reason == "parameter") why = "tainted data passed to a function-valued parameter";
      }
      if (why.empty())
        for (const auto &a : cs.args)
          if (callable_argument(prog, p, a)) {
            why = "callback handed to an unresolved call together with tainted data";
            break;
          }
      if (why.empty() || !seen.insert(s).second) continue;
      ReportGap g;
      g.kind = "incomplete_region";
      g.tool = tool;
      g.reason = "callback flow not modeled: " + why + " (" + (cs.qualified.empty() ? cs.callee : cs.qualified) + ")";
      g.location = report_location(prog, st.location);
      out.push_back(std::move(g));
    }
  return out;
}

std::string debug_trace(const Program &prog, const Entrypoint &ep, const std::vector<TaintSeed> &seeds,
                        const ReachRegion &fwd, const ReachRegion &bop, const ReachRegion &bret,
                        const std::vector<CandidatePath> &paths) {
  std::ostringstream os;
  os << "entrypoint\t" << ep.id << "\t" << ep.tool << "\t" << prog.proc(ep.handler).name << "\n";
  for (const auto &s : seeds)
    os << "seed\t" << to_string(s.label) << "\t" << prog.proc(s.procedure).name << "\t" << s.value.str() << "\t"
       << to_string(s.rationale) << "\t" << to_string(s.confidence) << "\n";
  auto dump = [&](const char *tag, const ReachRegion &r) {
    for (const auto &[p, loc, lab] : r.snapshot())
      os << tag << "\t" << prog.proc(p).name << "\t" << loc.str() << "\t" << int(lab) << "\n";
    if (r.incomplete) os << tag << "-incomplete\t" << r.incomplete_reason << "\n";
  };
  dump("forward", fwd);
  dump("backward-op", bop);
  dump("backward-ret", bret);
  for (const auto &p : paths) {
    os << "path\t" << to_string(p.direction) << "\t" << p.root_cause() << "\n";
    for (const auto &s : p.steps)
      os << "  step\t" << (s.stmt ? prog.stmt(*s.stmt).id : "-") << "\t" << s.rule << "\t"
         << prog.proc(s.procedure).name << "\t" << s.value.str() << "\n";
  }
  return os.str();
}

EntrypointOutcome analyze_entrypoint(const SharedInputs &in, const Entrypoint &ep) {
  const Program &prog = *in.program;
  const ScanConfig &cfg = *in.config;
  EntrypointOutcome out;
  EngineLimits limits = cfg.limits;
  if (cfg.timeout_per_entrypoint > 0)
    limits.deadline = std::chrono::steady_clock::now() +
                      std::chrono::milliseconds(static_cast<long long>(cfg.timeout_per_entrypoint * 1000));

  AnalysisScope scope = make_analysis_scope(prog, ep);
  SeedOptions opts;
  opts.lift_accessors = cfg.lift_accessors;
  std::vector<TaintSeed> req = seed_request_sources(prog, ep, in.judge, opts);
  std::vector<TaintSeed> ext;
  for (const auto &s : in.external)
    if (s.origin_stmt && scope.active(prog, *s.origin_stmt)) ext.push_back(s);
  std::vector<TaintSeed> all = req;
  all.insert(all.end(), ext.begin(), ext.end());

  std::vector<SinkTarget> op_targets = sink_targets(prog, scope, in.sinks);
  std::vector<ReturnSink> rets = derive_return_sinks(prog, ep);
  std::vector<SinkTarget> ret_targets = sink_targets(prog, rets);

  ReachRegion fwd = reach_forward(prog, scope, seed_facts(all), limits);
  std::vector<FactKey> op_keys, ret_keys;
  for (const auto &t : op_targets) {
    for (const auto &l : t.operands) op_keys.push_back({t.procedure, l});
    for (const auto &l : t.bound) op_keys.push_back({t.procedure, l});
  }
  for (const auto &t : ret_targets)
    for (const auto &l : t.operands) ret_keys.push_back({t.procedure, l});
  ReachRegion bop = reach_backward(prog, scope, op_keys, limits);
  ReachRegion bret = reach_backward(prog, scope, ret_keys, limits);

  PathContext ctx{&ep, &scope, &fwd};
  auto req_paths = intersect_and_build_paths(prog, ctx, bop, PathDirection::request_side, req, op_targets, limits);
  auto ret_paths = intersect_and_build_paths(prog, ctx, bret, PathDirection::return_side, ext, ret_targets, limits);

  std::vector<CandidatePath> paths = std::move(req_paths.paths);
  paths.insert(paths.end(), ret_paths.paths.begin(), ret_paths.paths.end());
  const SourceLocation &handler_loc = prog.proc(ep.handler).location;
  auto gap = [&](const std::string &kind, const std::string &reason, const SourceLocation &loc) {
    ReportGap g;
    g.kind = kind;
    g.tool = ep.tool;
    g.reason = reason;
    g.location = report_location(prog, loc);
    out.gaps.push_back(std::move(g));
  };
  std::vector<CandidatePath> valid;
  for (auto &p : paths) {
    auto errors = validate_path(prog, scope, p);
    if (!errors.empty()) {
      gap("internal", "dropped a path that failed validation: " + errors.front(), handler_loc);
      continue;
    }
    p.guards = collect_guard_evidence(prog, ctx, p);
    valid.push_back(std::move(p));
  }
  RefineResult refined = refine_paths(prog, std::move(valid), in.judge);
  out.kept = std::move(refined.kept);
  out.suppressed = std::move(refined.suppressed);

  for (const ReachRegion *r : {&fwd, &bop, &bret})
    if (r->incomplete) {
      gap("incomplete_region", std::string(r == &fwd ? "forward" : "backward") + " region: " + r->incomplete_reason,
          handler_loc);
    }
  if (req_paths.truncated || ret_paths.truncated)
    gap("incomplete_region", "path enumeration truncated", handler_loc);
  for (auto &g : closure_gaps(prog, scope, fwd, ep.tool)) out.gaps.push_back(std::move(g));

  ReportEntrypoint &sum = out.summary;
  sum.id = ep.id;
  sum.tool = ep.tool;
  sum.handler = prog.proc(ep.handler).name;
  sum.handler_id = prog.proc(ep.handler).id;
  sum.scope = ep.scope ? ep.scope->id : "top";
  sum.provenance = to_string(ep.provenance);
  sum.family = ep.provenance == Provenance::from_dispatch ? to_string(ep.family) : "direct";
  sum.variant = ep.variant;
  sum.assumed = ep.assumed;
  sum.request_seeds = req.size();
  sum.external_seeds = ext.size();
  sum.operation_sinks = op_targets.size();
  sum.return_sinks = rets.size();
  sum.forward_facts = fwd.facts.size();
  sum.passthrough_calls = fwd.passthrough;
  sum.location = report_location(prog, handler_loc);
  if (cfg.debug_dump) {
    std::vector<CandidatePath> all_paths = out.kept;
    for (const auto &s : out.suppressed) all_paths.push_back(s.path);
    out.debug = debug_trace(prog, ep, all, fwd, bop, bret, all_paths);
  }
  return out;
}

ReportCluster render_cluster(const Program &prog, const FindingCluster &c) {
  ReportCluster r;
  r.id = stable_id(c.key(), 0, 0, "cluster");
  r.direction = to_string(c.direction);
  r.tool = c.tool;
  r.entrypoint_id = c.entrypoint_id;
  r.handler = prog.proc(c.representative.handler).name;
  r.handler_id = c.handler_id;
  r.root_cause = c.root_cause;
  r.confidence = to_string(c.confidence);
  r.members = c.members;
  const CandidatePath &p = c.representative;
  r.source_value = p.seed.value.str();
  r.source_label = to_string(p.seed.label);
  r.source_rationale = to_string(p.seed.rationale);
  r.source_confidence = to_string(p.seed.confidence);
  r.source_note = p.seed.note;
  r.source_location = report_location(prog, p.seed.origin);
  r.sink_stmt_id = c.sink_stmt_id;
  r.sink_rule = p.sink.rule_id;
  r.sink_category = p.sink.op ? to_string(p.sink.op->category) : "protocol_return";
  r.sink_callee = p.sink.op ? p.sink.op->callee : "return";
  r.sink_location = report_location(prog, prog.stmt(p.sink.stmt).location);
  for (const auto &s : p.steps) {
    ReportStep st;
    st.stmt_id = s.stmt ? prog.stmt(*s.stmt).id : "";
    st.rule = s.rule;
    st.value = s.value.str();
    st.procedure = prog.proc(s.procedure).name;
    st.location = report_location(prog, s.location);
    r.steps.push_back(std::move(st));
  }
  for (const auto &g : p.guards) {
    ReportGuard rg;
    rg.stmt_id = prog.stmt(g.stmt).id;
    rg.kind = to_string(g.kind);
    rg.disposition = to_string(g.disposition);
    rg.note = g.note;
    rg.location = report_location(prog, prog.stmt(g.stmt).location);
    r.guards.push_back(std::move(rg));
  }
  return r;
}

std::string file_safe(const std::string &s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

} // namespace

Report scan_program(const ScanConfig &config, const LoadResult &loaded) {
  const Program &prog = loaded.program;
  Report report;
  SinkRulePack pack = config.rules_path ? load_rule_pack(*config.rules_path) : default_rule_pack();
  PatternCatalog catalog = config.catalog_path ? load_catalog(*config.catalog_path) : default_catalog();

  std::shared_ptr<Judge> judge;
  if (config.judge_override) {
    judge = std::make_shared<MemoJudge>(config.judge_override);
  } else if (config.judge_mode == JudgeMode::heuristic) {
    judge = std::make_shared<MemoJudge>(std::make_shared<HeuristicJudge>());
  } else if (config.judge_mode == JudgeMode::remote) {
    judge = std::make_shared<MemoJudge>(std::make_shared<RemoteJudge>(config.judge_endpoint, config.judge_timeout_seconds,
                                                                      config.judge_token_env));
  }

  ReportMetadata &md = report.metadata;
  md.tool_version = std::string(kToolName) + " " + kToolVersion;
  md.rule_pack_version = pack.version;
  md.rule_count = pack.rules.size();
  md.catalog_version = catalog.version;
  md.judge_mode = judge ? judge->id() : "off";
  md.units_lowered = loaded.report.count(UnitStatus::lowered);
  md.units_partial = loaded.report.count(UnitStatus::partially_lowered);
  md.units_skipped = loaded.report.count(UnitStatus::skipped);
  md.unsupported = loaded.report.unsupported_totals();
  md.warnings = loaded.report.warnings;
  md.warnings.insert(md.warnings.end(), pack.warnings.begin(), pack.warnings.end());
  md.entrypoint_recovery = config.entrypoint_recovery;
  md.accessor_lifting = config.lift_accessors;

  for (const auto &u : loaded.report.units) {
    if (u.status == UnitStatus::lowered) continue;
    ReportGap g;
    g.kind = u.status == UnitStatus::skipped ? "skipped_unit" : "partially_lowered";
    g.reason = u.issues.empty() ? "" : u.issues.front();
    if (g.reason.empty() && !u.unsupported.empty()) {
      std::ostringstream os;
      os << "unsupported constructs:";
      for (const auto &[k, n] : u.unsupported) os << " " << k << "x" << n;
      g.reason = os.str();
    }
    // The gap covers the whole file.
    g.location.path = u.path;
    g.location.start_line = 1;
    g.location.start_col = 1;
    report.gaps.push_back(std::move(g));
  }

  Specialization spec;
  if (config.entrypoint_recovery) spec = recover_entrypoints(prog, catalog);
  for (const auto &eg : spec.gaps) {
    ReportGap g;
    g.kind = "unresolved_handler";
    g.tool = eg.tool;
    g.reason = eg.reason;
    g.location = report_location(prog, eg.location);
    report.gaps.push_back(std::move(g));
  }

  SharedInputs in;
  in.program = &prog;
  in.sinks = match_operation_sinks(prog, pack);
  in.external = recognize_external_sources(prog, judge.get());
  in.judge = judge.get();
  in.config = &config;

  std::vector<EntrypointOutcome> outcomes(spec.entrypoints.size());
  unsigned workers = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, std::max<std::size_t>(1, spec.entrypoints.size()));
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i; (i = next++) < spec.entrypoints.size();) outcomes[i] = analyze_entrypoint(in, spec.entrypoints[i]);
  };
  if (workers <= 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(run);
    for (auto &t : pool) t.join();
  }

  std::vector<CandidatePath> kept;
  for (auto &o : outcomes) {
    report.entrypoints.push_back(o.summary);
    kept.insert(kept.end(), o.kept.begin(), o.kept.end());
    for (const auto &s : o.suppressed) {
      ReportSuppressed rs;
      rs.direction = to_string(s.path.direction);
      rs.tool = s.path.tool;
      rs.sink_stmt_id = prog.stmt(s.path.sink.stmt).id;
      rs.sink_rule = s.path.sink.rule_id;
      rs.sink_location = report_location(prog, prog.stmt(s.path.sink.stmt).location);
      rs.reason = s.reason;
      bool dup = false;
      for (const auto &e : report.suppressed)
        dup |= e.direction == rs.direction && e.tool == rs.tool && e.sink_stmt_id == rs.sink_stmt_id && e.reason == rs.reason;
      if (!dup) report.suppressed.push_back(std::move(rs));
    }
    for (auto &g : o.gaps) report.gaps.push_back(std::move(g));
  }
  for (const auto &c : dedupe_findings(prog, kept)) report.clusters.push_back(render_cluster(prog, c));
  if (judge) md.degradations = judge->degradations();

  if (config.debug_dump) {
    std::filesystem::create_directories(*config.debug_dump);
    std::ofstream(*config.debug_dump / "program.txt") << dump_program(prog);
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      const auto &ep = spec.entrypoints[i];
      std::ofstream(*config.debug_dump / (file_safe(ep.tool) + "-" + ep.id.substr(0, 8) + ".txt")) << outcomes[i].debug;
    }
  }
  return report;
}

Report scan(const ScanConfig &config) {
  // Validate packs before the (slower) frontend work so fatal errors surface first.
  if (config.rules_path) load_rule_pack(*config.rules_path);
  if (config.catalog_path) load_catalog(*config.catalog_path);
  LoadResult loaded = load_project(config.root, config.frontend);
  return scan_program(config, loaded);
}

} // namespace mcpflow
