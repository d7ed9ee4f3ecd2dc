#include "mcpflow/scan.hpp"

#include <json.hpp>

#include <sstream>

namespace mcpflow {

namespace {

using nlohmann::json;

json location_json(const ReportLocation &l) {
  return json{{"path", l.path},
              {"start_line", l.start_line},
              {"start_col", l.start_col},
              {"end_line", l.end_line},
              {"end_col", l.end_col},
              {"excerpt", l.excerpt}};
}

json cluster_json(const ReportCluster &c) {
  json steps = json::array();
  for (const auto &s : c.steps)
    steps.push_back({{"stmt_id", s.stmt_id},
                     {"rule", s.rule},
                     {"value", s.value},
                     {"procedure", s.procedure},
                     {"location", location_json(s.location)}});
  json guards = json::array();
  for (const auto &g : c.guards)
    guards.push_back({{"stmt_id", g.stmt_id},
                      {"kind", g.kind},
                      {"disposition", g.disposition},
                      {"note", g.note},
                      {"location", location_json(g.location)}});
  return json{{"id", c.id},
              {"direction", c.direction},
              {"tool", c.tool},
              {"entrypoint_id", c.entrypoint_id},
              {"handler", c.handler},
              {"handler_id", c.handler_id},
              {"root_cause", c.root_cause},
              {"confidence", c.confidence},
              {"members", c.members},
              {"source",
               {{"value", c.source_value},
                {"label", c.source_label},
                {"rationale", c.source_rationale},
                {"confidence", c.source_confidence},
                {"note", c.source_note},
                {"location", location_json(c.source_location)}}},
              {"sink",
               {{"stmt_id", c.sink_stmt_id},
                {"rule", c.sink_rule},
                {"category", c.sink_category},
                {"callee", c.sink_callee},
                {"location", location_json(c.sink_location)}}},
              {"steps", steps},
              {"guards", guards}};
}

json report_json(const Report &r) {
  const ReportMetadata &m = r.metadata;
  json md{{"tool_version", m.tool_version},
          {"rule_pack_version", m.rule_pack_version},
          {"rule_count", m.rule_count},
          {"catalog_version", m.catalog_version},
          {"judge_mode", m.judge_mode},
          {"degradations", m.degradations},
          {"units", {{"lowered", m.units_lowered}, {"partially_lowered", m.units_partial}, {"skipped", m.units_skipped}}},
          {"unsupported_constructs", m.unsupported},
          {"warnings", m.warnings},
          {"ablations", {{"entrypoint_recovery", m.entrypoint_recovery}, {"accessor_lifting", m.accessor_lifting}}}};
  json eps = json::array();
  for (const auto &e : r.entrypoints)
    eps.push_back({{"id", e.id},
                   {"tool", e.tool},
                   {"handler", e.handler},
                   {"handler_id", e.handler_id},
                   {"scope", e.scope},
                   {"provenance", e.provenance},
                   {"family", e.family},
                   {"variant", e.variant},
                   {"assumed", e.assumed},
                   {"request_seeds", e.request_seeds},
                   {"external_seeds", e.external_seeds},
                   {"operation_sinks", e.operation_sinks},
                   {"return_sinks", e.return_sinks},
                   {"forward_facts", e.forward_facts},
                   {"passthrough_calls", e.passthrough_calls},
                   {"location", location_json(e.location)}});
  json clusters = json::array();
  for (const auto &c : r.clusters) clusters.push_back(cluster_json(c));
  json suppressed = json::array();
  for (const auto &s : r.suppressed)
    suppressed.push_back({{"direction", s.direction},
                          {"tool", s.tool},
                          {"sink_stmt_id", s.sink_stmt_id},
                          {"sink_rule", s.sink_rule},
                          {"reason", s.reason},
                          {"sink_location", location_json(s.sink_location)}});
  json gaps = json::array();
  for (const auto &g : r.gaps)
    gaps.push_back({{"kind", g.kind}, {"tool", g.tool}, {"reason", g.reason}, {"location", location_json(g.location)}});
  return json{{"metadata", md}, {"entrypoints", eps}, {"clusters", clusters}, {"suppressed", suppressed}, {"gaps", gaps}};
}

json sarif_location(const ReportLocation &l, const std::string &message = {}) {
  json region{{"startLine", std::max(1, l.start_line)}, {"startColumn", std::max(1, l.start_col)}};
  if (l.end_line > 0) region["endLine"] = l.end_line;
  if (l.end_col > 0) region["endColumn"] = l.end_col;
  if (!l.excerpt.empty()) region["snippet"] = {{"text", l.excerpt}};
  json loc{{"physicalLocation", {{"artifactLocation", {{"uri", l.path}}}, {"region", region}}}};
  if (!message.empty()) loc["message"] = {{"text", message}};
  return loc;
}

std::string sarif_rule_id(const ReportCluster &c) { return c.direction + "/" + c.sink_rule; }

json report_sarif(const Report &r) {
  json rules = json::array();
  std::set<std::string> seen;
  for (const auto &c : r.clusters) {
    std::string id = sarif_rule_id(c);
    if (!seen.insert(id).second) continue;
    std::string text = c.direction == "request_side"
                           ? "Tool-call argument reaches a " + c.sink_category + " operation (" + c.sink_rule + ")"
                           : "External content reaches the tool result returned to the client";
    rules.push_back({{"id", id}, {"shortDescription", {{"text", text}}}});
  }
  json results = json::array();
  for (const auto &c : r.clusters) {
    json tflocs = json::array();
    for (const auto &s : c.steps) {
      std::string msg = s.rule + ": " + s.value + " in " + s.procedure;
      tflocs.push_back({{"location", sarif_location(s.location, msg)}});
    }
    std::ostringstream msg;
    msg << "[" << c.tool << "] " << c.source_value << " (" << c.source_label << ") flows to " << c.sink_callee
        << " via " << c.root_cause << "; confidence " << c.confidence;
    if (!c.guards.empty()) msg << "; " << c.guards.size() << " guard(s) recorded";
    json props{{"direction", c.direction},     {"tool", c.tool},           {"root_cause", c.root_cause},
               {"confidence", c.confidence},   {"members", c.members},     {"handler", c.handler},
               {"sink_category", c.sink_category}};
    json guards = json::array();
    for (const auto &g : c.guards) guards.push_back({{"kind", g.kind}, {"disposition", g.disposition}, {"note", g.note}});
    props["guards"] = guards;
    results.push_back({{"ruleId", sarif_rule_id(c)},
                       {"level", c.confidence == "certain" ? "error" : "warning"},
                       {"message", {{"text", msg.str()}}},
                       {"locations", json::array({sarif_location(c.sink_location)})},
                       {"relatedLocations", json::array({sarif_location(c.source_location, "source")})},
                       {"partialFingerprints", {{"clusterId", c.id}}},
                       {"codeFlows", json::array({{{"threadFlows", json::array({{{"locations", tflocs}}})}}})},
                       {"properties", props}});
  }
  json notes = json::array();
  for (const auto &g : r.gaps)
    notes.push_back({{"level", "note"},
                     {"message", {{"text", g.kind + (g.tool.empty() ? "" : " [" + g.tool + "]") + ": " + g.reason}}},
                     {"locations", json::array({sarif_location(g.location)})}});
  const ReportMetadata &m = r.metadata;
  json run{{"tool",
            {{"driver",
              {{"name", kToolName},
               {"version", kToolVersion},
               {"rules", rules},
               {"properties", {{"rule_pack_version", m.rule_pack_version}, {"judge_mode", m.judge_mode}}}}}}},
           {"results", results},
           {"invocations",
            json::array({{{"executionSuccessful", true}, {"toolExecutionNotifications", notes}}})},
           {"properties", {{"degradations", m.degradations}, {"warnings", m.warnings}}}};
  return json{{"$schema", "https://json.schemastore.org/sarif-2.1.0.json"}, {"version", "2.1.0"},
              {"runs", json::array({run})}};
}

std::string where(const ReportLocation &l) {
  std::ostringstream os;
  os << l.path << ":" << l.start_line << ":" << l.start_col;
  return os.str();
}

std::string first_line(const std::string &s) {
  auto nl = s.find('\n');
  return nl == std::string::npos ? s : s.substr(0, nl) + " ...";
}

std::string report_text(const Report &r) {
  std::ostringstream os;
  const ReportMetadata &m = r.metadata;
  os << m.tool_version << "  rules " << m.rule_pack_version << " (" << m.rule_count << ")  judge " << m.judge_mode
     << "\n";
  os << "units: " << m.units_lowered << " lowered, " << m.units_partial << " partial, " << m.units_skipped
     << " skipped; entrypoints: " << r.entrypoints.size() << "\n";
  for (const auto &d : m.degradations) os << "degraded: " << d << "\n";
  for (const auto &w : m.warnings) os << "warning: " << w << "\n";
  os << "\n" << r.clusters.size() << " finding cluster(s)\n";
  for (const auto &c : r.clusters) {
    os << "\n[" << c.direction << "] " << c.tool << "  " << c.sink_category << " (" << c.sink_rule << ")  "
       << c.confidence << "  root cause " << c.root_cause << "  members " << c.members << "\n";
    os << "  source " << c.source_value << " (" << c.source_label << ", " << c.source_rationale << ") at "
       << where(c.source_location) << "\n";
    for (const auto &s : c.steps)
      os << "    " << s.rule << "  " << s.value << "  " << where(s.location) << "  | " << first_line(s.location.excerpt)
         << "\n";
    for (const auto &g : c.guards)
      os << "  guard " << g.kind << " (" << g.disposition << ") at " << where(g.location) << "  | "
         << first_line(g.location.excerpt) << (g.note.empty() ? "" : "  [" + g.note + "]") << "\n";
  }
  if (!r.suppressed.empty()) {
    os << "\nsuppressed:\n";
    for (const auto &s : r.suppressed)
      os << "  [" << s.direction << "] " << s.tool << " " << s.sink_rule << " at " << where(s.sink_location) << ": "
         << s.reason << "\n";
  }
  if (!r.gaps.empty()) {
    os << "\ncoverage gaps:\n";
    for (const auto &g : r.gaps)
      os << "  " << g.kind << (g.tool.empty() ? "" : " [" + g.tool + "]") << " " << where(g.location) << ": "
         << g.reason << "\n";
  }
  return os.str();
}

} // namespace

std::string emit_report(const Report &report, OutputFormat format) {
  switch (format) {
  case OutputFormat::json: return report_json(report).dump(2) + "\n";
  case OutputFormat::sarif: return report_sarif(report).dump(2) + "\n";
  case OutputFormat::text: return report_text(report);
  }
  return {};
}

} // namespace mcpflow
